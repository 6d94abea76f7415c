/** The playground page: three device panes, a control bar, and the event
 * stream. All verdicts and states shown here are read back from service
 * responses and the admin event feed; the page itself decides nothing.
 */

import { Api, ApiError, challengeLinks } from "./api.js";
import { renderQrCard } from "./qr.js";
import type { ClickResponseDoc, EventDoc, SimDeviceDoc } from "./types.js";

const api = new Api("");
const PANE_ORDER = ["alice_phone", "alice_laptop", "mallory_device"];
const KNOWN_ACCOUNT = "alice";

let sinceSeq = 0;
let lost = false;
const browserPanels = new Map<string, HTMLElement>();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function toast(text: string, isError = false): void {
  const bar = document.getElementById("toast")!;
  bar.textContent = text;
  bar.className = isError ? "toast error" : "toast";
  bar.style.opacity = "1";
  window.setTimeout(() => (bar.style.opacity = "0"), 3500);
}

async function guarded<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    return await work();
  } catch (error) {
    if (error instanceof ApiError) {
      toast(`${error.body["error"] ?? error.body["outcome"]}: ${error.body["detail"] ?? ""}`, true);
    } else {
      toast(String(error), true);
    }
    return undefined;
  }
}

// -- pane browser panel: the outcome of the pane's last click -------------------

function describeOutcome(doc: ClickResponseDoc): string {
  switch (doc.outcome) {
    case "passed":
      return "challenge passed — this device is recognized";
    case "escalated":
      return `not recognized — escalation via ${doc.escalation_method}`;
    case "denied":
      return `denied (${doc.detail ?? "reported"})`;
    case "expired":
      return "link expired";
    case "already_used":
      return "link already used";
    case "unknown_token":
      return "unknown link";
    case "review":
      return `review: ${doc.kind} — ${doc.payload_summary}`;
    case "enrolled":
      return "device enrolled — cookie installed";
    case "cookie_claimed":
      return "cookie claimed — device now recognized";
    default:
      return doc.outcome;
  }
}

function verdictBadge(doc: ClickResponseDoc): HTMLElement | null {
  if (doc.verdict === undefined) return null;
  const badge = el("span", `badge verdict-${doc.verdict}`, doc.verdict);
  badge.title = `score ${doc.fingerprint_score?.toFixed(3)} cookie ${doc.cookie_matched}`;
  return badge;
}

function renderBrowser(deviceId: string, doc: ClickResponseDoc, status: number): void {
  const panel = browserPanels.get(deviceId);
  if (!panel) return;
  panel.replaceChildren();
  const head = el("div", "browser-head", `HTTP ${status} · ${describeOutcome(doc)}`);
  const badge = verdictBadge(doc);
  if (badge) head.appendChild(badge);
  panel.appendChild(head);

  if (doc.outcome === "escalated" && doc.escalation_id) {
    if (doc.escalation_method === "KBA" && doc.kba_questions?.length) {
      panel.appendChild(kbaForm(deviceId, doc.escalation_id, doc.kba_questions));
    } else if (doc.escalation_method === "RESOURCE_PROOF") {
      panel.appendChild(proofForm(deviceId, doc.escalation_id));
    } else {
      panel.appendChild(el("p", "hint",
        "a new challenge went to the second registered phone"));
    }
  }
  if (doc.outcome === "passed" && doc.approval_url) {
    openApproval(deviceId, doc.approval_url);
  }
  if (doc.outcome === "review") {
    panel.appendChild(approvalControls(deviceId, doc));
  }
}

function kbaForm(deviceId: string, escalationId: string, questions: string[]): HTMLElement {
  const form = el("div", "form");
  const inputs: HTMLInputElement[] = [];
  questions.forEach((question, index) => {
    form.appendChild(el("label", undefined, `${index + 1}. ${question}`));
    const input = el("input");
    input.placeholder = "answer";
    inputs.push(input);
    form.appendChild(input);
  });
  const submit = el("button", undefined, "submit answers");
  submit.addEventListener("click", async () => {
    const answers = inputs.map((input, i) => [i, input.value] as [number, string]);
    const result = await guarded(() => api.answerKba(escalationId, answers));
    if (!result) return;
    toast(`KBA ${result.result}` +
      (result.attempts_remaining !== undefined ? ` (${result.attempts_remaining} attempts left)` : ""));
    if (result.approval_url) openApproval(deviceId, result.approval_url);
  });
  form.appendChild(submit);
  return form;
}

function proofForm(deviceId: string, escalationId: string): HTMLElement {
  const form = el("div", "form");
  form.appendChild(el("label", undefined,
    "enter the 8-digit code from the bank statement line (see the owner pane)"));
  const input = el("input");
  input.placeholder = "deposit ref code";
  form.appendChild(input);
  const submit = el("button", undefined, "prove it");
  submit.addEventListener("click", async () => {
    const result = await guarded(() => api.submitProof(escalationId, input.value.trim()));
    if (!result) return;
    toast(`resource proof ${result.result}`);
    if (result.approval_url) openApproval(deviceId, result.approval_url);
  });
  form.appendChild(submit);
  return form;
}

async function openApproval(deviceId: string, approvalUrl: string): Promise<void> {
  const sessionToken = approvalUrl.split("/").pop()!;
  const view = await guarded(() => api.approvalView(sessionToken));
  if (!view) return;
  const panel = browserPanels.get(deviceId);
  if (!panel) return;
  panel.replaceChildren();
  panel.appendChild(el("div", "browser-head", describeOutcome(view)));
  panel.appendChild(approvalControls(deviceId, view, sessionToken));
}

function approvalControls(
  deviceId: string,
  view: ClickResponseDoc,
  sessionToken?: string,
): HTMLElement {
  const wrap = el("div", "form");
  const token = sessionToken ?? "";
  let payloadInput: HTMLInputElement | null = null;
  if (view.requires_completion_payload) {
    wrap.appendChild(el("label", undefined, "new password (set on this device)"));
    payloadInput = el("input");
    payloadInput.type = "password";
    wrap.appendChild(payloadInput);
  }
  const row = el("div", "row");
  const approve = el("button", "approve", "approve");
  approve.addEventListener("click", async () => {
    const result = await guarded(() =>
      api.submitApproval(token, "APPROVE", payloadInput?.value || undefined));
    if (result) toast(`action ${result.action.state}`);
  });
  const deny = el("button", "deny", "this wasn't me");
  deny.addEventListener("click", async () => {
    const result = await guarded(() => api.submitApproval(token, "DENY"));
    if (result) toast(`action ${result.action.state}`);
  });
  row.append(approve, deny);
  wrap.appendChild(row);
  if (view.pending_offer_id) {
    wrap.appendChild(offerControls(view.pending_offer_id, deviceId));
  }
  return wrap;
}

function offerControls(offerId: string, deviceId: string): HTMLElement {
  const wrap = el("div", "offer");
  wrap.appendChild(el("p", undefined,
    "a different device failed the original click — was that you? register it?"));
  const row = el("div", "row");
  const yes = el("button", "approve", "yes, register it");
  yes.addEventListener("click", async () => {
    const result = await guarded(() => api.decideOffer(offerId, true));
    if (!result) return;
    toast(`device registered: ${result.device_id}`);
    if (result.claim_url) {
      const panel = browserPanels.get(deviceId);
      panel?.appendChild(el("p", "hint",
        "cookie claim link (drag the text onto the new device pane):"));
      const card = renderQrCard(result.claim_url);
      panel?.appendChild(card);
    }
  });
  const no = el("button", "deny", "no — not me");
  no.addEventListener("click", async () => {
    const result = await guarded(() => api.decideOffer(offerId, false));
    if (result) toast("offer declined; fraud signal recorded");
  });
  row.append(yes, no);
  wrap.appendChild(row);
  return wrap;
}

// -- panes ------------------------------------------------------------------------

function paneTitle(id: string): string {
  switch (id) {
    case "alice_phone":
      return "victim phone";
    case "alice_laptop":
      return "victim laptop";
    case "mallory_device":
      return "attacker device";
    default:
      return id;
  }
}

function renderPane(device: SimDeviceDoc): HTMLElement {
  const pane = el("section", "pane");
  pane.dataset.device = device.sim_device_id;

  const header = el("header");
  header.appendChild(el("h2", undefined, paneTitle(device.sim_device_id)));
  header.appendChild(el("span", "sub", device.sim_device_id));
  const phones = device.routed_phones.length
    ? `receives ${device.routed_phones.join(", ")}`
    : "no number routed here";
  header.appendChild(el("span", "sub", phones));
  pane.appendChild(header);

  const domain = Object.keys(device.cookie_jar)[0];
  const jar = el("div", "cookie-jar");
  jar.textContent = domain
    ? `cookie: ${device.cookie_jar[domain].slice(0, 10)}…`
    : "cookie: none";
  jar.classList.toggle("empty", !domain);
  pane.appendChild(jar);

  pane.appendChild(fingerprintEditor(device));
  pane.appendChild(inboxList(device));

  if (device.statement_channel.length) {
    const bank = el("div", "statements");
    bank.appendChild(el("h3", undefined, "bank statement"));
    for (const line of device.statement_channel) {
      bank.appendChild(el("code", undefined, line));
    }
    pane.appendChild(bank);
  }

  const browser = el("div", "browser");
  const existing = browserPanels.get(device.sim_device_id);
  if (existing) browser.replaceChildren(...existing.childNodes);
  browserPanels.set(device.sim_device_id, browser);
  pane.appendChild(browser);

  pane.addEventListener("dragover", (event) => {
    event.preventDefault();
    pane.classList.add("drop");
  });
  pane.addEventListener("dragleave", () => pane.classList.remove("drop"));
  pane.addEventListener("drop", async (event) => {
    event.preventDefault();
    pane.classList.remove("drop");
    const url = event.dataTransfer?.getData("application/x-da2fa-url");
    const message = event.dataTransfer?.getData("application/x-da2fa-message");
    if (url) {
      const result = await guarded(() => api.simClick(device.sim_device_id, url));
      if (result) renderBrowser(device.sim_device_id, result.response, result.status);
      await refresh();
    } else if (message) {
      const { from, id } = JSON.parse(message) as { from: string; id: string };
      await guarded(() => api.simForward(from, id, device.sim_device_id));
      toast(`forwarded ${id} to ${device.sim_device_id}`);
      await refresh();
    }
  });
  return pane;
}

function fingerprintEditor(device: SimDeviceDoc): HTMLElement {
  const details = el("details", "fingerprint");
  details.appendChild(el("summary", undefined,
    `fingerprint (${Object.keys(device.fingerprint).length} attributes)`));
  const grid = el("div", "fp-grid");
  const inputs = new Map<string, HTMLInputElement>();
  for (const [key, value] of Object.entries(device.fingerprint)) {
    grid.appendChild(el("label", undefined, key));
    const input = el("input");
    input.value = value;
    inputs.set(key, input);
    grid.appendChild(input);
  }
  details.appendChild(grid);
  const apply = el("button", undefined, "apply fingerprint");
  apply.addEventListener("click", async () => {
    const doc: Record<string, string> = {};
    for (const [key, input] of inputs) {
      if (input.value.trim()) doc[key] = input.value.trim();
    }
    await guarded(() => api.setFingerprint(device.sim_device_id, doc));
    toast(`${device.sim_device_id} fingerprint updated`);
  });
  details.appendChild(apply);
  return details;
}

function inboxList(device: SimDeviceDoc): HTMLElement {
  const wrap = el("div", "inbox");
  wrap.appendChild(el("h3", undefined, `inbox (${device.inbox.length})`));
  for (const message of [...device.inbox].reverse()) {
    const card = el("div", "sms");
    card.draggable = true;
    card.addEventListener("dragstart", (event) => {
      event.dataTransfer?.setData(
        "application/x-da2fa-message",
        JSON.stringify({ from: device.sim_device_id, id: message.message_id }),
      );
    });
    card.appendChild(el("div", "sms-meta",
      `${message.message_id} → ${message.to_phone}`));
    card.appendChild(el("div", "sms-body", message.body));
    const links = challengeLinks(message.body);
    if (links) {
      const row = el("div", "row");
      const yes = el("button", "approve", "click Yes link");
      yes.addEventListener("click", async () => {
        const result = await guarded(() => api.simClick(device.sim_device_id, links.approve));
        if (result) renderBrowser(device.sim_device_id, result.response, result.status);
        await refresh();
      });
      const report = el("button", "deny", "click Not-you link");
      report.addEventListener("click", async () => {
        const result = await guarded(() => api.simClick(device.sim_device_id, links.report));
        if (result) renderBrowser(device.sim_device_id, result.response, result.status);
        await refresh();
      });
      row.append(yes, report);
      card.appendChild(row);
    }
    card.appendChild(el("div", "hint", "drag onto another pane to forward"));
    wrap.appendChild(card);
  }
  return wrap;
}

// -- controls ------------------------------------------------------------------------

function controlBar(devices: SimDeviceDoc[]): void {
  const actionButton = document.getElementById("trigger-action") as HTMLButtonElement;
  actionButton.onclick = async () => {
    const kind = (document.getElementById("action-kind") as HTMLSelectElement).value;
    const summary = (document.getElementById("action-summary") as HTMLInputElement).value
      || "unspecified request";
    const result = await guarded(() => api.initiateAction(KNOWN_ACCOUNT, kind, summary));
    if (result) toast(`challenge sent for ${result.action.action_id}`);
    await refresh();
  };

  const jackSelect = document.getElementById("jack-device") as HTMLSelectElement;
  if (jackSelect.options.length !== devices.length) {
    jackSelect.replaceChildren(
      ...devices.map((d) => new Option(paneTitle(d.sim_device_id), d.sim_device_id)),
    );
  }
  (document.getElementById("jack-button") as HTMLButtonElement).onclick = async () => {
    const target = jackSelect.value;
    await guarded(() => api.simJack(DEMO_PHONE, target));
    toast(`carrier now routes ${DEMO_PHONE} to ${target}`);
    await refresh();
  };

  (document.getElementById("enroll-button") as HTMLButtonElement).onclick = async () => {
    const laptop = devices.find((d) => d.sim_device_id === "alice_laptop");
    if (!laptop) return;
    const cookie = Object.values(laptop.cookie_jar)[0];
    const result = await guarded(() =>
      api.beginEnrollment(KNOWN_ACCOUNT, cookie, laptop.fingerprint));
    if (!result) return;
    const holder = document.getElementById("qr-holder")!;
    holder.replaceChildren(renderQrCard(result.enrollment_url));
    toast("QR issued — drag it onto the device to enroll");
  };
}

const DEMO_PHONE = "+15550100001";

// -- event stream --------------------------------------------------------------------

function renderEvent(event: EventDoc): HTMLElement {
  const row = el("div", `event event-${event.kind}`);
  const subjects = Object.entries(event.subjects)
    .map(([k, v]) => `${k.replace(/_id$/, "")}=${v}`)
    .join(" ");
  row.appendChild(el("span", "seq", `#${event.seq}`));
  row.appendChild(el("span", "kind", event.kind));
  row.appendChild(el("span", "subjects", subjects));
  const interesting = ["verdict", "outcome", "result", "reason", "method", "to", "decision"]
    .filter((k) => k in event.details)
    .map((k) => `${k}=${event.details[k]}`)
    .join(" ");
  if (interesting) row.appendChild(el("span", "details", interesting));
  return row;
}

async function pollEvents(): Promise<void> {
  try {
    const { events } = await api.adminEvents(sinceSeq);
    if (lost) {
      lost = false;
      document.getElementById("lost-banner")!.hidden = true;
    }
    if (events.length === 0) return;
    const rail = document.getElementById("events")!;
    for (const event of events) {
      rail.prepend(renderEvent(event));
      sinceSeq = Math.max(sinceSeq, event.seq);
    }
  } catch {
    lost = true;
    document.getElementById("lost-banner")!.hidden = false;
  }
}

// -- top-level refresh loop --------------------------------------------------------------

async function refresh(): Promise<void> {
  try {
    const { devices } = await api.simDevices();
    const holder = document.getElementById("panes")!;
    const ordered = [...devices].sort(
      (a, b) => PANE_ORDER.indexOf(a.sim_device_id) - PANE_ORDER.indexOf(b.sim_device_id),
    );
    holder.replaceChildren(...ordered.map(renderPane));
    controlBar(ordered);
  } catch {
    lost = true;
    document.getElementById("lost-banner")!.hidden = false;
  }
}

export function start(): void {
  const tokenInput = document.getElementById("admin-token") as HTMLInputElement;
  tokenInput.value = api.adminToken;
  tokenInput.addEventListener("change", () => (api.adminToken = tokenInput.value));
  void refresh();
  window.setInterval(() => void refresh(), 2500);
  window.setInterval(() => void pollEvents(), 1200);
}

start();
