/** Typed client for the service's documented HTTP endpoints.
 *
 * Every request is recorded against the documented endpoint templates, so
 * a session can be audited afterwards: the playground must never touch an
 * undocumented path.
 */

import type {
  AdminAccountDoc,
  ClickResponseDoc,
  EventDoc,
  SimClickResponse,
  SimDeviceDoc,
} from "./types.js";

/** The service's documented surface; mirrors the README endpoint table. */
export const DOCUMENTED_ENDPOINTS: readonly string[] = [
  "GET /",
  "POST /actions",
  "GET /c/{token}",
  "POST /c/{token}/fp",
  "GET /a/{session}",
  "POST /a/{session}",
  "POST /escalations/{id}/kba",
  "POST /escalations/{id}/proof",
  "POST /enrollments",
  "GET /r/{reg_token}",
  "POST /r/{reg_token}",
  "GET /claim/{token}",
  "POST /offers/{id}/confirm",
  "GET /admin/accounts/{id}",
  "GET /admin/events",
  "GET /sim/devices",
  "GET /sim/devices/{id}",
  "POST /sim/devices/{id}/fingerprint",
  "POST /sim/jack",
  "POST /sim/forward",
  "POST /sim/click",
];

const TEMPLATES: readonly { method: string; pattern: RegExp; template: string }[] = [
  { method: "GET", pattern: /^\/$/, template: "GET /" },
  { method: "POST", pattern: /^\/actions$/, template: "POST /actions" },
  { method: "GET", pattern: /^\/c\/[^/]+$/, template: "GET /c/{token}" },
  { method: "POST", pattern: /^\/c\/[^/]+\/fp$/, template: "POST /c/{token}/fp" },
  { method: "GET", pattern: /^\/a\/[^/]+$/, template: "GET /a/{session}" },
  { method: "POST", pattern: /^\/a\/[^/]+$/, template: "POST /a/{session}" },
  { method: "POST", pattern: /^\/escalations\/[^/]+\/kba$/, template: "POST /escalations/{id}/kba" },
  { method: "POST", pattern: /^\/escalations\/[^/]+\/proof$/, template: "POST /escalations/{id}/proof" },
  { method: "POST", pattern: /^\/enrollments$/, template: "POST /enrollments" },
  { method: "GET", pattern: /^\/r\/[^/]+$/, template: "GET /r/{reg_token}" },
  { method: "POST", pattern: /^\/r\/[^/]+$/, template: "POST /r/{reg_token}" },
  { method: "GET", pattern: /^\/claim\/[^/]+$/, template: "GET /claim/{token}" },
  { method: "POST", pattern: /^\/offers\/[^/]+\/confirm$/, template: "POST /offers/{id}/confirm" },
  { method: "GET", pattern: /^\/admin\/accounts\/[^/]+$/, template: "GET /admin/accounts/{id}" },
  { method: "GET", pattern: /^\/admin\/events$/, template: "GET /admin/events" },
  { method: "GET", pattern: /^\/sim\/devices$/, template: "GET /sim/devices" },
  { method: "GET", pattern: /^\/sim\/devices\/[^/]+$/, template: "GET /sim/devices/{id}" },
  { method: "POST", pattern: /^\/sim\/devices\/[^/]+\/fingerprint$/, template: "POST /sim/devices/{id}/fingerprint" },
  { method: "POST", pattern: /^\/sim\/jack$/, template: "POST /sim/jack" },
  { method: "POST", pattern: /^\/sim\/forward$/, template: "POST /sim/forward" },
  { method: "POST", pattern: /^\/sim\/click$/, template: "POST /sim/click" },
];

export function templateFor(method: string, path: string): string {
  for (const row of TEMPLATES) {
    if (row.method === method && row.pattern.test(path)) return row.template;
  }
  return `${method} ${path}`; // undocumented; the audit will flag it
}

export interface AccessRecord {
  method: string;
  path: string;
  template: string;
  status: number;
}

export class ApiError extends Error {
  constructor(public status: number, public body: Record<string, unknown>) {
    super(`HTTP ${status}: ${JSON.stringify(body)}`);
  }
}

export class Api {
  readonly accessLog: AccessRecord[] = [];

  constructor(
    private baseUrl: string,
    public adminToken: string = "local-admin",
  ) {}

  /** Templates touched so far; empty difference from the documented list
   * is the endpoint-access audit. */
  undocumentedCalls(): AccessRecord[] {
    const allowed = new Set(DOCUMENTED_ENDPOINTS);
    return this.accessLog.filter((rec) => !allowed.has(rec.template));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    headers?: Record<string, string>,
  ): Promise<T> {
    const query = path.split("?")[0];
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: {
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
        ...(headers ?? {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
      redirect: "manual",
    });
    this.accessLog.push({
      method,
      path,
      template: templateFor(method, query),
      status: response.status,
    });
    const doc = (await response.json()) as T & { error?: string };
    if (response.status >= 400 && doc.error) {
      throw new ApiError(response.status, doc as Record<string, unknown>);
    }
    return doc;
  }

  // -- core protocol ------------------------------------------------------

  initiateAction(
    accountId: string,
    kind: string,
    payloadSummary: string,
    riskLevel?: string,
  ): Promise<{ outcome: string; action: { action_id: string; state: string }; challenge_id: string }> {
    return this.request("POST", "/actions", {
      account_id: accountId,
      kind,
      payload_summary: payloadSummary,
      ...(riskLevel ? { risk_level: riskLevel } : {}),
    });
  }

  answerKba(
    escalationId: string,
    answers: [number, string][],
  ): Promise<{ result: string; attempts_remaining?: number; approval_url?: string; offer_id?: string }> {
    return this.request("POST", `/escalations/${escalationId}/kba`, { answers });
  }

  submitProof(escalationId: string, code: string): Promise<{ result: string; approval_url?: string }> {
    return this.request("POST", `/escalations/${escalationId}/proof`, { code });
  }

  approvalView(sessionToken: string): Promise<ClickResponseDoc> {
    return this.request("GET", `/a/${sessionToken}`);
  }

  submitApproval(
    sessionToken: string,
    decision: "APPROVE" | "DENY",
    completionPayload?: string,
  ): Promise<{ outcome: string; action: { state: string } }> {
    return this.request("POST", `/a/${sessionToken}`, {
      decision,
      ...(completionPayload ? { completion_payload: completionPayload } : {}),
    });
  }

  beginEnrollment(
    accountId: string,
    deviceCookie: string | undefined,
    fingerprint: Record<string, string>,
  ): Promise<{ outcome: string; enrollment_url: string }> {
    return this.request(
      "POST",
      "/enrollments",
      { account_id: accountId, fp: fingerprint },
      deviceCookie ? { "X-Da2fa-Cookie": deviceCookie } : {},
    );
  }

  decideOffer(
    offerId: string,
    confirm: boolean,
  ): Promise<{ outcome: string; device_id?: string; claim_url?: string }> {
    return this.request("POST", `/offers/${offerId}/confirm`, { confirm });
  }

  // -- admin introspection ---------------------------------------------------

  adminAccount(accountId: string): Promise<AdminAccountDoc> {
    return this.request("GET", `/admin/accounts/${accountId}`, undefined, {
      "X-Admin-Token": this.adminToken,
    });
  }

  adminEvents(since: number): Promise<{ events: EventDoc[] }> {
    return this.request("GET", `/admin/events?since=${since}`, undefined, {
      "X-Admin-Token": this.adminToken,
    });
  }

  // -- the hosted simulation ----------------------------------------------------

  simDevices(): Promise<{ devices: SimDeviceDoc[] }> {
    return this.request("GET", "/sim/devices");
  }

  simDevice(id: string): Promise<{ device: SimDeviceDoc }> {
    return this.request("GET", `/sim/devices/${id}`);
  }

  setFingerprint(id: string, fp: Record<string, string>): Promise<{ device: SimDeviceDoc }> {
    return this.request("POST", `/sim/devices/${id}/fingerprint`, { fp });
  }

  simJack(phone: string, simDeviceId: string): Promise<{ outcome: string }> {
    return this.request("POST", "/sim/jack", { phone, sim_device_id: simDeviceId });
  }

  simForward(from: string, messageId: string, to: string): Promise<{ message_id: string }> {
    return this.request("POST", "/sim/forward", { from, message_id: messageId, to });
  }

  /** A pane click: the named device visits the URL with its own cookie jar
   * and fingerprint, server-side. */
  simClick(simDeviceId: string, url: string): Promise<SimClickResponse> {
    return this.request("POST", "/sim/click", { sim_device_id: simDeviceId, url });
  }
}

/** Pull the two challenge links out of a delivered SMS body. */
export function challengeLinks(body: string): { approve: string; report: string } | null {
  const match = body.match(/Yes: (\S+) {2}Not you\? (\S+)/);
  return match ? { approve: match[1], report: match[2] } : null;
}
