/** Scripted playground sessions.
 *
 * These drive the same panes a human would, through documented endpoints
 * only; the parity suite replays the code-forwarding attack and compares
 * the terminal action state and verdict trail with the harness scenario.
 * No protocol logic lives here: every verdict is read back from the
 * service.
 */

import { Api, challengeLinks } from "./api.js";
import type { EventDoc } from "./types.js";

export const DEMO = {
  account: "alice",
  phone: "+15550100001",
  victimPhone: "alice_phone",
  victimLaptop: "alice_laptop",
  attackerDevice: "mallory_device",
};

export interface SessionOutcome {
  terminalActionState: string;
  verdicts: string[];
  fraudReasons: string[];
  events: EventDoc[];
}

async function latestMessage(api: Api, deviceId: string) {
  const { device } = await api.simDevice(deviceId);
  const inbox = device.inbox;
  if (inbox.length === 0) throw new Error(`${deviceId} inbox is empty`);
  return inbox[inbox.length - 1];
}

async function collectOutcome(api: Api, actionId: string): Promise<SessionOutcome> {
  const account = await api.adminAccount(DEMO.account);
  const action = account.actions.find((a) => a.action_id === actionId);
  if (!action) throw new Error(`action ${actionId} not visible via admin`);
  const { events } = await api.adminEvents(0);
  const forAction = (e: EventDoc) => e.subjects["action_id"] === actionId;
  return {
    terminalActionState: action.state,
    verdicts: events
      .filter((e) => e.kind === "VERDICT" && forAction(e))
      .map((e) => String(e.details["verdict"])),
    fraudReasons: events
      .filter((e) => e.kind === "FRAUD_SIGNAL")
      .map((e) => String(e.details["reason"])),
    events,
  };
}

/** Fig.-1 style attack: the victim forwards her challenge, the attacker
 * clicks it and then flails at KBA. */
export async function runCodeForwardingSession(api: Api): Promise<SessionOutcome> {
  const created = await api.initiateAction(
    DEMO.account,
    "PASSWORD_RESET",
    "reset account password",
  );
  const actionId = created.action.action_id;

  const victimMessage = await latestMessage(api, DEMO.victimPhone);
  await api.simForward(DEMO.victimPhone, victimMessage.message_id, DEMO.attackerDevice);

  const forwarded = await latestMessage(api, DEMO.attackerDevice);
  if (forwarded.body !== victimMessage.body) {
    throw new Error("forwarding must preserve the message byte-for-byte");
  }
  const links = challengeLinks(forwarded.body);
  if (!links) throw new Error("challenge links missing from the forwarded SMS");

  const click = await api.simClick(DEMO.attackerDevice, links.approve);
  const escalationId = click.response.escalation_id;
  if (click.response.outcome === "escalated" && escalationId) {
    const wrong: [number, string][] = [[0, "wrong-0"], [1, "wrong-1"], [2, "wrong-2"]];
    for (let attempt = 0; attempt < 3; attempt += 1) {
      await api.answerKba(escalationId, wrong);
    }
  }
  return collectOutcome(api, actionId);
}

/** The honest baseline: the owner clicks her own challenge and approves. */
export async function runLegitSession(api: Api): Promise<SessionOutcome> {
  const created = await api.initiateAction(
    DEMO.account,
    "ADDRESS_CHANGE",
    "deliver to 7 Oak Ave",
  );
  const actionId = created.action.action_id;
  const message = await latestMessage(api, DEMO.victimPhone);
  const links = challengeLinks(message.body);
  if (!links) throw new Error("challenge links missing from the SMS");

  const click = await api.simClick(DEMO.victimPhone, links.approve);
  const approvalUrl = click.response.approval_url;
  if (click.response.outcome !== "passed" || !approvalUrl) {
    throw new Error(`expected a passed click, got ${JSON.stringify(click.response)}`);
  }
  const sessionToken = approvalUrl.split("/").pop()!;
  await api.approvalView(sessionToken);
  await api.submitApproval(sessionToken, "APPROVE");
  return collectOutcome(api, actionId);
}
