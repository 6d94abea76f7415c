/** Wire types mirrored from the service's documented JSON bodies. */

export interface SimMessageDoc {
  message_id: string;
  to_phone: string;
  body: string;
  delivered_at: number;
}

export interface SimDeviceDoc {
  sim_device_id: string;
  fingerprint: Record<string, string>;
  cookie_jar: Record<string, string>;
  inbox: SimMessageDoc[];
  statement_channel: string[];
  routed_phones: string[];
}

export interface EventDoc {
  seq: number;
  at: number;
  kind: string;
  subjects: Record<string, unknown>;
  details: Record<string, unknown>;
}

export interface ClickResponseDoc {
  outcome: string;
  challenge_id?: string;
  action_id?: string;
  verdict?: string;
  fingerprint_score?: number;
  cookie_matched?: boolean;
  approval_url?: string;
  escalation_id?: string;
  escalation_method?: string;
  kba_questions?: string[];
  detail?: string;
  // Approval views and enrollment/claim responses arrive through the same
  // sim click channel:
  payload_summary?: string;
  kind?: string;
  requires_completion_payload?: boolean;
  pending_offer_id?: string | null;
  enrollment_url?: string;
  device_id?: string;
  cookie_token?: string;
  error?: string;
}

export interface SimClickResponse {
  outcome: string;
  status: number;
  response: ClickResponseDoc;
}

export interface ActionDoc {
  action_id: string;
  account_id: string;
  kind: string;
  risk_level: string;
  payload_summary: string;
  state: string;
  created_at: number;
  expires_at: number;
}

export interface AdminAccountDoc {
  account: { account_id: string; phone_numbers: string[]; device_ids: string[] };
  devices: { device_id: string; trust_tier: string; cookie_token: string | null }[];
  actions: ActionDoc[];
}
