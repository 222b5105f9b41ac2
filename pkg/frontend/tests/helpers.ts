// Shared test doubles: a scripted fetch and canned API payloads.

import type { MetricsSummary, RuleConfig, SessionDoc, SuspiciousRecord } from "../src/types.js";
import { DEFAULT_RULE_CONFIG } from "../src/config.js";

export interface RecordedRequest {
  url: string;
  method: string;
  headers: Record<string, string>;
  body?: unknown;
}

export function fakeFetch(
  handler: (req: RecordedRequest) => { status?: number; json: unknown },
) {
  const requests: RecordedRequest[] = [];
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const req: RecordedRequest = {
      url,
      method: init?.method ?? "GET",
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    };
    requests.push(req);
    const { status = 200, json } = handler(req);
    return new Response(JSON.stringify(json), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchImpl, requests };
}

export const SAMPLE_SUMMARY: MetricsSummary = {
  total_sessions: 4826,
  dau_avg: 512.3,
  mau: 1500,
  avg_session_duration_s: 272,
  avg_actions_per_session: 5.4,
  bounce_rate: 0.234,
  suspicious_sessions: 312,
  suspicious_fraction: 0.065,
  top_countries: [
    { key: "BD", fraction: 0.42 },
    { key: "US", fraction: 0.18 },
    { key: "NL", fraction: 0.12 },
  ],
  top_device_types: [
    { key: "Desktop", fraction: 0.45 },
    { key: "Mobile", fraction: 0.39 },
    { key: "Tablet", fraction: 0.16 },
  ],
};

export function sampleConfig(overrides: Partial<RuleConfig> = {}): RuleConfig {
  return { ...DEFAULT_RULE_CONFIG, vpn_asn_allowlist: [], ip_allowlist: [], ...overrides };
}

export function sampleRecord(overrides: Partial<SuspiciousRecord> = {}): SuspiciousRecord {
  return {
    id: "sa-s-00000001",
    session_id: "s-00000001",
    user_id: "u1",
    level: "High",
    score: 0.7,
    created_at: 1_700_000_000_000,
    assessment: {
      session_id: "s-00000001",
      score: 0.7,
      level: "High",
      assessed_at: 1_700_000_000_000,
      verdicts: [
        { rule_id: "vpn_proxy", fired: true, weight_applied: 0.1, evidence: {} },
        { rule_id: "new_country", fired: true, weight_applied: 0.2, evidence: {} },
        { rule_id: "impossible_travel", fired: true, weight_applied: 0.4, evidence: {} },
      ],
    },
    disposition: null,
    note: null,
    disposition_history: [],
    ...overrides,
  };
}

export function sampleSession(overrides: Partial<SessionDoc> = {}): SessionDoc {
  return {
    session_id: "s-00000001",
    user_id: "u1",
    ip: "10.70.0.1",
    login_time: 1_700_000_000_000,
    logout_time: null,
    action_count: 3,
    country: "SG",
    device_type: "Desktop",
    suspicious: true,
    is_vpn: true,
    asn: 9009,
    risk: null,
    ...overrides,
  };
}
