// Client-side mirror of the server's rule-config invariants, so the editor
// can block bad saves before a round trip. The server remains authoritative.

import type { RuleConfig } from "./types.js";

export const RULE_IDS = [
  "new_device",
  "new_country",
  "impossible_travel",
  "vpn_proxy",
  "rapid_actions",
  "multi_account_ip",
  "unusual_hour",
] as const;

export type RuleId = (typeof RULE_IDS)[number];

export const DEFAULT_RULE_CONFIG: RuleConfig = {
  new_device: 0.3,
  new_country: 0.2,
  impossible_travel: 0.4,
  vpn_proxy: 0.1,
  rapid_actions: 0.2,
  multi_account_ip: 0.3,
  unusual_hour: 0.1,
  velocity_kmh: 1000,
  noise_floor_km: 100,
  country_presence_ratio: 0.8,
  history_window: 10,
  rapid_action_count: 50,
  rapid_action_window_s: 60,
  multi_account_users: 3,
  multi_account_window_s: 600,
  unusual_hour_min_history: 10,
  typical_hour_coverage: 0.9,
  medium_min: 0.3,
  high_min: 0.5,
  vpn_asn_allowlist: [],
  ip_allowlist: [],
};

export interface FieldError {
  field: string;
  message: string;
}

const POSITIVE_FIELDS: Array<keyof RuleConfig> = [
  "velocity_kmh",
  "noise_floor_km",
  "history_window",
  "rapid_action_count",
  "rapid_action_window_s",
  "multi_account_users",
  "multi_account_window_s",
  "unusual_hour_min_history",
];

const RATIO_FIELDS: Array<keyof RuleConfig> = [
  "country_presence_ratio",
  "typical_hour_coverage",
];

const CIDR_RE =
  /^((\d{1,3}\.){3}\d{1,3}|[0-9a-fA-F:]+)(\/\d{1,3})?$/;

function validCidr(cidr: string): boolean {
  if (!CIDR_RE.test(cidr)) return false;
  if (cidr.includes(".")) {
    const [addr, prefix] = cidr.split("/");
    if (addr.split(".").some((o) => Number(o) > 255)) return false;
    if (prefix !== undefined && Number(prefix) > 32) return false;
  } else {
    const prefix = cidr.split("/")[1];
    if (prefix !== undefined && Number(prefix) > 128) return false;
  }
  return true;
}

export function validateRuleConfig(config: RuleConfig): FieldError[] {
  const errors: FieldError[] = [];
  for (const rule of RULE_IDS) {
    const w = config[rule];
    if (typeof w !== "number" || Number.isNaN(w) || w < 0 || w > 1) {
      errors.push({ field: rule, message: "weight must be in [0, 1]" });
    }
  }
  for (const field of POSITIVE_FIELDS) {
    const v = config[field] as number;
    if (typeof v !== "number" || Number.isNaN(v) || v <= 0) {
      errors.push({ field, message: "must be a positive number" });
    }
  }
  for (const field of RATIO_FIELDS) {
    const v = config[field] as number;
    if (typeof v !== "number" || Number.isNaN(v) || v <= 0 || v > 1) {
      errors.push({ field, message: "must be in (0, 1]" });
    }
  }
  if (
    !(config.medium_min >= 0 && config.medium_min < config.high_min && config.high_min <= 1)
  ) {
    errors.push({
      field: "high_min",
      message: "bands require 0 <= medium_min < high_min <= 1",
    });
  }
  for (const asn of config.vpn_asn_allowlist) {
    if (!Number.isInteger(asn) || asn < 0) {
      errors.push({ field: "vpn_asn_allowlist", message: `bad ASN ${asn}` });
    }
  }
  for (const cidr of config.ip_allowlist) {
    if (!validCidr(cidr)) {
      errors.push({ field: "ip_allowlist", message: `bad CIDR ${cidr}` });
    }
  }
  return errors;
}

/** Follow-up for a false-positive VPN flag: allowlist the session's ASN. */
export function withAllowlistedAsn(config: RuleConfig, asn: number): RuleConfig {
  if (config.vpn_asn_allowlist.includes(asn)) return config;
  return { ...config, vpn_asn_allowlist: [...config.vpn_asn_allowlist, asn].sort((a, b) => a - b) };
}

/** Follow-up for a false-positive flag: allowlist the session's exact IP. */
export function withAllowlistedIp(config: RuleConfig, ip: string): RuleConfig {
  const cidr = ip.includes(":") ? `${ip}/128` : `${ip}/32`;
  if (config.ip_allowlist.includes(cidr)) return config;
  return { ...config, ip_allowlist: [...config.ip_allowlist, cidr].sort() };
}
