// JSON shapes of the /v1 API. The dashboard renders these verbatim; it never
// recomputes metrics or risk on the client.

export interface FractionEntry {
  key: string;
  fraction: number;
}

export interface MetricsSummary {
  total_sessions: number;
  dau_avg: number;
  mau: number;
  avg_session_duration_s: number | null;
  avg_actions_per_session: number | null;
  bounce_rate: number;
  suspicious_sessions: number;
  suspicious_fraction: number;
  top_countries: FractionEntry[];
  top_device_types: FractionEntry[];
}

export interface DailyPoint {
  date: string;
  sessions: number;
}

export interface DistributionEntry {
  key: string;
  count: number;
  fraction: number;
}

export interface Distribution {
  dimension: string;
  entries: DistributionEntry[];
}

export interface RuleVerdict {
  rule_id: string;
  fired: boolean;
  weight_applied: number;
  evidence: Record<string, string>;
}

export interface RiskAssessment {
  session_id: string;
  score: number;
  level: "Low" | "Medium" | "High";
  assessed_at: number;
  verdicts: RuleVerdict[];
}

export interface SessionDoc {
  session_id: string;
  user_id: string;
  ip: string;
  login_time: number;
  logout_time: number | null;
  action_count: number;
  country: string;
  device_type: string;
  suspicious: boolean;
  is_vpn: boolean;
  asn: number;
  risk: RiskAssessment | null;
}

export interface SuspiciousRecord {
  id: string;
  session_id: string;
  user_id: string;
  level: string;
  score: number;
  created_at: number;
  assessment: RiskAssessment;
  disposition: string | null;
  note: string | null;
  disposition_history: Array<{ disposition: string; note: string; at: number }>;
}

export interface RuleConfig {
  new_device: number;
  new_country: number;
  impossible_travel: number;
  vpn_proxy: number;
  rapid_actions: number;
  multi_account_ip: number;
  unusual_hour: number;
  velocity_kmh: number;
  noise_floor_km: number;
  country_presence_ratio: number;
  history_window: number;
  rapid_action_count: number;
  rapid_action_window_s: number;
  multi_account_users: number;
  multi_account_window_s: number;
  unusual_hour_min_history: number;
  typical_hour_coverage: number;
  medium_min: number;
  high_min: number;
  vpn_asn_allowlist: number[];
  ip_allowlist: string[];
  version?: number;
}

export interface ApiErrorBody {
  error: string;
  message: string;
  field?: string;
}
