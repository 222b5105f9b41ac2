import type {
  ApiErrorBody,
  DailyPoint,
  Distribution,
  MetricsSummary,
  RuleConfig,
  SessionDoc,
  SuspiciousRecord,
} from "./types.js";
import type { FilterState } from "./filters.js";
import { toQueryParams } from "./filters.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(`${body.error}: ${body.message}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the /v1 JSON API. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private apiKey: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private url(path: string, params?: Record<string, string>): string {
    const qs = params && Object.keys(params).length > 0
      ? "?" + new URLSearchParams(params).toString()
      : "";
    return this.baseUrl.replace(/\/$/, "") + path + qs;
  }

  private async request<T>(
    method: string,
    path: string,
    params?: Record<string, string>,
    body?: unknown,
  ): Promise<T> {
    const resp = await this.fetchImpl(this.url(path, params), {
      method,
      headers: {
        "X-API-Key": this.apiKey,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    });
    if (!resp.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await resp.json()) as ApiErrorBody;
      } catch {
        parsed = { error: "http", message: `HTTP ${resp.status}` };
      }
      throw new ApiError(resp.status, parsed);
    }
    return (await resp.json()) as T;
  }

  summary(filters: FilterState): Promise<MetricsSummary> {
    const { time_from, time_to } = toQueryParams(filters);
    const params: Record<string, string> = {};
    if (time_from) params.time_from = time_from;
    if (time_to) params.time_to = time_to;
    return this.request("GET", "/v1/analytics/summary", params);
  }

  daily(filters: FilterState): Promise<{ series: DailyPoint[] }> {
    const { time_from, time_to } = toQueryParams(filters);
    const params: Record<string, string> = {};
    if (time_from) params.time_from = time_from;
    if (time_to) params.time_to = time_to;
    return this.request("GET", "/v1/analytics/daily", params);
  }

  distribution(dimension: "country" | "device_type", filters: FilterState): Promise<Distribution> {
    const { time_from, time_to } = toQueryParams(filters);
    const params: Record<string, string> = { dimension };
    if (time_from) params.time_from = time_from;
    if (time_to) params.time_to = time_to;
    return this.request("GET", "/v1/analytics/distribution", params);
  }

  sessions(filters: FilterState, page = 0, pageSize = 100): Promise<{ sessions: SessionDoc[] }> {
    const params = toQueryParams(filters);
    params.page = String(page);
    params.page_size = String(pageSize);
    return this.request("GET", "/v1/sessions", params);
  }

  suspicious(level?: string, page = 0): Promise<{ records: SuspiciousRecord[] }> {
    const params: Record<string, string> = { page: String(page) };
    if (level) params.level = level;
    return this.request("GET", "/v1/suspicious", params);
  }

  triage(recordId: string, disposition: "confirm" | "false_positive", note = ""): Promise<SuspiciousRecord> {
    return this.request("POST", `/v1/suspicious/${recordId}/triage`, undefined, {
      disposition,
      note,
    });
  }

  getRuleConfig(): Promise<RuleConfig> {
    return this.request("GET", "/v1/config/rules");
  }

  putRuleConfig(config: RuleConfig): Promise<RuleConfig> {
    const body: Record<string, unknown> = { ...config };
    delete body.version;
    return this.request("PUT", "/v1/config/rules", undefined, body);
  }
}
