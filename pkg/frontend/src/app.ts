// Single-page operator dashboard: hash routing between overview, triage, and
// config views, one polling loop per view, API key kept in sessionStorage.

import { ApiClient, ApiError } from "./api.js";
import { DEFAULT_POLL_INTERVAL_S, Poller } from "./poller.js";
import { dateInputToMs, type FilterState } from "./filters.js";
import { renderOverview } from "./views/overview.js";
import { renderFeed, triageRecord } from "./views/triage.js";
import {
  parseConfigForm,
  renderConfigForm,
  resetToDefaults,
  validateRuleConfig,
} from "./views/configEditor.js";
import type { RuleConfig, SuspiciousRecord } from "./types.js";

const content = () => document.getElementById("content")!;
const banner = () => document.getElementById("banner")!;

let api: ApiClient | null = null;
let poller: Poller | null = null;
let filters: FilterState = {};
let feedCache: SuspiciousRecord[] = [];

function showError(message: string): void {
  // errors surface in the banner; cached widgets stay on screen
  banner().textContent = message;
  banner().classList.remove("hidden");
}

function clearError(): void {
  banner().classList.add("hidden");
}

function handleFailure(err: unknown): void {
  if (err instanceof ApiError) {
    showError(`${err.status}: ${err.body.message}`);
  } else {
    showError(String(err));
  }
}

function readFilters(): FilterState {
  const val = (id: string) => (document.getElementById(id) as HTMLInputElement | null)?.value ?? "";
  const out: FilterState = {};
  const from = dateInputToMs(val("filter-from"));
  const to = dateInputToMs(val("filter-to"), true);
  if (from !== undefined) out.timeFrom = from;
  if (to !== undefined) out.timeTo = to;
  if (val("filter-country")) out.country = val("filter-country").toUpperCase();
  if (val("filter-device")) out.deviceType = val("filter-device");
  const susp = val("filter-suspicious");
  if (susp === "true") out.suspicious = true;
  if (susp === "false") out.suspicious = false;
  return out;
}

async function refreshOverview(): Promise<void> {
  if (!api) return;
  try {
    const [summary, daily, dist] = await Promise.all([
      api.summary(filters),
      api.daily(filters),
      api.distribution("country", filters),
    ]);
    clearError();
    content().innerHTML = renderOverview(summary, daily.series, dist);
  } catch (err) {
    handleFailure(err);
  }
}

async function refreshTriage(): Promise<void> {
  if (!api) return;
  try {
    const { records } = await api.suspicious();
    feedCache = records;
    clearError();
    content().innerHTML = renderFeed(records);
  } catch (err) {
    handleFailure(err);
  }
}

async function onTriageClick(ev: Event): Promise<void> {
  const target = ev.target as HTMLElement;
  const action = target.dataset.action;
  const recordId = target.dataset.record;
  if (!api || !action || !recordId) return;
  const record = feedCache.find((r) => r.id === recordId);
  if (!record) return;
  try {
    let session = null;
    let followUps = {};
    if (action === "false_positive") {
      const resp = await api.sessions({}, 0, 1000);
      session = resp.sessions.find((s) => s.session_id === record.session_id) ?? null;
      if (session?.is_vpn) {
        followUps = { allowlistAsn: window.confirm(`Allowlist ASN ${session.asn}?`) };
      }
    }
    await triageRecord(
      api, record, session, action as "confirm" | "false_positive", "", followUps,
    );
    await refreshTriage();
  } catch (err) {
    handleFailure(err);
  }
}

async function showConfig(config?: RuleConfig): Promise<void> {
  if (!api) return;
  try {
    const current = config ?? (await api.getRuleConfig());
    clearError();
    content().innerHTML = renderConfigForm(current);
    const form = document.getElementById("config-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => void onConfigSave(ev));
    form
      .querySelector('[data-action="reset-defaults"]')!
      .addEventListener("click", () => void showConfig({ ...resetToDefaults(), version: current.version }));
  } catch (err) {
    handleFailure(err);
  }
}

async function onConfigSave(ev: Event): Promise<void> {
  ev.preventDefault();
  if (!api) return;
  const form = ev.target as HTMLFormElement;
  const values: Record<string, string> = {};
  for (const input of Array.from(form.querySelectorAll("input"))) {
    values[input.name] = input.value;
  }
  const parsed = parseConfigForm(values);
  const errors = validateRuleConfig(parsed);
  if (errors.length > 0) {
    content().innerHTML = renderConfigForm(parsed, errors);
    const reForm = document.getElementById("config-form") as HTMLFormElement;
    reForm.addEventListener("submit", (e) => void onConfigSave(e));
    return;
  }
  try {
    const saved = await api.putRuleConfig(parsed);
    await showConfig(saved);
  } catch (err) {
    if (err instanceof ApiError && err.body.field) {
      content().innerHTML = renderConfigForm(parsed, [
        { field: err.body.field, message: err.body.message },
      ]);
      const reForm = document.getElementById("config-form") as HTMLFormElement;
      reForm.addEventListener("submit", (e) => void onConfigSave(e));
    } else {
      handleFailure(err);
    }
  }
}

function route(): void {
  poller?.stop();
  poller = null;
  const view = window.location.hash.replace("#", "") || "overview";
  document.querySelectorAll("nav a").forEach((a) => {
    a.classList.toggle("active", a.getAttribute("href") === `#${view}`);
  });
  const filterBar = document.getElementById("filters")!;
  filterBar.classList.toggle("hidden", view !== "overview");
  if (view === "overview") {
    poller = new Poller(refreshOverview, DEFAULT_POLL_INTERVAL_S);
    poller.start();
  } else if (view === "triage") {
    poller = new Poller(refreshTriage, DEFAULT_POLL_INTERVAL_S);
    poller.start();
  } else if (view === "config") {
    void showConfig();
  }
}

export function main(): void {
  const key = sessionStorage.getItem("api-key") ?? window.prompt("API key") ?? "";
  sessionStorage.setItem("api-key", key);
  api = new ApiClient(window.location.origin, key);

  window.addEventListener("hashchange", route);
  content().addEventListener("click", (ev) => void onTriageClick(ev));
  document.getElementById("apply-filters")!.addEventListener("click", () => {
    filters = readFilters();
    void poller?.tick();
  });
  route();
}

if (typeof document !== "undefined" && document.getElementById("content")) {
  main();
}
