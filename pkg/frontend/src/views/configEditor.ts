// Rule-config editor: numeric form over RuleConfig with client-side
// validation mirroring the server's invariants; server errors map back to
// the offending field.

import type { RuleConfig } from "../types.js";
import { DEFAULT_RULE_CONFIG, RULE_IDS, validateRuleConfig, type FieldError } from "../config.js";

const FIELD_GROUPS: Array<[string, Array<keyof RuleConfig>]> = [
  ["Rule weights", [...RULE_IDS]],
  [
    "Thresholds",
    [
      "velocity_kmh",
      "noise_floor_km",
      "country_presence_ratio",
      "history_window",
      "rapid_action_count",
      "rapid_action_window_s",
      "multi_account_users",
      "multi_account_window_s",
      "unusual_hour_min_history",
      "typical_hour_coverage",
    ],
  ],
  ["Risk bands", ["medium_min", "high_min"]],
];

export function renderConfigForm(config: RuleConfig, errors: FieldError[] = []): string {
  const errorFor = (field: string) => errors.find((e) => e.field === field);
  const groups = FIELD_GROUPS.map(([title, fields]) => {
    const inputs = fields
      .map((f) => {
        const err = errorFor(f as string);
        const cls = err ? "field error" : "field";
        const msg = err ? `<span class="field-error">${err.message}</span>` : "";
        return (
          `<label class="${cls}">${f}` +
          `<input name="${f}" type="number" step="any" value="${config[f]}"/>` +
          msg +
          `</label>`
        );
      })
      .join("");
    return `<fieldset><legend>${title}</legend>${inputs}</fieldset>`;
  }).join("");
  const asnErr = errorFor("vpn_asn_allowlist");
  const ipErr = errorFor("ip_allowlist");
  return (
    `<form id="config-form">${groups}` +
    `<fieldset><legend>Allow-lists</legend>` +
    `<label class="field${asnErr ? " error" : ""}">vpn_asn_allowlist (comma separated)` +
    `<input name="vpn_asn_allowlist" value="${config.vpn_asn_allowlist.join(",")}"/>` +
    (asnErr ? `<span class="field-error">${asnErr.message}</span>` : "") +
    `</label>` +
    `<label class="field${ipErr ? " error" : ""}">ip_allowlist (comma separated CIDRs)` +
    `<input name="ip_allowlist" value="${config.ip_allowlist.join(",")}"/>` +
    (ipErr ? `<span class="field-error">${ipErr.message}</span>` : "") +
    `</label></fieldset>` +
    `<div class="form-actions">` +
    `<button type="submit">Save</button> ` +
    `<button type="button" data-action="reset-defaults">Reset to defaults</button> ` +
    `<span class="version">version ${config.version ?? 0}</span>` +
    `</div></form>`
  );
}

/** Parse form values back into a RuleConfig (numbers + allow-lists). */
export function parseConfigForm(values: Record<string, string>): RuleConfig {
  const out: Record<string, unknown> = {};
  for (const [, fields] of FIELD_GROUPS) {
    for (const f of fields) {
      out[f as string] = Number(values[f as string]);
    }
  }
  out.vpn_asn_allowlist = (values.vpn_asn_allowlist ?? "")
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => Number(s));
  out.ip_allowlist = (values.ip_allowlist ?? "")
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
  return out as unknown as RuleConfig;
}

export function resetToDefaults(): RuleConfig {
  return { ...DEFAULT_RULE_CONFIG, vpn_asn_allowlist: [], ip_allowlist: [] };
}

export { validateRuleConfig };
