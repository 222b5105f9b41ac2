// Suspicious-login triage: render the feed and drive triage write-backs,
// including the false-positive follow-ups that allowlist an ASN or IP.

import type { ApiClient } from "../api.js";
import type { RuleConfig, SessionDoc, SuspiciousRecord } from "../types.js";
import { percent, timestamp } from "../format.js";
import { withAllowlistedAsn, withAllowlistedIp } from "../config.js";

export function renderFeed(records: SuspiciousRecord[]): string {
  if (records.length === 0) {
    return `<p class="empty">No suspicious sessions.</p>`;
  }
  const rows = records
    .map((r) => {
      const fired = r.assessment.verdicts
        .filter((v) => v.fired)
        .map((v) => v.rule_id)
        .join(", ");
      const disposition = r.disposition ?? "—";
      return (
        `<tr data-record="${r.id}">` +
        `<td>${timestamp(r.created_at)}</td>` +
        `<td>${r.user_id}</td>` +
        `<td class="level-${r.level.toLowerCase()}">${r.level}</td>` +
        `<td>${percent(r.score, 0)}</td>` +
        `<td>${fired}</td>` +
        `<td>${disposition}</td>` +
        `<td>` +
        `<button data-action="confirm" data-record="${r.id}">Confirm</button> ` +
        `<button data-action="false_positive" data-record="${r.id}">False positive</button>` +
        `</td></tr>`
      );
    })
    .join("");
  return (
    `<table class="feed"><thead><tr>` +
    `<th>When</th><th>User</th><th>Level</th><th>Score</th>` +
    `<th>Fired rules</th><th>Disposition</th><th>Actions</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export interface TriageOutcome {
  record: SuspiciousRecord;
  configUpdated: boolean;
}

/**
 * Apply a triage decision. On false_positive, optionally allowlist the
 * session's ASN (for VPN flags) and/or its IP so identical future traffic
 * stops firing; allowlisting goes through the normal config endpoint.
 */
export async function triageRecord(
  api: ApiClient,
  record: SuspiciousRecord,
  session: SessionDoc | null,
  disposition: "confirm" | "false_positive",
  note: string,
  followUps: { allowlistAsn?: boolean; allowlistIp?: boolean } = {},
): Promise<TriageOutcome> {
  const updated = await api.triage(record.id, disposition, note);
  let configUpdated = false;
  if (disposition === "false_positive" && session !== null) {
    let config: RuleConfig | null = null;
    if (followUps.allowlistAsn && session.asn > 0) {
      config = config ?? (await api.getRuleConfig());
      config = withAllowlistedAsn(config, session.asn);
    }
    if (followUps.allowlistIp && session.ip) {
      config = config ?? (await api.getRuleConfig());
      config = withAllowlistedIp(config, session.ip);
    }
    if (config !== null) {
      await api.putRuleConfig(config);
      configUpdated = true;
    }
  }
  return { record: updated, configUpdated };
}
