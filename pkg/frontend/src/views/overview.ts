// Overview: metric cards, daily-sessions bar chart, and a country bubble map.
// Pure HTML/SVG string rendering so it is testable without a DOM.

import type { DailyPoint, Distribution, MetricsSummary } from "../types.js";
import { duration, integer, percent } from "../format.js";

// Rough country centroids for the bubble map (equirectangular projection).
const COUNTRY_CENTROIDS: Record<string, [number, number]> = {
  BD: [23.7, 90.4],
  US: [39.8, -98.6],
  NL: [52.1, 5.3],
  GB: [54.0, -2.5],
  JP: [36.2, 138.3],
  AU: [-25.3, 133.8],
  SG: [1.35, 103.8],
  IN: [21.0, 78.0],
  ZZ: [0, 0],
};

export function summaryCards(s: MetricsSummary): string {
  const cards: Array<[string, string]> = [
    ["Total Sessions", integer(s.total_sessions)],
    ["Avg DAU", s.dau_avg.toFixed(1)],
    ["MAU", integer(s.mau)],
    ["Avg Duration", duration(s.avg_session_duration_s)],
    ["Actions / Session", s.avg_actions_per_session === null ? "—" : s.avg_actions_per_session.toFixed(1)],
    ["Bounce Rate", percent(s.bounce_rate)],
    ["Suspicious", `${integer(s.suspicious_sessions)} (${percent(s.suspicious_fraction)})`],
  ];
  const items = cards
    .map(
      ([label, value]) =>
        `<div class="card"><div class="card-value">${value}</div>` +
        `<div class="card-label">${label}</div></div>`,
    )
    .join("");
  return `<div class="cards">${items}</div>`;
}

export function dailyChart(series: DailyPoint[], width = 720, height = 180): string {
  if (series.length === 0) {
    return `<svg class="chart" width="${width}" height="${height}"></svg>`;
  }
  const max = Math.max(1, ...series.map((p) => p.sessions));
  const barW = width / series.length;
  const bars = series
    .map((p, i) => {
      const h = (p.sessions / max) * (height - 24);
      const x = (i * barW).toFixed(1);
      const y = (height - h).toFixed(1);
      return (
        `<rect x="${x}" y="${y}" width="${(barW * 0.8).toFixed(1)}" height="${h.toFixed(1)}">` +
        `<title>${p.date}: ${p.sessions}</title></rect>`
      );
    })
    .join("");
  return `<svg class="chart" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">${bars}</svg>`;
}

export function geoMap(dist: Distribution, width = 720, height = 360): string {
  const max = Math.max(1, ...dist.entries.map((e) => e.count));
  const bubbles = dist.entries
    .map((e) => {
      const [lat, lon] = COUNTRY_CENTROIDS[e.key] ?? [0, 0];
      const x = ((lon + 180) / 360) * width;
      const y = ((90 - lat) / 180) * height;
      const r = 4 + 28 * Math.sqrt(e.count / max);
      return (
        `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${r.toFixed(1)}" data-country="${e.key}">` +
        `<title>${e.key}: ${e.count} (${percent(e.fraction)})</title></circle>`
      );
    })
    .join("");
  return (
    `<svg class="map" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    `<rect class="map-bg" width="${width}" height="${height}"/>${bubbles}</svg>`
  );
}

export function renderOverview(
  summary: MetricsSummary,
  series: DailyPoint[],
  countries: Distribution,
): string {
  return (
    summaryCards(summary) +
    `<h2>Daily Sessions</h2>` +
    dailyChart(series) +
    `<h2>Sessions by Country</h2>` +
    geoMap(countries)
  );
}
