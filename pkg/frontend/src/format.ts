export function percent(fraction: number, digits = 1): string {
  return (fraction * 100).toFixed(digits) + "%";
}

export function integer(n: number): string {
  return n.toLocaleString("en-US");
}

export function duration(seconds: number | null): string {
  if (seconds === null) return "—";
  const m = Math.floor(seconds / 60);
  const s = Math.round(seconds % 60);
  return m > 0 ? `${m}m ${s}s` : `${s}s`;
}

export function timestamp(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19) + " UTC";
}
