// Filter state maps 1:1 onto /v1/sessions query parameters; the server does
// all filtering, the client never post-filters results.

export interface FilterState {
  timeFrom?: number;
  timeTo?: number;
  country?: string;
  deviceType?: string;
  suspicious?: boolean;
}

export function toQueryParams(f: FilterState): Record<string, string> {
  const params: Record<string, string> = {};
  if (f.timeFrom !== undefined) params.time_from = String(f.timeFrom);
  if (f.timeTo !== undefined) params.time_to = String(f.timeTo);
  if (f.country !== undefined && f.country !== "") params.country = f.country;
  if (f.deviceType !== undefined && f.deviceType !== "") params.device_type = f.deviceType;
  if (f.suspicious !== undefined) params.suspicious = String(f.suspicious);
  return params;
}

export function emptyFilters(): FilterState {
  return {};
}

/** Parse a YYYY-MM-DD date input into a UTC-midnight timestamp in ms. */
export function dateInputToMs(value: string, endOfDay = false): number | undefined {
  if (!/^\d{4}-\d{2}-\d{2}$/.test(value)) return undefined;
  const ms = Date.parse(value + "T00:00:00Z");
  if (Number.isNaN(ms)) return undefined;
  return endOfDay ? ms + 86_400_000 : ms;
}
