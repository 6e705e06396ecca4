/** Risk register triage view: filters, matrix aggregation, band colors.
 *
 * Everything here rearranges server data for display; no score, band, or
 * ordering is ever computed client-side. Filtering hides rows but never
 * reorders the ones that remain relative to the server register.
 */

import type { BandName, Report, RiskRecord, Taxonomy } from './types.js';

export interface RegisterFilters {
  category?: string; // category id ("1".."4"), static records only
  lensAxis?: string;
  lensValue?: string;
  band?: BandName;
  source?: 'static_agent' | 'dynamic_agent';
}

export interface MatrixMarker {
  severity: number;
  likelihood: number;
  record: RiskRecord;
}

export interface RegisterView {
  rows: RiskRecord[];
  markers: MatrixMarker[];
  /** cells[severity-1][likelihood-1] lists the record ids plotted there */
  cells: string[][][];
  filters: RegisterFilters;
}

export function bandColor(band: string): string {
  switch (band) {
    case 'critical':
      return '#e53e3e';
    case 'high':
      return '#dd6b20';
    case 'medium':
      return '#d69e2e';
    case 'low':
      return '#38a169';
    case 'negligible':
      return '#319795';
    default:
      return '#888';
  }
}

function lensRiskIds(taxonomy: Taxonomy, axis: string, value: string): Set<string> {
  const ids = new Set<string>();
  for (const risk of taxonomy.broad_risks) {
    if (risk.dimensions.some((d) => d.axis === axis && d.value === value)) {
      ids.add(risk.id);
    }
  }
  return ids;
}

export function recordMatches(
  record: RiskRecord,
  filters: RegisterFilters,
  taxonomy?: Taxonomy,
): boolean {
  if (filters.band && record.band !== filters.band) return false;
  if (filters.source && record.source !== filters.source) return false;
  if (filters.category) {
    if (record.source !== 'static_agent') return false;
    if (!record.subject_id.startsWith(`${filters.category}.`)) return false;
  }
  if (filters.lensAxis && filters.lensValue) {
    if (record.source !== 'static_agent' || !taxonomy) return false;
    const tagged = lensRiskIds(taxonomy, filters.lensAxis, filters.lensValue);
    if (!tagged.has(record.subject_id)) return false;
  }
  return true;
}

export function buildRegisterView(
  report: Report,
  filters: RegisterFilters = {},
  taxonomy?: Taxonomy,
): RegisterView {
  // server order is authoritative; filter() preserves it
  const rows = report.risk_register.records.filter((record) =>
    recordMatches(record, filters, taxonomy),
  );
  const cells: string[][][] = Array.from({ length: 5 }, () =>
    Array.from({ length: 5 }, () => [] as string[]),
  );
  const markers: MatrixMarker[] = [];
  for (const record of rows) {
    cells[record.severity - 1][record.likelihood - 1].push(record.record_id);
    markers.push({
      severity: record.severity,
      likelihood: record.likelihood,
      record,
    });
  }
  return { rows, markers, cells, filters };
}

export function mitigationFor(report: Report, recordId: string): string[] {
  const advice = report.mitigations.find((m) => m.record_id === recordId);
  return advice ? advice.measures : [];
}
