/** Response shapes of the econoforge HTTP API (amounts are integer cents;
 * values above 2^53-1 arrive as strings and are kept as-is for display). */

export type Cents = number | string;

export interface DatasetSummary {
  dataset_id: string;
  years: number[];
  sectors: Record<string, string>;
  firm_counts: Record<string, number>;
  cash_flow_cents: Record<string, Cents>;
  version: string;
}

export interface AbsoluteBin {
  q: number;
  r: number;
  center_lat: number;
  center_lon: number;
  value: Cents;
  firm_count: number;
  cash_flow_cents: Cents;
  sector_breakdown: Record<string, number>;
}

export interface DeltaBin {
  q: number;
  r: number;
  center_lat: number;
  center_lon: number;
  delta: Cents;
  magnitude: Cents;
}

export interface BinLayer {
  dataset_id: string;
  year: number;
  previous_year?: number;
  resolution: number;
  metric: string;
  mode: "absolute" | "delta";
  hex_edge_m: number;
  excluded_firm_count: number;
  bins: (AbsoluteBin & DeltaBin)[];
  total_value?: Cents;
  model_id?: string;
  version: string;
}

export interface RegionRow {
  region_code: string;
  name: string;
  firm_count: number;
  cash_flow_cents: Cents;
  value: Cents;
  area_km2: number | null;
  normalized: number | null;
  sector_breakdown: Record<string, number>;
}

export interface RegionLayer {
  dataset_id: string;
  year: number;
  level: number;
  metric: string;
  normalize: boolean;
  regions: RegionRow[];
  version: string;
}

export interface ModelSummary {
  model_id: string;
  dataset_id: string;
  year: number;
  constraint_set_id: string;
  provenance: string;
  edge_count: number;
  total_cents: Cents;
  max_relative_residual: number | null;
}

export interface ArcEndpoint {
  q: number;
  r: number;
  lat: number;
  lon: number;
}

export interface FlowArc {
  from: ArcEndpoint;
  to: ArcEndpoint;
  amount_cents: Cents;
  direction: "out-of-selection" | "into-selection";
  relative_weight: number;
}

export interface FlowStats {
  inflow_cents: Cents;
  outflow_cents: Cents;
  pct_inward: number;
  pct_outward: number;
  overall_flow_cents: Cents;
}

export interface FlowsResponse {
  dataset_id: string;
  model_id: string;
  year: number;
  resolution: number;
  selection: { q: number; r: number };
  include_internal: boolean;
  arcs: FlowArc[];
  stats: FlowStats;
  version: string;
}

export interface ParseError {
  line: number;
  col: number;
  message: string;
}

export interface ParsedConstraint {
  id: string;
  kind: string;
  [extra: string]: unknown;
}

export interface ParseResponse {
  constraint_set_id: string;
  constraints: ParsedConstraint[];
  version: string;
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "failed" | "infeasible" | "cancelled";
  progress: Record<string, unknown>;
  result_model_id: string | null;
  error: string | null;
  infeasible_witnesses?: string[];
  version: string;
}
