/** API client: concurrent identical requests are deduplicated by request key,
 * and the registry version of every response is tracked so callers can detect
 * stale data after a model registration. */

import type {
  BinLayer,
  DatasetSummary,
  FlowsResponse,
  JobStatus,
  ModelSummary,
  ParseError,
  ParseResponse,
  RegionLayer,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public parseErrors?: ParseError[],
  ) {
    super(message);
  }
}

export interface BinQuery {
  datasetId: string;
  year: number;
  resolution: number;
  metric: string;
  mode: "absolute" | "delta";
  modelId?: string | null;
  hideUnrepresented?: boolean;
}

export class ApiClient {
  /** Network dispatches by category; deduplicated joins do not count. */
  readonly fetchCount: Record<string, number> = {};
  /** Latest registry version seen in any response body. */
  version: string | null = null;

  private inflight = new Map<string, Promise<unknown>>();

  constructor(readonly baseUrl: string) {}

  private bump(category: string): void {
    this.fetchCount[category] = (this.fetchCount[category] ?? 0) + 1;
  }

  private async dispatch<T>(path: string, category: string, init?: RequestInit): Promise<T> {
    this.bump(category);
    const response = await fetch(this.baseUrl + path, init);
    const text = await response.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = text;
    }
    if (!response.ok) {
      const obj = body as { error?: string; errors?: ParseError[] } | null;
      throw new ApiError(
        response.status,
        obj?.error ?? `HTTP ${response.status} on ${path}`,
        obj?.errors,
      );
    }
    const versioned = body as { version?: string };
    if (versioned && typeof versioned.version === "string") {
      this.version = versioned.version;
    }
    return body as T;
  }

  /** GET with in-flight deduplication: concurrent identical URLs share one request. */
  private getJson<T>(path: string, category: string): Promise<T> {
    const pending = this.inflight.get(path);
    if (pending) {
      return pending as Promise<T>;
    }
    const request = this.dispatch<T>(path, category).finally(() => {
      this.inflight.delete(path);
    });
    this.inflight.set(path, request);
    return request;
  }

  listDatasets(): Promise<{ datasets: DatasetSummary[]; version: string }> {
    return this.getJson("/datasets", "datasets");
  }

  summary(datasetId: string): Promise<DatasetSummary> {
    return this.getJson(`/datasets/${datasetId}/summary`, "summary");
  }

  bins(query: BinQuery): Promise<BinLayer> {
    const params = new URLSearchParams({
      year: String(query.year),
      resolution: String(query.resolution),
      metric: query.metric,
      mode: query.mode,
    });
    if (query.modelId) params.set("model", query.modelId);
    if (query.hideUnrepresented) params.set("hide_unrepresented", "true");
    return this.getJson(`/datasets/${query.datasetId}/bins?${params}`, "bins");
  }

  regions(datasetId: string, year: number, level: number, metric: string,
          normalize: boolean): Promise<RegionLayer> {
    const params = new URLSearchParams({
      year: String(year), level: String(level), metric,
      normalize: normalize ? "true" : "false",
    });
    return this.getJson(`/datasets/${datasetId}/regions?${params}`, "regions");
  }

  models(): Promise<{ models: ModelSummary[]; version: string }> {
    return this.getJson("/models", "models");
  }

  flows(modelId: string, q: number, r: number, resolution: number,
        includeInternal = false): Promise<FlowsResponse> {
    const params = new URLSearchParams({
      bin: `${q}:${r}`,
      resolution: String(resolution),
    });
    if (includeInternal) params.set("include_internal", "true");
    return this.getJson(`/models/${modelId}/flows?${params}`, "flows");
  }

  parseRules(rules: string, datasetId?: string): Promise<ParseResponse> {
    return this.dispatch("/constraints/parse", "parse", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ rules, dataset_id: datasetId }),
    });
  }

  solve(datasetId: string, year: number, rules: string,
        includeIoTotals = false): Promise<{ job_id: string; version: string }> {
    return this.dispatch("/models/solve", "solve", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        dataset_id: datasetId, year, rules, include_io_totals: includeIoTotals,
      }),
    });
  }

  job(jobId: string): Promise<JobStatus> {
    return this.dispatch(`/jobs/${jobId}`, "jobs");
  }

  async waitForJob(jobId: string, pollMs = 150, timeoutMs = 120_000): Promise<JobStatus> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.job(jobId);
      if (["done", "failed", "infeasible", "cancelled"].includes(status.status)) {
        return status;
      }
      if (Date.now() > deadline) {
        throw new ApiError(408, `job ${jobId} timed out client-side`);
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  }
}
