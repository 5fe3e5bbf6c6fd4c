/** View-state store and orchestration.
 *
 * Owns only view state (camera, year, resolution, metric, selection, model
 * id); every number shown in the UI comes from API responses untouched. All
 * data requests funnel through here with last-write-wins tokens per slot, so
 * a response that arrives after its request was superseded is discarded.
 */

import { ApiClient, ApiError } from "./api.js";
import { Camera, Scene, buildScene, zoomToResolution } from "./scene.js";
import type {
  BinLayer,
  DatasetSummary,
  FlowsResponse,
  JobStatus,
  ModelSummary,
  ParseError,
  RegionLayer,
} from "./types.js";

export interface SelectionAnchor {
  q: number;
  r: number;
  lat: number;
  lon: number;
}

export type Listener = () => void;

export class ExplorerStore {
  datasetId = "";
  years: number[] = [];
  year = 0;
  zoom = 6;
  metric: "firm_count" | "cash_flow" = "cash_flow";
  mode: "absolute" | "delta" = "absolute";
  modelId: string | null = null;
  hideUnrepresented = false;
  includeInternal = false;
  regionLevel = 2;
  regionNormalize = false;

  summary: DatasetSummary | null = null;
  layer: BinLayer | null = null;
  previousLayer: BinLayer | null = null;
  animationAlpha = 1;
  flows: FlowsResponse | null = null;
  regions: RegionLayer | null = null;
  models: ModelSummary[] = [];
  selection: SelectionAnchor | null = null;
  parseErrors: ParseError[] = [];
  lastJob: JobStatus | null = null;
  lastError: string | null = null;

  camera = new Camera(47.5, 13.5, 4096, 35, 1200, 800);
  maxHeightPx = 140;

  private layerToken = 0;
  private flowsToken = 0;
  private regionsToken = 0;
  private listeners = new Set<Listener>();

  constructor(readonly api: ApiClient) {}

  get resolution(): number {
    return zoomToResolution(this.zoom);
  }

  onChange(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  scene(): Scene {
    return buildScene(
      this.layer,
      this.flows?.arcs ?? [],
      this.camera,
      {
        maxHeightPx: this.maxHeightPx,
        selection: this.selection ? { q: this.selection.q, r: this.selection.r } : null,
      },
      this.previousLayer,
      this.animationAlpha,
    );
  }

  async init(datasetId?: string): Promise<void> {
    const listing = await this.api.listDatasets();
    if (listing.datasets.length === 0) {
      throw new ApiError(404, "service has no datasets");
    }
    const summary = datasetId
      ? listing.datasets.find((d) => d.dataset_id === datasetId)
      : listing.datasets[0];
    if (!summary) {
      throw new ApiError(404, `dataset ${datasetId} not found`);
    }
    this.summary = summary;
    this.datasetId = summary.dataset_id;
    this.years = summary.years;
    this.year = summary.years[0];
    await this.refreshModels();
    await this.refreshLayer();
    this.fitCameraToLayer();
    this.notify();
  }

  private fitCameraToLayer(): void {
    const bins = this.layer?.bins ?? [];
    if (!bins.length) return;
    const lats = bins.map((b) => b.center_lat);
    const lons = bins.map((b) => b.center_lon);
    this.camera.centerLat = (Math.min(...lats) + Math.max(...lats)) / 2;
    this.camera.centerLon = (Math.min(...lons) + Math.max(...lons)) / 2;
  }

  /** Fetch the layer for the current view state; exactly one bins request. */
  async refreshLayer(): Promise<void> {
    const token = ++this.layerToken;
    try {
      const layer = await this.api.bins({
        datasetId: this.datasetId,
        year: this.year,
        resolution: this.resolution,
        metric: this.metric,
        mode: this.mode,
        modelId: this.hideUnrepresented ? this.modelId : null,
        hideUnrepresented: this.hideUnrepresented,
      });
      if (token !== this.layerToken) return; // superseded: discard stale response
      this.previousLayer = null;
      this.layer = layer;
      this.animationAlpha = 1;
      this.lastError = null;
    } catch (e) {
      if (token !== this.layerToken) return;
      this.lastError = e instanceof Error ? e.message : String(e);
      throw e;
    } finally {
      this.notify();
    }
  }

  /** Year slider: one layer refetch per step; the old layer becomes the
   * animation keyframe; an active selection is refetched for the new year. */
  async setYear(year: number): Promise<void> {
    if (year === this.year) return;
    const keyframe = this.mode === "absolute" ? this.layer : null;
    this.year = year;
    const token = ++this.layerToken;
    const layer = await this.api.bins({
      datasetId: this.datasetId,
      year,
      resolution: this.resolution,
      metric: this.metric,
      mode: this.mode,
      modelId: this.hideUnrepresented ? this.modelId : null,
      hideUnrepresented: this.hideUnrepresented,
    });
    if (token !== this.layerToken) return;
    this.previousLayer =
      keyframe && keyframe.resolution === layer.resolution ? keyframe : null;
    this.layer = layer;
    this.animationAlpha = this.previousLayer ? 0 : 1;
    if (this.selection && this.modelId) {
      await this.refreshFlows();
    }
    this.notify();
  }

  /** Advance the keyframe animation (alpha in [0,1]; 1 shows the new year). */
  tickAnimation(alpha: number): void {
    this.animationAlpha = Math.max(0, Math.min(1, alpha));
    if (this.animationAlpha >= 1) {
      this.previousLayer = null;
    }
    this.notify();
  }

  async setZoom(zoom: number): Promise<void> {
    const before = this.resolution;
    this.zoom = Math.max(0, Math.min(12, zoom));
    this.camera.metersPerPixel = 4096 * Math.pow(2, 6 - this.zoom);
    if (this.resolution !== before) {
      await this.refreshLayer();
      await this.reanchorSelection();
    } else {
      this.notify();
    }
  }

  setPitch(pitchDeg: number): void {
    this.camera.pitchDeg = Math.max(0, Math.min(60, pitchDeg));
    this.notify();
  }

  async setMetric(metric: "firm_count" | "cash_flow"): Promise<void> {
    this.metric = metric;
    await this.refreshLayer();
  }

  async setMode(mode: "absolute" | "delta"): Promise<void> {
    this.mode = mode;
    await this.refreshLayer();
  }

  async setModel(modelId: string | null): Promise<void> {
    this.modelId = modelId;
    this.flows = null;
    if (this.hideUnrepresented) {
      await this.refreshLayer();
    }
    if (this.selection && modelId) {
      await this.refreshFlows();
    }
    this.notify();
  }

  async setHideUnrepresented(hide: boolean): Promise<void> {
    this.hideUnrepresented = hide;
    await this.refreshLayer();
  }

  async setIncludeInternal(include: boolean): Promise<void> {
    this.includeInternal = include;
    if (this.selection && this.modelId) {
      await this.refreshFlows();
    }
  }

  /** Click on a hexagon: select it and fetch its flows (with a model active). */
  async select(q: number, r: number): Promise<void> {
    const bin = this.layer?.bins.find((b) => b.q === q && b.r === r);
    this.selection = {
      q,
      r,
      lat: bin?.center_lat ?? this.camera.centerLat,
      lon: bin?.center_lon ?? this.camera.centerLon,
    };
    if (this.modelId) {
      await this.refreshFlows();
    }
    this.notify();
  }

  clearSelection(): void {
    this.selection = null;
    this.flows = null;
    this.notify();
  }

  private async refreshFlows(): Promise<void> {
    if (!this.selection || !this.modelId) return;
    const token = ++this.flowsToken;
    const flows = await this.api.flows(
      this.modelId, this.selection.q, this.selection.r,
      this.resolution, this.includeInternal,
    );
    if (token !== this.flowsToken) return;
    this.flows = flows;
    this.notify();
  }

  /** Selection persists across zoom: re-anchor to the bin whose center is
   * nearest the previously selected location at the new resolution. */
  private async reanchorSelection(): Promise<void> {
    if (!this.selection || !this.layer) return;
    let best: { q: number; r: number; lat: number; lon: number } | null = null;
    let bestDist = Infinity;
    for (const bin of this.layer.bins) {
      const d = Math.hypot(bin.center_lat - this.selection.lat,
                           bin.center_lon - this.selection.lon);
      if (d < bestDist) {
        best = { q: bin.q, r: bin.r, lat: bin.center_lat, lon: bin.center_lon };
        bestDist = d;
      }
    }
    if (best) {
      this.selection = best;
      if (this.modelId) {
        await this.refreshFlows();
      }
    } else {
      this.clearSelection();
    }
  }

  async refreshRegions(): Promise<void> {
    const token = ++this.regionsToken;
    const regions = await this.api.regions(
      this.datasetId, this.year, this.regionLevel, this.metric, this.regionNormalize,
    );
    if (token !== this.regionsToken) return;
    this.regions = regions;
    this.notify();
  }

  async setRegionView(level: number, normalize: boolean): Promise<void> {
    this.regionLevel = level;
    this.regionNormalize = normalize;
    await this.refreshRegions();
  }

  async refreshModels(): Promise<void> {
    const listing = await this.api.models();
    this.models = listing.models.filter((m) => m.dataset_id === this.datasetId);
    this.notify();
  }

  /** Constraint editor: parse for annotations; empty errors means valid. */
  async checkRules(text: string): Promise<ParseError[]> {
    try {
      await this.api.parseRules(text, this.datasetId);
      this.parseErrors = [];
    } catch (e) {
      if (e instanceof ApiError && e.parseErrors) {
        this.parseErrors = e.parseErrors;
      } else {
        throw e;
      }
    }
    this.notify();
    return this.parseErrors;
  }

  /** Submit a solve job, poll it to completion, register the result in the
   * switcher and select it (the domain-knowledge loop). */
  async solveRules(text: string, includeIoTotals = false): Promise<JobStatus> {
    const submitted = await this.api.solve(this.datasetId, this.year, text, includeIoTotals);
    const job = await this.api.waitForJob(submitted.job_id);
    this.lastJob = job;
    if (job.status === "done" && job.result_model_id) {
      await this.refreshModels();
      await this.setModel(job.result_model_id);
    }
    this.notify();
    return job;
  }
}
