/** Scripted end-to-end contract checks against a live backend serving the
 * 500-firm fixture. The client's "rendering" is its scene model (hex prisms
 * and arc primitives); the canvas layer draws that model verbatim. */

import { beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ExplorerStore } from "../src/store.js";
import type { FlowsResponse } from "../src/types.js";
import { E2E_BASE } from "./globalSetup.js";

/** The two-line example rule file an analyst would submit. */
const EXAMPLE_RULES = [
  "sector_total C -> A = 5000000 tol 0",
  'cap out for firm(employee_expenses < 10000000) to firm(sector == "A") <= 10',
].join("\n");

describe("exploration client against the live service", () => {
  let store: ExplorerStore;
  let api: ApiClient;

  beforeAll(async () => {
    api = new ApiClient(E2E_BASE);
    store = new ExplorerStore(api);
    await store.init();
  });

  it("(a) renders a nonempty hex layer", async () => {
    expect(store.layer).not.toBeNull();
    expect(store.layer!.bins.length).toBeGreaterThan(0);
    const scene = store.scene();
    expect(scene.prisms.length).toBe(store.layer!.bins.length);
    expect(scene.prisms.length).toBeGreaterThan(0);
    // prisms carry geometry and color the canvas can draw
    for (const prism of scene.prisms.slice(0, 5)) {
      expect(Number.isFinite(prism.x)).toBe(true);
      expect(Number.isFinite(prism.y)).toBe(true);
      expect(prism.color).toMatch(/^rgb/);
    }
  });

  it("(b) a year-slider change triggers exactly one layer refetch per step", async () => {
    const years = store.years;
    expect(years.length).toBeGreaterThanOrEqual(2);
    const before = api.fetchCount["bins"] ?? 0;
    await store.setYear(years[1]);
    expect(api.fetchCount["bins"]).toBe(before + 1);
    // animation keyframes come from the previous layer, not another request
    expect(store.previousLayer).not.toBeNull();
    store.tickAnimation(0.5);
    store.tickAnimation(1);
    await store.setYear(years[0]);
    expect(api.fetchCount["bins"]).toBe(before + 2);
    await store.setYear(years[1]);
    expect(api.fetchCount["bins"]).toBe(before + 3);
  });

  it("(d) submitting the example rule file completes a job and the model lands in the switcher", async () => {
    const check = await store.checkRules(EXAMPLE_RULES);
    expect(check).toEqual([]);
    const job = await store.solveRules(EXAMPLE_RULES);
    expect(job.status).toBe("done");
    expect(job.result_model_id).toBeTruthy();
    expect(store.models.map((m) => m.model_id)).toContain(job.result_model_id);
    expect(store.modelId).toBe(job.result_model_id);
  });

  it("(c) clicking a bin renders arcs whose displayed totals equal the /flows response", async () => {
    expect(store.modelId).toBeTruthy();
    // find a selection with incident flows: try bins by descending value
    const bins = [...store.layer!.bins].sort(
      (a, b) => Number(b.value) - Number(a.value),
    );
    let displayed: FlowsResponse | null = null;
    for (const bin of bins) {
      await store.select(bin.q, bin.r);
      if (store.flows && store.flows.arcs.length > 0) {
        displayed = store.flows;
        break;
      }
    }
    expect(displayed).not.toBeNull();
    const direct = (await (
      await fetch(
        `${E2E_BASE}/models/${store.modelId}/flows?bin=` +
          `${displayed!.selection.q}:${displayed!.selection.r}` +
          `&resolution=${store.resolution}`,
      )
    ).json()) as FlowsResponse;

    // the client displays API values verbatim: stats match field by field
    expect(displayed!.stats).toEqual(direct.stats);
    // and the rendered arc amounts sum to the same totals as the response
    const arcSum = (flows: FlowsResponse, direction: string) =>
      flows.arcs
        .filter((a) => a.direction === direction)
        .reduce((sum, a) => sum + Number(a.amount_cents), 0);
    const scene = store.scene();
    expect(scene.arcs.length).toBe(direct.arcs.length);
    const sceneOut = scene.arcs
      .filter((a) => a.direction === "out-of-selection")
      .reduce((sum, a) => sum + Number(a.amount), 0);
    const sceneIn = scene.arcs
      .filter((a) => a.direction === "into-selection")
      .reduce((sum, a) => sum + Number(a.amount), 0);
    expect(sceneOut).toBe(arcSum(direct, "out-of-selection"));
    expect(sceneIn).toBe(arcSum(direct, "into-selection"));
    expect(sceneOut).toBe(Number(direct.stats.outflow_cents));
    expect(sceneIn).toBe(Number(direct.stats.inflow_cents));
    const maxWeight = Math.max(...direct.arcs.map((a) => a.relative_weight));
    expect(maxWeight).toBe(1);
  });

  it("keeps the selection across zoom and refetches accordingly", async () => {
    expect(store.selection).not.toBeNull();
    const anchorLat = store.selection!.lat;
    await store.setZoom(store.zoom - 1);
    expect(store.selection).not.toBeNull();
    // re-anchored to the coarser bin nearest the old location
    expect(Math.abs(store.selection!.lat - anchorLat)).toBeLessThan(1.0);
    expect(store.flows).not.toBeNull();
    await store.setZoom(store.zoom + 1);
  });

  it("parse errors come back with line and column annotations", async () => {
    const errors = await store.checkRules("sector_total C -> ???");
    expect(errors.length).toBe(1);
    expect(errors[0].line).toBe(1);
    expect(errors[0].col).toBeGreaterThan(0);
  });

  it("hide-unrepresented re-requests the layer restricted to the model", async () => {
    const membersFirst = store.layer!.bins.reduce((n, b) => n + (b.firm_count ?? 0), 0);
    await store.setHideUnrepresented(true);
    const restricted = store.layer!.bins.reduce((n, b) => n + (b.firm_count ?? 0), 0);
    expect(store.layer!.model_id).toBe(store.modelId);
    expect(restricted).toBeLessThanOrEqual(membersFirst);
    await store.setHideUnrepresented(false);
  });

  it("delta mode delivers signed changes for the blue/red gradient", async () => {
    await store.setYear(store.years[1]);
    await store.setMode("delta");
    expect(store.layer!.mode).toBe("delta");
    expect(store.layer!.previous_year).toBe(store.years[0]);
    const scene = store.scene();
    expect(scene.prisms.length).toBeGreaterThan(0);
    await store.setMode("absolute");
  });

  it("regional view serves absolute and normalized values", async () => {
    await store.setRegionView(2, false);
    const absolute = store.regions!;
    expect(absolute.regions.length).toBeGreaterThan(0);
    await store.setRegionView(2, true);
    const normalized = store.regions!;
    for (const row of normalized.regions) {
      expect(row.normalized).not.toBeNull();
      expect(row.area_km2).not.toBeNull();
    }
    // displayed normalization equals the API's metric/area computation
    const byCode = new Map(absolute.regions.map((r) => [r.region_code, r]));
    for (const row of normalized.regions) {
      const abs = byCode.get(row.region_code)!;
      expect(row.normalized!).toBeCloseTo(Number(abs.value) / row.area_km2!, 6);
    }
  });

  it("discards stale layer responses (last write wins)", async () => {
    const slow = store.refreshLayer();
    const fast = store.setYear(store.years[0]);
    await Promise.all([slow, fast]);
    expect(store.layer!.year).toBe(store.years[0]);
    await store.setYear(store.years[1]);
  });
});
