/** Browser entry point: canvas renderer plus control wiring.
 *
 * Layout: a full-window 2.5D canvas (local view), a configuration pane on the
 * left (model switcher, metric/mode, hide toggle, constraint editor), a time
 * slider on top, and a details panel bottom-left with selection statistics
 * and the flow color legend.
 */

import { ApiClient } from "./api.js";
import { arcLegend, pickPrism, Scene } from "./scene.js";
import { ExplorerStore } from "./store.js";

const API_BASE =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000";

const store = new ExplorerStore(new ApiClient(API_BASE));

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("map");
const ctx = canvas.getContext("2d")!;

function resize(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
  store.camera.viewportW = canvas.width;
  store.camera.viewportH = canvas.height;
  draw();
}

function hexPath(x: number, y: number, radius: number, squash: number): void {
  ctx.beginPath();
  for (let k = 0; k < 6; k++) {
    const angle = (Math.PI / 180) * (60 * k - 30); // pointy-top
    const px = x + radius * Math.cos(angle);
    const py = y + radius * Math.sin(angle) * squash;
    if (k === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  }
  ctx.closePath();
}

let scene: Scene = { prisms: [], arcs: [] };

function draw(): void {
  scene = store.scene();
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  const squash = Math.cos(store.camera.pitchRad);
  for (const prism of scene.prisms) {
    const top = prism.y - prism.heightPx;
    if (prism.heightPx > 0.5) {
      // side walls: a darkened rectangle from ground hex to top hex
      ctx.fillStyle = prism.color;
      ctx.globalAlpha = 0.55;
      ctx.fillRect(prism.x - prism.radiusPx * 0.87, top,
                   prism.radiusPx * 1.74, prism.heightPx);
      ctx.globalAlpha = 1;
    }
    hexPath(prism.x, top, prism.radiusPx, squash);
    ctx.fillStyle = prism.color;
    ctx.fill();
    ctx.strokeStyle = prism.selected ? "#ffd166" : "rgba(255,255,255,0.25)";
    ctx.lineWidth = prism.selected ? 3 : 1;
    ctx.stroke();
  }

  for (const arc of scene.arcs) {
    const gradient = ctx.createLinearGradient(arc.x1, arc.y1, arc.x2, arc.y2);
    gradient.addColorStop(0, arc.colorFrom);
    gradient.addColorStop(1, arc.colorTo);
    ctx.strokeStyle = gradient;
    ctx.globalAlpha = arc.opacity;
    ctx.lineWidth = arc.widthPx;
    ctx.beginPath();
    ctx.moveTo(arc.x1, arc.y1);
    ctx.quadraticCurveTo(arc.cx, arc.cy, arc.x2, arc.y2);
    ctx.stroke();
    ctx.globalAlpha = 1;
  }
}

// ---------------------------------------------------------------------------
// controls

function yearFromSlider(): number {
  return store.years[Number(el<HTMLInputElement>("year").value)] ?? store.year;
}

function animateYearChange(): void {
  const start = performance.now();
  const durationMs = 600;
  const step = (now: number): void => {
    const alpha = Math.min(1, (now - start) / durationMs);
    store.tickAnimation(alpha);
    if (alpha < 1) requestAnimationFrame(step);
  };
  requestAnimationFrame(step);
}

function renderPanel(): void {
  el("year-label").textContent = String(store.year);
  el<HTMLInputElement>("year").max = String(store.years.length - 1);
  el<HTMLInputElement>("year").value = String(store.years.indexOf(store.year));

  const switcher = el<HTMLSelectElement>("model");
  const current = store.modelId ?? "";
  switcher.innerHTML = '<option value="">(no model)</option>' + store.models
    .map((m) => `<option value="${m.model_id}">${m.model_id} (${m.edge_count} edges)</option>`)
    .join("");
  switcher.value = current;

  const stats = el("stats");
  if (store.flows) {
    const s = store.flows.stats;
    stats.innerHTML = [
      `<b>selection (${store.selection?.q}, ${store.selection?.r})</b>`,
      `inward: ${s.inflow_cents} cents (${s.pct_inward.toFixed(1)}%)`,
      `outward: ${s.outflow_cents} cents (${s.pct_outward.toFixed(1)}%)`,
      `overall flow: ${s.overall_flow_cents} cents`,
      `arcs: ${store.flows.arcs.length}`,
    ].join("<br>");
  } else if (store.selection) {
    stats.textContent = "selection active; pick a model to see flows";
  } else {
    stats.textContent = "click a hexagon to inspect its flows";
  }

  el("legend").innerHTML = arcLegend()
    .map((item) => `<span style="color:${item.color}">■</span> ${item.label}`)
    .join("<br>");

  const regions = el("regions");
  if (store.regions) {
    const rows = store.regions.regions
      .map((r) => {
        const value = store.regions!.normalize
          ? `${(r.normalized ?? 0).toFixed(3)} /km²`
          : String(r.value);
        return `<tr><td>${r.region_code}</td><td>${r.name}</td><td>${value}</td></tr>`;
      })
      .join("");
    regions.innerHTML = `<table><tr><th>code</th><th>name</th><th>value</th></tr>${rows}</table>`;
  }

  el("errors").innerHTML = store.parseErrors
    .map((e) => `line ${e.line}, col ${e.col}: ${e.message}`)
    .join("<br>");
  if (store.lastJob) {
    el("job").textContent =
      `job ${store.lastJob.job_id}: ${store.lastJob.status}` +
      (store.lastJob.result_model_id ? ` → ${store.lastJob.result_model_id}` : "");
  }
  if (store.lastError) {
    el("job").textContent = store.lastError;
  }
}

function wire(): void {
  window.addEventListener("resize", resize);

  el<HTMLInputElement>("year").addEventListener("input", () => {
    void store.setYear(yearFromSlider()).then(animateYearChange);
  });
  el<HTMLSelectElement>("metric").addEventListener("change", (e) => {
    void store.setMetric((e.target as HTMLSelectElement).value as "firm_count" | "cash_flow");
  });
  el<HTMLSelectElement>("mode").addEventListener("change", (e) => {
    void store.setMode((e.target as HTMLSelectElement).value as "absolute" | "delta");
  });
  el<HTMLSelectElement>("model").addEventListener("change", (e) => {
    void store.setModel((e.target as HTMLSelectElement).value || null);
  });
  el<HTMLInputElement>("hide").addEventListener("change", (e) => {
    void store.setHideUnrepresented((e.target as HTMLInputElement).checked);
  });
  el<HTMLInputElement>("pitch").addEventListener("input", (e) => {
    store.setPitch(Number((e.target as HTMLInputElement).value));
  });
  el<HTMLInputElement>("zoom").addEventListener("input", (e) => {
    void store.setZoom(Number((e.target as HTMLInputElement).value));
  });
  el<HTMLSelectElement>("region-level").addEventListener("change", () => void refreshRegions());
  el<HTMLInputElement>("region-normalize").addEventListener("change", () => void refreshRegions());

  canvas.addEventListener("click", (e) => {
    const prism = pickPrism(scene, e.offsetX, e.offsetY);
    if (prism) void store.select(prism.q, prism.r);
    else store.clearSelection();
  });
  canvas.addEventListener("mousemove", (e) => {
    const prism = pickPrism(scene, e.offsetX, e.offsetY);
    const tip = el("tooltip");
    if (prism) {
      tip.style.display = "block";
      tip.style.left = `${e.clientX + 12}px`;
      tip.style.top = `${e.clientY + 12}px`;
      tip.innerHTML = prism.tooltip.join("<br>");
    } else {
      tip.style.display = "none";
    }
  });

  el<HTMLButtonElement>("check-rules").addEventListener("click", () => {
    void store.checkRules(el<HTMLTextAreaElement>("rules").value);
  });
  el<HTMLButtonElement>("solve").addEventListener("click", () => {
    el("job").textContent = "solving…";
    void store
      .solveRules(el<HTMLTextAreaElement>("rules").value,
                  el<HTMLInputElement>("include-io").checked)
      .catch((err) => { el("job").textContent = String(err); });
  });
}

async function refreshRegions(): Promise<void> {
  await store.setRegionView(
    Number(el<HTMLSelectElement>("region-level").value),
    el<HTMLInputElement>("region-normalize").checked,
  );
}

store.onChange(() => {
  draw();
  renderPanel();
});

wire();
resize();
void store
  .init()
  .then(() => refreshRegions())
  .catch((err) => {
    el("job").textContent = `failed to reach the API at ${API_BASE}: ${err}`;
  });
