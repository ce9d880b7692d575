/** HTML view builders. Pure functions from service payloads + session state
 * to markup; the app shell only injects these strings and wires events. */

import type {
  CompareMethod,
  DendrogramPayload,
  ElbowPayload,
  JobView,
  ScoresPayload,
  SdfPayload,
} from "./api.js";
import {
  clusterColor,
  dendrogramChart,
  scatterMatrix,
  sdfChart,
  traceChart,
  wssChart,
} from "./charts.js";

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

const fmt = (v: number): string =>
  Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-2 && v !== 0)
    ? v.toExponential(3)
    : String(Math.round(v * 1000) / 1000);

export function errorBanner(message: string): string {
  return `<div class="banner error">${esc(message)}</div>`;
}

export function pendingHint(stateText: string): string {
  return `<div class="panel-disabled" data-state="${esc(stateText)}">results pending: fit is ${esc(
    stateText,
  )}</div>`;
}

export function datasetSummary(id: string, n: number, m: number): string {
  return (
    `<div class="dataset-summary">dataset <code>${esc(id)}</code>: ` +
    `${m} series of length ${n}</div>`
  );
}

/** WSS curve with the service suggestion highlighted; clicking a marker
 * overrides the choice of K. */
export function elbowView(payload: ElbowPayload, chosenK: number | null, m: number): string {
  const chart = wssChart(payload.wss, payload.suggested_k, chosenK);
  return (
    `<div class="elbow-view">` +
    `<p>suggested k&#771; = <strong class="suggested-k">${payload.suggested_k}</strong>` +
    ` (click a point to choose K)</p>` +
    chart +
    `<label>kmax <input type="range" id="kmax-slider" min="3" max="${m}" ` +
    `value="${payload.wss.length}"/> <span id="kmax-value">${payload.wss.length}</span></label>` +
    `</div>`
  );
}

/** Live or final convergence view for a fit job. */
export function fitMonitorView(job: JobView, liveTrace: number[]): string {
  if (job.state === "failed") {
    return errorBanner(`fit failed: ${job.reason ?? "unknown reason"}`);
  }
  if (job.state === "done" && job.summary) {
    const s = job.summary;
    return (
      `<div class="fit-monitor done">` +
      traceChart(s.objective_trace, s.lambda_trace) +
      `<dl class="fit-stats">` +
      `<dt>converged</dt><dd data-stat="converged">${s.converged}</dd>` +
      `<dt>iterations</dt><dd data-stat="iterations">${s.iterations}</dd>` +
      `<dt>AIC</dt><dd data-stat="aic">${fmt(s.aic)}</dd>` +
      `<dt>df</dt><dd data-stat="df">${fmt(s.df)}</dd>` +
      `<dt>lambda</dt><dd data-stat="lambda">${fmt(s.lambda)}</dd>` +
      `</dl></div>`
    );
  }
  const note =
    job.state === "running" && job.iteration != null
      ? `iteration ${job.iteration}, objective ${fmt(job.objective ?? NaN)}`
      : `job ${job.state}`;
  return (
    `<div class="fit-monitor live">` +
    `<p class="live-note">${note}</p>` +
    traceChart(liveTrace) +
    `</div>`
  );
}

export function sdfOverlayView(payload: SdfPayload, labels: number[] | null): string {
  return (
    `<div class="sdf-view">` +
    sdfChart(payload.frequencies, payload.values, labels) +
    `</div>`
  );
}

export function scoreMatrixView(payload: ScoresPayload, labels: number[] | null): string {
  const K = payload.scores[0]?.length ?? 0;
  const panes = (K * (K - 1)) / 2;
  return (
    `<div class="score-view" data-panes="${panes}">` +
    scatterMatrix(payload.scores, labels) +
    `</div>`
  );
}

export function dendrogramView(
  payload: DendrogramPayload,
  labels: number[] | null,
  cutK: number,
  m: number,
): string {
  return (
    `<div class="dendrogram-view">` +
    `<label>clusters k <input type="range" id="cut-slider" min="1" max="${m}" ` +
    `value="${cutK}"/> <span id="cut-value">${cutK}</span></label>` +
    dendrogramChart(payload.merges, payload.n_leaves, labels) +
    `</div>`
  );
}

/** 2-D channel map: user-supplied coordinates, service-supplied clusters. */
export function channelMapView(
  coords: Array<[number, number]>,
  labels: number[] | null,
): string {
  const W = 360;
  const H = 360;
  const xsVals = coords.map((c) => c[0]);
  const ysVals = coords.map((c) => c[1]);
  const lo = Math.min(...xsVals, ...ysVals);
  const hi = Math.max(...xsVals, ...ysVals);
  const span = hi - lo || 1;
  const map = (v: number, flip: boolean): number => {
    const t = (v - lo) / span;
    return 20 + (flip ? 1 - t : t) * (W - 40);
  };
  let dots = "";
  coords.forEach(([x, y], i) => {
    const color = labels ? clusterColor(labels[i]) : "#888";
    dots += `<circle class="channel" data-series="${i}" cx="${map(x, false)}" cy="${map(
      y,
      true,
    )}" r="6" fill="${color}"><title>channel ${i}</title></circle>`;
  });
  return (
    `<div class="channel-map">` +
    `<svg class="chart channel-chart" viewBox="0 0 ${W} ${H}" ` +
    `xmlns="http://www.w3.org/2000/svg">${dots}</svg></div>`
  );
}

/** Parse an optional channel-coordinates CSV: one x,y row per series, an
 * optional header. Purely display geometry, not statistics. */
export function parseChannelCoords(text: string): Array<[number, number]> {
  const out: Array<[number, number]> = [];
  for (const line of text.split(/\r?\n/)) {
    const cells = line.split(",").map((c) => c.trim());
    if (cells.length < 2 || cells[0] === "") continue;
    const x = Number(cells[0]);
    const y = Number(cells[1]);
    if (Number.isFinite(x) && Number.isFinite(y)) out.push([x, y]);
  }
  return out;
}

/** One card per estimator; angle and ARI appear only when the service sent
 * them (simulated datasets carry a truth reference). */
export function compareView(methods: CompareMethod[]): string {
  const cards = methods
    .map((mth) => {
      const sizes = new Map<number, number>();
      for (const lab of mth.labels) sizes.set(lab, (sizes.get(lab) ?? 0) + 1);
      const chips = [...sizes.entries()]
        .sort((a, b) => a[0] - b[0])
        .map(
          ([lab, count]) =>
            `<span class="chip" style="background:${clusterColor(lab)}">${count}</span>`,
        )
        .join("");
      const angle =
        mth.angle != null
          ? `<dt>angle</dt><dd data-stat="angle">${fmt(mth.angle)}&deg;</dd>`
          : "";
      const ari = mth.ari != null ? `<dt>ARI</dt><dd data-stat="ari">${fmt(mth.ari)}</dd>` : "";
      return (
        `<div class="method-card" data-kind="${esc(mth.kind)}">` +
        `<h3>${esc(mth.kind)}</h3>` +
        `<div class="cluster-sizes">${chips}</div>` +
        `<dl>${angle}${ari}</dl>` +
        `</div>`
      );
    })
    .join("");
  return `<div class="compare-view">${cards}</div>`;
}
