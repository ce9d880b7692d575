/** Pure SVG chart builders: service data in, markup out. No statistics are
 * computed here, only coordinate mapping for display. */

import type { MergeRecord } from "./api.js";

export const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#e15759",
  "#76b7b2",
  "#59a14f",
  "#edc949",
  "#b07aa1",
  "#ff9da7",
  "#9c755f",
  "#bab0ab",
];

export function clusterColor(label: number): string {
  return PALETTE[(label - 1 + PALETTE.length * 8) % PALETTE.length];
}

interface Span {
  lo: number;
  hi: number;
}

function spanOf(values: number[]): Span {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return { lo: 0, hi: 1 };
  if (lo === hi) return { lo: lo - 1, hi: hi + 1 };
  return { lo, hi };
}

function mapper(span: Span, pixLo: number, pixHi: number): (v: number) => number {
  const scale = (pixHi - pixLo) / (span.hi - span.lo);
  return (v) => pixLo + (v - span.lo) * scale;
}

const fmt = (v: number): string =>
  Math.abs(v) >= 1e4 || (Math.abs(v) < 1e-2 && v !== 0)
    ? v.toExponential(2)
    : String(Math.round(v * 1000) / 1000);

function frame(width: number, height: number, body: string, cls: string): string {
  return (
    `<svg class="chart ${cls}" viewBox="0 0 ${width} ${height}" ` +
    `xmlns="http://www.w3.org/2000/svg">${body}</svg>`
  );
}

/** WSS-by-k curve with clickable markers; the service suggestion and the
 * analyst's current choice are highlighted. */
export function wssChart(wss: number[], suggestedK: number, chosenK: number | null): string {
  const W = 460;
  const H = 240;
  const pad = 34;
  const xs = mapper({ lo: 1, hi: wss.length }, pad, W - pad);
  const ys = mapper(spanOf(wss), H - pad, pad);
  const pts = wss.map((v, i) => `${xs(i + 1)},${ys(v)}`).join(" ");
  let body = `<polyline class="curve" points="${pts}" fill="none"/>`;
  wss.forEach((v, i) => {
    const k = i + 1;
    const classes = ["wss-point"];
    if (k === suggestedK) classes.push("suggested");
    if (chosenK !== null && k === chosenK) classes.push("chosen");
    body += `<circle class="${classes.join(" ")}" data-k="${k}" cx="${xs(k)}" cy="${ys(v)}" r="7"><title>k=${k}: WSS ${fmt(v)}</title></circle>`;
    body += `<text class="tick" x="${xs(k)}" y="${H - 10}" text-anchor="middle">${k}</text>`;
  });
  return frame(W, H, body, "wss-chart");
}

/** Objective trace; strictly a replay of the served numbers. */
export function traceChart(values: number[], lambdas?: number[]): string {
  const W = 460;
  const H = 200;
  const pad = 30;
  if (values.length === 0) return frame(W, H, "", "trace-chart");
  const xs = mapper({ lo: 0, hi: Math.max(1, values.length - 1) }, pad, W - pad);
  const ys = mapper(spanOf(values), H - pad, pad);
  const pts = values.map((v, i) => `${xs(i)},${ys(v)}`).join(" ");
  let body = `<polyline class="curve" points="${pts}" fill="none"/>`;
  const last = values[values.length - 1];
  body += `<circle class="trace-end" cx="${xs(values.length - 1)}" cy="${ys(last)}" r="4"/>`;
  body += `<text class="tick" x="${W - pad}" y="${ys(last) - 8}" text-anchor="end">${fmt(last)}</text>`;
  if (lambdas && lambdas.length === values.length) {
    body += `<text class="tick" x="${pad}" y="${pad - 8}">lambda ${fmt(lambdas[lambdas.length - 1])}</text>`;
  }
  return frame(W, H, body, "trace-chart");
}

/** One curve per series, colored by the current cluster labels; the y axis is
 * shown on a log scale, the standard presentation for spectra. */
export function sdfChart(
  frequencies: number[],
  values: number[][],
  labels: number[] | null,
): string {
  const W = 560;
  const H = 280;
  const pad = 36;
  const m = values[0]?.length ?? 0;
  const logged = values.map((row) => row.map((v) => Math.log10(v)));
  const flat: number[] = [];
  for (const row of logged) for (const v of row) flat.push(v);
  const xs = mapper(spanOf(frequencies), pad, W - pad);
  const ys = mapper(spanOf(flat), H - pad, pad);
  let body = "";
  for (let i = 0; i < m; i++) {
    const pts = frequencies.map((f, j) => `${xs(f)},${ys(logged[j][i])}`).join(" ");
    const color = labels ? clusterColor(labels[i]) : "#888";
    body += `<polyline class="sdf-line" data-series="${i}" points="${pts}" fill="none" stroke="${color}"/>`;
  }
  body += `<text class="tick" x="${pad}" y="${H - 8}">${fmt(frequencies[0] ?? 0)}</text>`;
  body += `<text class="tick" x="${W - pad}" y="${H - 8}" text-anchor="end">${fmt(
    frequencies[frequencies.length - 1] ?? 0,
  )}</text>`;
  return frame(W, H, body, "sdf-chart");
}

/** All K(K-1)/2 pairwise panes of the score coordinates. */
export function scatterMatrix(scores: number[][], labels: number[] | null): string {
  const K = scores[0]?.length ?? 0;
  const side = 170;
  const pad = 22;
  const panes: string[] = [];
  for (let a = 0; a < K; a++) {
    for (let b = a + 1; b < K; b++) {
      const xsSpan = spanOf(scores.map((row) => row[a]));
      const ysSpan = spanOf(scores.map((row) => row[b]));
      const xs = mapper(xsSpan, pad, side - 8);
      const ys = mapper(ysSpan, side - pad, 8);
      let dots = "";
      scores.forEach((row, i) => {
        const color = labels ? clusterColor(labels[i]) : "#888";
        dots += `<circle class="score-dot" data-series="${i}" cx="${xs(row[a])}" cy="${ys(
          row[b],
        )}" r="4" fill="${color}"><title>series ${i}</title></circle>`;
      });
      panes.push(
        `<g class="pane" data-pair="${a + 1}-${b + 1}">` +
          `<rect class="pane-frame" x="1" y="1" width="${side - 2}" height="${side - 2}"/>` +
          dots +
          `<text class="tick" x="${side / 2}" y="${side - 6}" text-anchor="middle">A.${a + 1} vs A.${b + 1}</text>` +
          `</g>`,
      );
    }
  }
  const cols = Math.min(3, Math.max(1, panes.length));
  const rows = Math.ceil(panes.length / cols);
  const placed = panes
    .map((pane, idx) => {
      const cx = (idx % cols) * (side + 10);
      const cy = Math.floor(idx / cols) * (side + 10);
      return `<g transform="translate(${cx},${cy})">${pane}</g>`;
    })
    .join("");
  return frame(cols * (side + 10), rows * (side + 10), placed, "score-matrix");
}

function leafOrder(merges: MergeRecord[], nLeaves: number): number[] {
  const expand = (id: number): number[] => {
    if (id < nLeaves) return [id];
    const row = merges[id - nLeaves];
    return [...expand(row.left), ...expand(row.right)];
  };
  return merges.length ? expand(nLeaves + merges.length - 1) : [0];
}

/** Classic bracket dendrogram; leaves are colored by the current cut labels
 * so slider-driven recoloring stays consistent with the other panels. */
export function dendrogramChart(
  merges: MergeRecord[],
  nLeaves: number,
  labels: number[] | null,
): string {
  const W = 560;
  const H = 300;
  const padTop = 14;
  const padBottom = 30;
  const order = leafOrder(merges, nLeaves);
  const slot = W / (nLeaves + 1);
  const xOf = new Map<number, number>();
  const hOf = new Map<number, number>();
  order.forEach((leaf, pos) => {
    xOf.set(leaf, slot * (pos + 1));
    hOf.set(leaf, 0);
  });
  const maxHeight = merges.length ? Math.max(...merges.map((r) => r.height)) : 1;
  const ys = mapper({ lo: 0, hi: maxHeight || 1 }, H - padBottom, padTop);
  let body = "";
  merges.forEach((row, step) => {
    const xl = xOf.get(row.left)!;
    const xr = xOf.get(row.right)!;
    const yl = ys(hOf.get(row.left)!);
    const yr = ys(hOf.get(row.right)!);
    const y = ys(row.height);
    body +=
      `<path class="merge" data-step="${step}" fill="none" ` +
      `d="M ${xl} ${yl} V ${y} H ${xr} V ${yr}"/>`;
    xOf.set(nLeaves + step, (xl + xr) / 2);
    hOf.set(nLeaves + step, row.height);
  });
  order.forEach((leaf, pos) => {
    const color = labels ? clusterColor(labels[leaf]) : "#888";
    body += `<circle class="leaf" data-leaf="${leaf}" cx="${slot * (pos + 1)}" cy="${
      H - padBottom + 8
    }" r="5" fill="${color}"><title>series ${leaf}</title></circle>`;
  });
  return frame(W, H, body, "dendrogram-chart");
}
