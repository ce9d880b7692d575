/** Browser shell: binds the controller to the page. The only module that
 * touches the DOM. */

import { ApiClient } from "./api.js";
import { AppController, type Panel } from "./controller.js";

const PANEL_IDS: Record<Panel, string> = {
  dataset: "panel-dataset",
  elbow: "panel-elbow",
  monitor: "panel-monitor",
  sdf: "panel-sdf",
  scores: "panel-scores",
  dendrogram: "panel-dendrogram",
  compare: "panel-compare",
  channels: "panel-channels",
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function setup(): void {
  const baseInput = byId<HTMLInputElement>("base-url");
  let controller = makeController(baseInput.value);
  baseInput.addEventListener("change", () => {
    controller.stopPolling();
    controller = makeController(baseInput.value);
  });

  byId<HTMLButtonElement>("upload-button").addEventListener("click", () => {
    const file = byId<HTMLInputElement>("upload-file").files?.[0];
    if (!file) return;
    void file.text().then((text) => controller.uploadDataset(text));
  });

  byId<HTMLButtonElement>("simulate-button").addEventListener("click", () => {
    const n = Number(byId<HTMLInputElement>("sim-n").value);
    const m = Number(byId<HTMLInputElement>("sim-m").value);
    const seed = Number(byId<HTMLInputElement>("sim-seed").value);
    void controller.simulateDataset(n, m, seed);
  });

  byId<HTMLButtonElement>("fit-button").addEventListener("click", () => {
    const settings = controller.state;
    settings.basisSize = Number(byId<HTMLInputElement>("basis-size").value);
    const penalty = byId<HTMLSelectElement>("penalty-kind").value;
    settings.setPenalty(
      penalty === "d2" ? "second_derivative" : "difference",
      Number(byId<HTMLInputElement>("penalty-order").value),
    );
    const mode = byId<HTMLSelectElement>("lambda-mode").value as
      | "auto"
      | "fixed"
      | "aic_grid";
    settings.setLambda(mode, Number(byId<HTMLInputElement>("lambda-value").value));
    void controller.launchFit();
  });

  byId<HTMLButtonElement>("compare-button").addEventListener("click", () => {
    void controller.runCompare();
  });

  byId<HTMLInputElement>("channel-coords").addEventListener("change", (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    void file.text().then((text) => controller.loadChannelCoords(text));
  });

  // Delegated events for content the controller re-renders.
  byId<HTMLElement>(PANEL_IDS.elbow).addEventListener("click", (ev) => {
    const target = (ev.target as Element).closest(".wss-point");
    if (target) void controller.chooseK(Number(target.getAttribute("data-k")));
  });
  byId<HTMLElement>(PANEL_IDS.elbow).addEventListener("change", (ev) => {
    const target = ev.target as HTMLInputElement;
    if (target.id === "kmax-slider") void controller.loadElbow(Number(target.value));
  });
  byId<HTMLElement>(PANEL_IDS.dendrogram).addEventListener("input", (ev) => {
    const target = ev.target as HTMLInputElement;
    if (target.id === "cut-slider") void controller.setCutK(Number(target.value));
  });

  function makeController(baseUrl: string): AppController {
    return new AppController(new ApiClient(baseUrl), (panel, html) => {
      byId(PANEL_IDS[panel]).innerHTML = html;
    });
  }
}

document.addEventListener("DOMContentLoaded", setup);
