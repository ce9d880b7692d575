/** Orchestrates the session: talks to the service, holds state, and pushes
 * rendered panels into a sink. DOM-free, so contract tests can drive it with
 * a stubbed network layer and a recording sink. */

import { ApiClient, ApiError, type JobView } from "./api.js";
import { SessionState } from "./state.js";
import {
  channelMapView,
  compareView,
  datasetSummary,
  dendrogramView,
  elbowView,
  errorBanner,
  fitMonitorView,
  parseChannelCoords,
  pendingHint,
  scoreMatrixView,
  sdfOverlayView,
} from "./views.js";

export type Panel =
  | "dataset"
  | "elbow"
  | "monitor"
  | "sdf"
  | "scores"
  | "dendrogram"
  | "compare"
  | "channels";

export type RenderSink = (panel: Panel, html: string) => void;

export const POLL_INTERVAL_MS = 1000;

export class AppController {
  readonly state = new SessionState();
  private liveTrace: number[] = [];
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private clusterLabels: number[] | null = null;
  private channelCoords: Array<[number, number]> | null = null;

  constructor(
    private api: ApiClient,
    private sink: RenderSink,
  ) {}

  private fail(panel: Panel, err: unknown): void {
    const message = err instanceof Error ? err.message : String(err);
    this.sink(panel, errorBanner(message));
  }

  async uploadDataset(csv: string): Promise<void> {
    try {
      const ds = await this.api.uploadDataset(csv);
      this.state.setDataset(ds.id, ds.n, ds.m);
      this.sink("dataset", datasetSummary(ds.id, ds.n, ds.m));
      await this.loadElbow();
    } catch (err) {
      this.fail("dataset", err);
    }
  }

  async simulateDataset(n: number, m: number, seed: number): Promise<void> {
    try {
      const ds = await this.api.simulateDataset(n, m, seed);
      this.state.setDataset(ds.id, ds.n, ds.m);
      this.sink("dataset", datasetSummary(ds.id, ds.n, ds.m));
      await this.loadElbow();
    } catch (err) {
      this.fail("dataset", err);
    }
  }

  async loadElbow(kmax?: number): Promise<void> {
    const { datasetId, datasetM } = this.state;
    if (!datasetId || !datasetM) return;
    const bound = Math.max(3, Math.min(kmax ?? 10, datasetM));
    try {
      const payload = await this.api.elbow(datasetId, bound);
      this.sink("elbow", elbowView(payload, this.state.chosenK, datasetM));
    } catch (err) {
      this.fail("elbow", err);
    }
  }

  /** Human override from the elbow plot: the clicked k becomes K. */
  async chooseK(k: number): Promise<void> {
    this.state.chooseK(k);
    await this.loadElbow();
  }

  async launchFit(): Promise<void> {
    const { datasetId } = this.state;
    if (!datasetId) {
      this.sink("monitor", errorBanner("upload or simulate a dataset first"));
      return;
    }
    this.stopPolling();
    this.liveTrace = [];
    this.clusterLabels = null;
    try {
      const { job_id } = await this.api.createFit(datasetId, this.state.fitConfig());
      this.state.jobId = job_id;
      this.sink("sdf", pendingHint("queued"));
      this.sink("scores", pendingHint("queued"));
      this.sink("dendrogram", pendingHint("queued"));
      await this.pollOnce();
      this.pollTimer = setInterval(() => void this.pollOnce(), POLL_INTERVAL_MS);
    } catch (err) {
      this.fail("monitor", err);
    }
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async pollOnce(): Promise<void> {
    const { jobId } = this.state;
    if (!jobId) return;
    let job: JobView;
    try {
      job = await this.api.fitState(jobId);
    } catch (err) {
      this.stopPolling();
      this.fail("monitor", err);
      return;
    }
    if (job.state === "running" && job.objective != null) {
      this.liveTrace.push(job.objective);
    }
    this.sink("monitor", fitMonitorView(job, this.liveTrace));
    if (job.state === "done" || job.state === "failed") {
      this.stopPolling();
      if (job.state === "done") {
        await this.refreshResults();
      }
    }
  }

  /** Pull every result panel for the finished fit at the current cut. */
  async refreshResults(): Promise<void> {
    const { jobId } = this.state;
    if (!jobId) return;
    try {
      const clusters = await this.api.clusters(jobId, this.state.cutK);
      this.clusterLabels = clusters.labels;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.sink("dendrogram", pendingHint("running"));
        return;
      }
      this.fail("dendrogram", err);
      return;
    }
    await Promise.all([
      this.renderSdf(),
      this.renderScores(),
      this.renderDendrogram(),
    ]);
    this.renderChannels();
  }

  /** Slider handler: re-query only the cheap cut, then recolor all linked
   * panels from the same label vector. */
  async setCutK(k: number): Promise<void> {
    this.state.setCutK(k);
    const { jobId } = this.state;
    if (!jobId) return;
    try {
      const clusters = await this.api.clusters(jobId, k);
      this.clusterLabels = clusters.labels;
    } catch (err) {
      this.fail("dendrogram", err);
      return;
    }
    await Promise.all([
      this.renderSdf(),
      this.renderScores(),
      this.renderDendrogram(),
    ]);
    this.renderChannels();
  }

  /** Optional channel positions (x,y CSV); recolored with the current cut. */
  loadChannelCoords(text: string): void {
    const coords = parseChannelCoords(text);
    if (coords.length === 0) {
      this.sink("channels", errorBanner("no x,y coordinate rows found"));
      return;
    }
    this.channelCoords = coords;
    this.renderChannels();
  }

  private renderChannels(): void {
    if (this.channelCoords) {
      this.sink("channels", channelMapView(this.channelCoords, this.clusterLabels));
    }
  }

  private async renderSdf(): Promise<void> {
    const { jobId } = this.state;
    if (!jobId) return;
    try {
      const payload = await this.api.fitSdf(jobId);
      this.sink("sdf", sdfOverlayView(payload, this.clusterLabels));
    } catch (err) {
      this.renderPendingOr("sdf", err);
    }
  }

  private async renderScores(): Promise<void> {
    const { jobId } = this.state;
    if (!jobId) return;
    try {
      const payload = await this.api.fitScores(jobId);
      this.sink("scores", scoreMatrixView(payload, this.clusterLabels));
    } catch (err) {
      this.renderPendingOr("scores", err);
    }
  }

  private async renderDendrogram(): Promise<void> {
    const { jobId, datasetM } = this.state;
    if (!jobId) return;
    try {
      const payload = await this.api.dendrogram(jobId);
      this.sink(
        "dendrogram",
        dendrogramView(payload, this.clusterLabels, this.state.cutK, datasetM ?? payload.n_leaves),
      );
    } catch (err) {
      this.renderPendingOr("dendrogram", err);
    }
  }

  private renderPendingOr(panel: Panel, err: unknown): void {
    if (err instanceof ApiError && err.status === 409) {
      this.sink(panel, pendingHint("running"));
    } else {
      this.fail(panel, err);
    }
  }

  async runCompare(): Promise<void> {
    const { datasetId } = this.state;
    if (!datasetId) {
      this.sink("compare", errorBanner("upload or simulate a dataset first"));
      return;
    }
    try {
      const payload = await this.api.compare(datasetId, this.state.chosenK);
      this.sink("compare", compareView(payload.methods));
    } catch (err) {
      this.fail("compare", err);
    }
  }
}
