/** Typed client for the analysis service. All data shown in the UI flows
 * through this module, so tests can intercept the network layer by injecting
 * a fetch stub. */

export interface DatasetCreated {
  id: string;
  n: number;
  m: number;
  simulated?: boolean;
}

export interface ElbowPayload {
  wss: number[];
  suggested_k: number;
}

export interface JobSummary {
  converged: boolean;
  iterations: number;
  lambda: number;
  df: number;
  aic: number;
  deviance: number;
  objective_trace: number[];
  lambda_trace: number[];
}

export interface JobView {
  id: string;
  dataset_id: string;
  state: "queued" | "running" | "done" | "failed";
  config: Record<string, unknown>;
  iteration?: number;
  objective?: number;
  lambda?: number;
  reason?: string;
  summary?: JobSummary;
}

export interface SdfPayload {
  frequencies: number[];
  values: number[][]; // n_freq rows x m columns
}

export interface ScoresPayload {
  scores: number[][]; // m rows x K columns
}

export interface MergeRecord {
  left: number;
  right: number;
  height: number;
  size: number;
}

export interface DendrogramPayload {
  n_leaves: number;
  merges: MergeRecord[];
  labels?: number[];
  k?: number;
}

export interface ClustersPayload {
  k: number;
  labels: number[];
}

export interface CompareMethod {
  kind: string;
  labels: number[];
  angle?: number;
  ari?: number;
}

export interface FitRequestConfig {
  K: number;
  L?: number;
  lambda_mode?: string;
  lambda_value?: number;
  lambda_grid?: number[];
  penalty?: { kind: string; a: number };
  truncate?: number | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = (...args) => globalThis.fetch(...args),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.url(path), init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail =
        typeof body === "object" && body !== null && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  uploadDataset(csv: string): Promise<DatasetCreated> {
    return this.request("/datasets", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csv,
    });
  }

  simulateDataset(n: number, m: number, seed: number): Promise<DatasetCreated> {
    return this.request("/datasets/simulate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ n, m, seed }),
    });
  }

  elbow(datasetId: string, kmax: number): Promise<ElbowPayload> {
    return this.request(`/datasets/${datasetId}/elbow?kmax=${kmax}`);
  }

  createFit(datasetId: string, config: FitRequestConfig): Promise<{ job_id: string }> {
    return this.request("/fits", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dataset_id: datasetId, config }),
    });
  }

  fitState(jobId: string): Promise<JobView> {
    return this.request(`/fits/${jobId}`);
  }

  fitSdf(jobId: string): Promise<SdfPayload> {
    return this.request(`/fits/${jobId}/sdf`);
  }

  fitScores(jobId: string): Promise<ScoresPayload> {
    return this.request(`/fits/${jobId}/scores`);
  }

  dendrogram(jobId: string): Promise<DendrogramPayload> {
    return this.request(`/fits/${jobId}/dendrogram`);
  }

  clusters(jobId: string, k: number): Promise<ClustersPayload> {
    return this.request(`/fits/${jobId}/clusters?k=${k}`);
  }

  compare(datasetId: string, K: number): Promise<{ methods: CompareMethod[] }> {
    return this.request("/compare", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dataset_id: datasetId, K }),
    });
  }
}
