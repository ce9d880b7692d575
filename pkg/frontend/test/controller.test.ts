import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, type JobView } from "../src/api.js";
import { AppController, POLL_INTERVAL_MS, type Panel } from "../src/controller.js";
import { ServiceStub } from "./stub.js";

const BASE = "http://service.test";

function recorder() {
  const panels = new Map<string, string>();
  const sink = (panel: Panel, html: string) => panels.set(panel, html);
  return { panels, sink };
}

function doneJob(overrides: Partial<JobView> = {}): JobView {
  return {
    id: "job1",
    dataset_id: "ds1",
    state: "done",
    config: { K: 3 },
    summary: {
      converged: true,
      iterations: 4,
      lambda: 12.5,
      df: 9.25,
      aic: 321.5,
      deviance: 151.5,
      objective_trace: [100, 90, 85, 84.5, 84.5],
      lambda_trace: [1, 4, 9, 12.5, 12.5],
    },
    ...overrides,
  };
}

function standardStub(job: JobView = doneJob()): ServiceStub {
  const stub = new ServiceStub();
  stub
    .on("POST", /^\/datasets\/simulate$/, () => ({ body: { id: "ds1", n: 128, m: 4 } }))
    .on("POST", /^\/datasets$/, () => ({ body: { id: "ds1", n: 128, m: 4 } }))
    .on("GET", /^\/datasets\/ds1\/elbow$/, () => ({
      body: { wss: [40, 12, 6, 5.5], suggested_k: 3 },
    }))
    .on("POST", /^\/fits$/, () => ({ body: { job_id: "job1" } }))
    .on("GET", /^\/fits\/job1$/, () => ({ body: job }))
    .on("GET", /^\/fits\/job1\/sdf$/, () => ({
      body: {
        frequencies: [0.1, 0.2, 0.3],
        values: [
          [1.0, 2.0, 1.5, 0.5],
          [1.2, 1.8, 1.4, 0.6],
          [0.9, 1.6, 1.2, 0.7],
        ],
      },
    }))
    .on("GET", /^\/fits\/job1\/scores$/, () => ({
      body: {
        scores: [
          [3.0, 1.0, 0.2],
          [2.8, -1.1, 0.1],
          [-3.1, 0.9, -0.2],
          [-2.7, -1.2, 0.3],
        ],
      },
    }))
    .on("GET", /^\/fits\/job1\/dendrogram$/, () => ({
      body: {
        n_leaves: 4,
        merges: [
          { left: 0, right: 1, height: 1.0, size: 2 },
          { left: 2, right: 3, height: 1.4, size: 2 },
          { left: 4, right: 5, height: 3.2, size: 4 },
        ],
      },
    }))
    .on("GET", /^\/fits\/job1\/clusters$/, (url) => {
      const k = Number(url.searchParams.get("k"));
      const labels =
        k === 1 ? [1, 1, 1, 1] : k === 2 ? [1, 1, 2, 2] : [1, 2, 3, k >= 4 ? 4 : 3];
      return { body: { k, labels } };
    })
    .on("POST", /^\/compare$/, () => ({
      body: {
        methods: ["Ps", "S.Ps", "tSVD.Ps", "NSDE", "tSVD.NSDE", "NCSDE"].map((kind) => ({
          kind,
          labels: [1, 1, 2, 2],
          angle: kind === "NCSDE" ? 7.8 : 88.9,
          ari: kind === "NCSDE" ? 1.0 : 0.4,
        })),
      },
    }));
  return stub;
}

function makeApp(stub: ServiceStub) {
  const { panels, sink } = recorder();
  const controller = new AppController(new ApiClient(BASE, stub.fetch), sink);
  return { controller, panels };
}

describe("elbow view", () => {
  it("highlights the service-suggested k", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    const html = panels.get("elbow")!;
    expect(html).toContain('class="suggested-k">3<');
    expect(html).toMatch(/class="wss-point suggested[^"]*" data-k="3"/);
  });

  it("clicking a point overrides the chosen K for the next fit", async () => {
    const stub = standardStub();
    const { controller } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.chooseK(4);
    expect(controller.state.chosenK).toBe(4);
    expect(controller.state.fitConfig()["K"]).toBe(4);
  });

  it("bounds the kmax slider by the number of series", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    expect(panels.get("elbow")!).toContain('id="kmax-slider" min="3" max="4"');
  });

  it("surfaces service errors inline", async () => {
    const stub = standardStub();
    stub.on("GET", /^\/datasets\/broken\/elbow$/, () => ({
      status: 400,
      body: { detail: "kmax must not exceed m=2" },
    }));
    const { controller, panels } = makeApp(stub);
    controller.state.setDataset("broken", 64, 2);
    controller.state.datasetM = 99; // force the request through to the 400
    await controller.loadElbow();
    expect(panels.get("elbow")!).toContain("banner error");
    expect(panels.get("elbow")!).toContain("kmax must not exceed");
  });
});

describe("fit monitor", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("renders the final trace non-increasing with the served stats", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();
    const html = panels.get("monitor")!;
    // served numbers are shown verbatim
    expect(html).toContain('data-stat="aic">321.5<');
    expect(html).toContain('data-stat="df">9.25<');
    expect(html).toContain('data-stat="lambda">12.5<');
    expect(html).toContain('data-stat="iterations">4<');
    // the polyline replays the trace: svg y grows downward, so a
    // non-increasing objective renders as non-decreasing y coordinates
    const pts = /polyline class="curve" points="([^"]+)"/.exec(html)![1];
    const ys = pts.split(" ").map((p) => Number(p.split(",")[1]));
    for (let i = 1; i < ys.length; i++) expect(ys[i]).toBeGreaterThanOrEqual(ys[i - 1]);
  });

  it("polls at one-second cadence, accumulates served objectives, stops on done", async () => {
    const states: JobView[] = [
      { id: "job1", dataset_id: "ds1", state: "running", config: {}, iteration: 1, objective: 120 },
      { id: "job1", dataset_id: "ds1", state: "running", config: {}, iteration: 2, objective: 111 },
      doneJob(),
    ];
    let cursor = 0;
    const stub = standardStub();
    // replace the default /fits/job1 responder by reordering routes
    const seq = new ServiceStub();
    seq
      .on("POST", /^\/datasets\/simulate$/, () => ({ body: { id: "ds1", n: 128, m: 4 } }))
      .on("GET", /^\/datasets\/ds1\/elbow$/, () => ({
        body: { wss: [40, 12, 6, 5.5], suggested_k: 3 },
      }))
      .on("POST", /^\/fits$/, () => ({ body: { job_id: "job1" } }))
      .on("GET", /^\/fits\/job1$/, () => ({
        body: states[Math.min(cursor++, states.length - 1)],
      }))
      .on("GET", /^\/fits\/job1\/(sdf|scores|dendrogram|clusters)$/, (url) =>
        stubResult(url),
      );
    const resultStub = standardStub();
    function stubResult(url: URL) {
      // delegate to the standard fixtures
      const route = resultStub["routes" as never] as unknown;
      void route;
      if (url.pathname.endsWith("/sdf")) {
        return {
          body: {
            frequencies: [0.1, 0.2],
            values: [
              [1, 1, 1, 1],
              [1, 1, 1, 1],
            ],
          },
        };
      }
      if (url.pathname.endsWith("/scores")) {
        return { body: { scores: [[1, 0], [0, 1], [1, 1], [0, 0]] } };
      }
      if (url.pathname.endsWith("/dendrogram")) {
        return {
          body: {
            n_leaves: 4,
            merges: [
              { left: 0, right: 1, height: 1, size: 2 },
              { left: 2, right: 3, height: 2, size: 2 },
              { left: 4, right: 5, height: 3, size: 4 },
            ],
          },
        };
      }
      return { body: { k: 1, labels: [1, 1, 1, 1] } };
    }

    const { controller, panels } = makeApp(seq);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit(); // first poll happens immediately
    expect(panels.get("monitor")!).toContain("iteration 1");

    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(panels.get("monitor")!).toContain("iteration 2");
    const live = /polyline class="curve" points="([^"]+)"/.exec(panels.get("monitor")!)![1];
    expect(live.split(" ").length).toBe(2); // the two served objectives so far

    await vi.advanceTimersByTimeAsync(POLL_INTERVAL_MS);
    expect(panels.get("monitor")!).toContain('data-stat="converged">true<');

    const pollsAtDone = seq.requests("GET", /\/fits\/job1$/).length;
    await vi.advanceTimersByTimeAsync(5 * POLL_INTERVAL_MS);
    expect(seq.requests("GET", /\/fits\/job1$/).length).toBe(pollsAtDone);
  });

  it("shows a reason banner for failed jobs", async () => {
    const stub = standardStub({
      id: "job1",
      dataset_id: "ds1",
      state: "failed",
      config: {},
      reason: "ValueError: K exceeds min(L, m)",
    });
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();
    const html = panels.get("monitor")!;
    expect(html).toContain("banner error");
    expect(html).toContain("K exceeds min(L, m)");
  });
});

describe("linked result panels", () => {
  it("cut slider at k=1 colors every leaf identically and re-queries /clusters per change", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();

    expect(stub.requests("GET", /\/clusters\?k=1$/).length).toBe(1);
    const leaves = [...panels.get("dendrogram")!.matchAll(/class="leaf"[^>]*fill="([^"]+)"/g)];
    expect(leaves.length).toBe(4);
    expect(new Set(leaves.map((m) => m[1])).size).toBe(1);

    await controller.setCutK(2);
    expect(stub.requests("GET", /\/clusters\?k=2$/).length).toBe(1);
    await controller.setCutK(2);
    expect(stub.requests("GET", /\/clusters\?k=2$/).length).toBe(2);

    // recoloring is consistent across all linked panels for the same k
    const leafColors = [...panels.get("dendrogram")!.matchAll(/data-leaf="(\d)"[^>]*fill="([^"]+)"/g)]
      .sort((a, b) => Number(a[1]) - Number(b[1]))
      .map((m) => m[2]);
    const dotColors = [...panels.get("scores")!.matchAll(/data-series="(\d)"[^>]*fill="([^"]+)"/g)]
      .filter((m, i, arr) => arr.findIndex((x) => x[1] === m[1]) === i)
      .sort((a, b) => Number(a[1]) - Number(b[1]))
      .map((m) => m[2]);
    const lineColors = [...panels.get("sdf")!.matchAll(/data-series="(\d)"[^>]*stroke="([^"]+)"/g)]
      .sort((a, b) => Number(a[1]) - Number(b[1]))
      .map((m) => m[2]);
    expect(dotColors).toEqual(leafColors);
    expect(lineColors).toEqual(leafColors);
  });

  it("renders K(K-1)/2 scatter panes for K=3", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();
    const html = panels.get("scores")!;
    expect(html).toContain('data-panes="3"');
    expect([...html.matchAll(/<g class="pane"/g)].length).toBe(3);
  });

  it("cut slider enforces k in [1, m]", async () => {
    const stub = standardStub();
    const { controller } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await expect(controller.setCutK(0)).rejects.toThrow(/cut k must be in \[1, 4\]/);
    await expect(controller.setCutK(5)).rejects.toThrow(/cut k must be in \[1, 4\]/);
  });

  it("shows pending hints while results are not ready", async () => {
    const stub = new ServiceStub();
    stub
      .on("POST", /^\/datasets\/simulate$/, () => ({ body: { id: "ds1", n: 128, m: 4 } }))
      .on("GET", /^\/datasets\/ds1\/elbow$/, () => ({
        body: { wss: [40, 12, 6, 5.5], suggested_k: 3 },
      }))
      .on("POST", /^\/fits$/, () => ({ body: { job_id: "job1" } }))
      .on("GET", /^\/fits\/job1$/, () => ({ body: doneJob() }))
      .on("GET", /^\/fits\/job1\/clusters$/, () => ({
        status: 409,
        body: { detail: "fit is running; results not ready" },
      }));
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();
    expect(panels.get("dendrogram")!).toContain("results pending");
  });
});

describe("channel map", () => {
  it("colors user-supplied channel positions with the current cut labels", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();
    await controller.setCutK(2);
    controller.loadChannelCoords("x,y\n0,0\n1,0\n0,1\n1,1\n");
    const colors = [...panels.get("channels")!.matchAll(/class="channel"[^>]*fill="([^"]+)"/g)].map(
      (m) => m[1],
    );
    expect(colors.length).toBe(4);
    // labels at k=2 are [1,1,2,2]: two distinct colors, paired
    expect(new Set(colors).size).toBe(2);
    expect(colors[0]).toBe(colors[1]);
    expect(colors[2]).toBe(colors[3]);
  });

  it("rejects a coordinates file without numeric rows", () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    controller.loadChannelCoords("nothing here");
    expect(panels.get("channels")!).toContain("no x,y coordinate rows");
  });
});

describe("method comparison", () => {
  it("shows six cards with angles when the dataset carries a truth reference", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.runCompare();
    const html = panels.get("compare")!;
    const kinds = [...html.matchAll(/data-kind="([^"]+)"/g)].map((m) => m[1]);
    expect(kinds).toEqual(["Ps", "S.Ps", "tSVD.Ps", "NSDE", "tSVD.NSDE", "NCSDE"]);
    expect(html).toContain('data-stat="angle">7.8&deg;<');
  });

  it("omits angles when the service did not send them", async () => {
    const stub = standardStub();
    const routes = stub as unknown as {
      routes: Array<[string, RegExp, unknown]>;
    };
    routes.routes = routes.routes.filter(([, pattern]) => !pattern.test("/compare"));
    stub.on("POST", /^\/compare$/, () => ({
      body: {
        methods: ["Ps", "S.Ps", "tSVD.Ps", "NSDE", "tSVD.NSDE", "NCSDE"].map((kind) => ({
          kind,
          labels: [1, 2, 1, 2],
        })),
      },
    }));
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.runCompare();
    expect(panels.get("compare")!).not.toContain('data-stat="angle"');
  });
});

describe("network traceability", () => {
  it("every rendered number originates from a recorded service response", async () => {
    const stub = standardStub();
    const { controller, panels } = makeApp(stub);
    await controller.simulateDataset(128, 4, 1);
    await controller.launchFit();
    // the monitor stats are exactly the served summary values
    const html = panels.get("monitor")!;
    for (const [stat, value] of [
      ["aic", "321.5"],
      ["df", "9.25"],
      ["lambda", "12.5"],
    ] as const) {
      expect(html).toContain(`data-stat="${stat}">${value}<`);
    }
    // and the UI asked the service for everything it shows
    const paths = stub.calls.map((c) => new URL(c.url).pathname);
    for (const needed of [
      "/datasets/simulate",
      "/datasets/ds1/elbow",
      "/fits",
      "/fits/job1",
      "/fits/job1/sdf",
      "/fits/job1/scores",
      "/fits/job1/dendrogram",
      "/fits/job1/clusters",
    ]) {
      expect(paths).toContain(needed);
    }
  });
});
