"""HTTP/JSON analysis service backing the web UI.

Datasets are uploaded as CSV and persisted content-addressed under a data
directory; fits run as asynchronous jobs on a bounded FIFO worker pool and
publish one progress record per outer Newton iteration, so clients can stream
convergence. Completed fits are persisted, making the service stateless across
restarts up to the data directory.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .baselines import (
    EstimatorKind,
    estimate_ncsde,
    estimate_nsde,
    estimate_ps,
    estimate_sps,
    estimate_tsvd_nsde,
    estimate_tsvd_ps,
    nsde_coefficient_matrix,
    smoothed_log_periodograms,
)
from .basis import BasisSpec, eval_basis, penalty_for
from .cluster import cut, elbow, euclidean_distances, ward_linkage, wss_curve
from .engine import FitConfig, fit
from .metrics import adjusted_rand_index, canonical_angle
from .simulate import ArModel, MixtureDesign, generate_mixture, true_sdf
from .spectral import CsvFormatError, read_time_series_csv, periodogram, truncate_band

SCHEMA_DIR = Path(__file__).parent / "schemas"
MAX_QUEUED_JOBS = 100


def _now() -> float:
    return time.time()


class Store:
    """Flat-file persistence: content-addressed blobs plus a JSON index."""

    def __init__(self, data_dir, workers=1):
        self.root = Path(data_dir)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        (self.root / "fits").mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.datasets: dict[str, dict] = {}
        self.jobs: dict[str, dict] = {}
        self.pgram_cache: dict[tuple, dict] = {}
        self.series_cache: dict[str, object] = {}
        self.dendro_cache: dict[str, object] = {}
        self.pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self._load()

    def _load(self):
        index = self.root / "datasets.json"
        if index.exists():
            self.datasets = json.loads(index.read_text())
        for path in sorted((self.root / "fits").glob("*.json")):
            record = json.loads(path.read_text())
            self.jobs[record["id"]] = record

    def _flush_datasets(self):
        (self.root / "datasets.json").write_text(json.dumps(self.datasets, indent=2))

    def add_dataset(self, text: str, reference: dict | None = None) -> dict:
        ts = read_time_series_csv(io.StringIO(text))
        digest = hashlib.sha256(text.encode()).hexdigest()
        blob = self.root / "blobs" / f"{digest[:24]}.csv"
        if not blob.exists():
            blob.write_text(text)
        with self.lock:
            ds_id = uuid.uuid4().hex[:12]
            entry = {
                "id": ds_id,
                "n": ts.n,
                "m": ts.m,
                "content_hash": digest,
                "blob": blob.name,
                "created_at": _now(),
            }
            if reference is not None:
                entry["reference"] = reference
            self.datasets[ds_id] = entry
            self._flush_datasets()
        return entry

    def dataset(self, ds_id: str) -> dict:
        try:
            return self.datasets[ds_id]
        except KeyError:
            raise HTTPException(404, f"unknown dataset '{ds_id}'") from None

    def series(self, ds_id: str):
        entry = self.dataset(ds_id)
        if ds_id not in self.series_cache:
            path = self.root / "blobs" / entry["blob"]
            self.series_cache[ds_id] = read_time_series_csv(path)
        return self.series_cache[ds_id]

    def periodogram_payload(self, ds_id: str, truncate: int | None) -> dict:
        key = (ds_id, truncate)
        if key not in self.pgram_cache:
            pg = periodogram(self.series(ds_id))
            if truncate is not None:
                if truncate > pg.n_freq or truncate < 1:
                    raise HTTPException(
                        400, f"truncate must be in [1, {pg.n_freq}], got {truncate}"
                    )
                pg = truncate_band(pg, truncate)
            self.pgram_cache[key] = {
                "grid": pg.grid.omegas.tolist(),
                "ordinates": pg.ordinates.tolist(),
            }
        return self.pgram_cache[key]

    def job(self, job_id: str) -> dict:
        try:
            return self.jobs[job_id]
        except KeyError:
            raise HTTPException(404, f"unknown fit job '{job_id}'") from None

    def submit_fit(self, ds_id: str, config: dict) -> dict:
        entry = self.dataset(ds_id)
        try:
            fit_config, basis_opts = parse_fit_request(config, entry["m"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"invalid fit config: {exc}") from None
        with self.lock:
            pending = sum(1 for j in self.jobs.values() if j["state"] in ("queued", "running"))
            if pending >= MAX_QUEUED_JOBS:
                raise HTTPException(503, "job queue full")
            job_id = uuid.uuid4().hex[:12]
            record = {
                "id": job_id,
                "dataset_id": ds_id,
                "config": config,
                "state": "queued",
                "created_at": _now(),
            }
            self.jobs[job_id] = record
        self.pool.submit(self._run_fit, job_id, ds_id, fit_config, basis_opts)
        return record

    def _run_fit(self, job_id, ds_id, fit_config, basis_opts):
        record = self.jobs[job_id]

        def progress(iteration, objective, lam):
            record["state"] = "running"
            record["iteration"] = iteration
            record["objective"] = objective
            record["lambda"] = lam

        try:
            record["state"] = "running"
            pg = periodogram(self.series(ds_id))
            if basis_opts.get("truncate"):
                pg = truncate_band(pg, int(basis_opts["truncate"]))
            spec = BasisSpec(
                n_basis=int(basis_opts.get("L", 40)),
                degree=int(basis_opts.get("degree", 3)),
                domain=(0.0, float(pg.grid.omegas[-1])),
            )
            basis = eval_basis(pg.grid, spec)
            penalty = penalty_for(spec, fit_config.penalty_kind, fit_config.penalty_order)
            result = fit(pg, basis, penalty, fit_config, progress=progress)
            record["result"] = result.to_json()
            record["frequencies"] = pg.grid.omegas.tolist()
            record["basis"] = {"L": spec.n_basis, "degree": spec.degree,
                               "domain": list(spec.domain)}
            record["sdf"] = np.exp(
                basis.values @ result.coefficients.theta @ result.coefficients.scores.T
            ).tolist()
            record["state"] = "done"
            record["finished_at"] = _now()
            path = self.root / "fits" / f"{job_id}.json"
            path.write_text(json.dumps(record))
        except Exception as exc:  # surfaced through the job state
            record["state"] = "failed"
            record["reason"] = f"{type(exc).__name__}: {exc}"
            record["finished_at"] = _now()

    def dendrogram_for(self, job_id: str):
        record = self.require_done(job_id)
        if job_id not in self.dendro_cache:
            scores = np.asarray(record["result"]["scores"])
            self.dendro_cache[job_id] = ward_linkage(euclidean_distances(scores))
        return self.dendro_cache[job_id]

    def require_done(self, job_id: str) -> dict:
        record = self.job(job_id)
        if record["state"] == "failed":
            raise HTTPException(409, f"fit failed: {record.get('reason', 'unknown')}")
        if record["state"] != "done":
            raise HTTPException(409, f"fit is {record['state']}; results not ready")
        return record


def parse_fit_request(config: dict, m: int):
    """Split a client fit config into engine knobs and basis options."""
    if not isinstance(config, dict):
        raise ValueError("config must be an object")
    payload = dict(config)
    basis_opts = {
        "L": payload.pop("L", 40),
        "degree": payload.pop("degree", 3),
        "truncate": payload.pop("truncate", None),
    }
    fit_config = FitConfig.from_json(payload)
    if fit_config.n_components > min(int(basis_opts["L"]), m):
        raise ValueError(
            f"K={fit_config.n_components} exceeds min(L={basis_opts['L']}, m={m})"
        )
    return fit_config, basis_opts


def job_view(record: dict) -> dict:
    """Public job state; heavy payloads stay behind the result endpoints."""
    view = {
        "id": record["id"],
        "dataset_id": record["dataset_id"],
        "state": record["state"],
        "config": record["config"],
        "created_at": record["created_at"],
    }
    for key in ("iteration", "objective", "lambda", "reason", "finished_at"):
        if key in record:
            view[key] = record[key]
    if record["state"] == "done":
        result = record["result"]
        view["summary"] = {
            "converged": result["converged"],
            "iterations": result["iterations"],
            "lambda": result["lambda"],
            "df": result["df"],
            "aic": result["aic"],
            "deviance": result["deviance"],
            "objective_trace": result["objective_trace"],
            "lambda_trace": result["lambda_trace"],
        }
    return view


def create_app(data_dir, workers: int = 1, cors_origins=("*",)) -> FastAPI:
    app = FastAPI(title="ncsde analysis service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = Store(data_dir, workers=workers)
    app.state.store = store

    @app.exception_handler(CsvFormatError)
    async def csv_error(_, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/datasets", status_code=201)
    async def create_dataset(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        if not body.strip():
            raise HTTPException(400, "empty body; expected CSV with a header row")
        entry = store.add_dataset(body)
        return {"id": entry["id"], "n": entry["n"], "m": entry["m"]}

    @app.post("/datasets/simulate", status_code=201)
    async def simulate_dataset(payload: dict):
        try:
            n = int(payload["n"])
            m = int(payload["m"])
            seed = int(payload.get("seed", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"invalid simulation request: {exc}") from None
        design = MixtureDesign(n=n, m=m, seed=seed)
        ts, labels = generate_mixture(design)
        from .spectral import format_matrix_csv

        text = format_matrix_csv(ts.values, header=[f"s{i}" for i in range(m)])
        reference = {
            "labels": labels.tolist(),
            "models": [{"phi": list(mod.phi), "sigma2": mod.sigma2} for mod in design.models],
            "seed": seed,
        }
        entry = store.add_dataset(text, reference=reference)
        return {"id": entry["id"], "n": entry["n"], "m": entry["m"], "simulated": True}

    @app.get("/datasets")
    async def list_datasets():
        items = [
            {k: v for k, v in entry.items() if k != "reference"}
            for entry in store.datasets.values()
        ]
        return {"datasets": sorted(items, key=lambda e: e["created_at"])}

    @app.get("/datasets/{ds_id}/periodogram")
    async def dataset_periodogram(ds_id: str, truncate: int | None = None):
        store.dataset(ds_id)
        return store.periodogram_payload(ds_id, truncate)

    @app.get("/datasets/{ds_id}/elbow")
    async def dataset_elbow(ds_id: str, kmax: int = 10, L: int = 40):
        entry = store.dataset(ds_id)
        if kmax > entry["m"]:
            raise HTTPException(400, f"kmax must not exceed m={entry['m']}")
        if kmax < 3:
            raise HTTPException(400, "kmax must be at least 3")
        pg = periodogram(store.series(ds_id))
        spec = BasisSpec(n_basis=min(L, pg.n_freq), domain=(0.0, float(pg.grid.omegas[-1])))
        basis = eval_basis(pg.grid, spec)
        smooth = smoothed_log_periodograms(pg, basis)
        curve = wss_curve(smooth.T, kmax)
        return {"wss": curve.tolist(), "suggested_k": elbow(curve)}

    @app.post("/fits", status_code=202)
    async def create_fit(payload: dict):
        if "dataset_id" not in payload or "config" not in payload:
            raise HTTPException(422, "body must carry dataset_id and config")
        record = store.submit_fit(payload["dataset_id"], payload["config"])
        return {"job_id": record["id"]}

    @app.get("/fits")
    async def list_fits():
        return {"fits": [job_view(r) for r in store.jobs.values()]}

    @app.get("/fits/{job_id}")
    async def fit_state(job_id: str):
        return job_view(store.job(job_id))

    @app.get("/fits/{job_id}/sdf")
    async def fit_sdf(job_id: str):
        record = store.require_done(job_id)
        return {"frequencies": record["frequencies"], "values": record["sdf"]}

    @app.get("/fits/{job_id}/scores")
    async def fit_scores(job_id: str):
        record = store.require_done(job_id)
        return {"scores": record["result"]["scores"]}

    @app.get("/fits/{job_id}/dendrogram")
    async def fit_dendrogram(job_id: str, k: int | None = None):
        dend = store.dendrogram_for(job_id)
        payload = dend.to_json()
        if k is not None:
            if not 1 <= k <= dend.n_leaves:
                raise HTTPException(400, f"k must be in [1, {dend.n_leaves}]")
            payload["labels"] = cut(dend, k).labels.tolist()
            payload["k"] = k
        return payload

    @app.get("/fits/{job_id}/clusters")
    async def fit_clusters(job_id: str, k: int):
        dend = store.dendrogram_for(job_id)
        if not 1 <= k <= dend.n_leaves:
            raise HTTPException(400, f"k must be in [1, {dend.n_leaves}]")
        return {"k": k, "labels": cut(dend, k).labels.tolist()}

    @app.post("/compare")
    async def compare(payload: dict):
        try:
            ds_id = payload["dataset_id"]
            K = int(payload["K"])
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, f"invalid compare request: {exc}") from None
        entry = store.dataset(ds_id)
        if not 1 <= K <= entry["m"]:
            raise HTTPException(422, f"K must be in [1, m={entry['m']}]")
        return {"methods": run_comparison(store, entry, K)}

    @app.get("/schema")
    async def schema_index():
        return {"schemas": sorted(p.name for p in SCHEMA_DIR.glob("*.json"))}

    @app.get("/schema/{name}")
    async def schema_file(name: str):
        path = SCHEMA_DIR / name
        if not path.is_file() or path.suffix != ".json":
            raise HTTPException(404, f"no schema '{name}'")
        return json.loads(path.read_text())

    return app


def run_comparison(store: Store, entry: dict, K: int) -> list[dict]:
    ts = store.series(entry["id"])
    pg = periodogram(ts)
    spec = BasisSpec(domain=(0.0, float(pg.grid.omegas[-1])))
    basis = eval_basis(pg.grid, spec)
    penalty = penalty_for(spec, "difference", 2)
    config = FitConfig(n_components=K)
    psi = nsde_coefficient_matrix(pg, basis)
    estimates = {
        EstimatorKind.PS: estimate_ps(pg),
        EstimatorKind.SPS: estimate_sps(pg, basis),
        EstimatorKind.TSVD_PS: estimate_tsvd_ps(pg, basis, K),
        EstimatorKind.NSDE: estimate_nsde(pg, basis, psi=psi),
        EstimatorKind.TSVD_NSDE: estimate_tsvd_nsde(pg, basis, K, psi=psi),
        EstimatorKind.NCSDE: estimate_ncsde(pg, basis, penalty, config),
    }

    reference = entry.get("reference")
    q_truth = None
    gold = None
    if reference is not None:
        models = [ArModel(tuple(mod["phi"]), mod["sigma2"]) for mod in reference["models"]]
        gold = np.asarray(reference["labels"])
        truth_cols = np.stack(
            [np.log(true_sdf(models[g - 1], pg.grid)) for g in gold], axis=1
        )
        q_truth = np.linalg.qr(truth_cols)[0]

    out = []
    for kind in EstimatorKind:
        est = estimates[kind]
        if kind is EstimatorKind.NCSDE:
            points = est.coefficients.scores
        else:
            points = est.values.T
        labels = cut(ward_linkage(euclidean_distances(points)), K).labels
        row = {"kind": kind.value, "labels": labels.tolist()}
        if q_truth is not None:
            if est.coefficients is not None:
                angle_arg = basis.values @ est.coefficients.theta
            else:
                angle_arg = est.log_values
            row["angle"] = canonical_angle(q_truth, angle_arg)
            row["ari"] = adjusted_rand_index(gold, labels)
        out.append(row)
    return out
