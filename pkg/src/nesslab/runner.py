"""Study dispatch, replica fan-out, checkpointing and result files.

Every numeric result passes through a JSON round trip before it is
aggregated, so a run resumed from its checkpoint produces byte-identical
files.  Wall-clock figures go to ``timing.json`` only.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, config_hash, dump_config
from .dynamics import SimulationError, simulate
from .thermostats import ConstraintError

__all__ = ["run_experiment", "RESULT_SCHEMA", "NumericalFailure"]

RESULT_SCHEMA = "nesslab.result/1"
CHECKPOINT_SCHEMA = "nesslab.checkpoint/1"
_NUMERICAL = (SimulationError, ConstraintError, ArithmeticError, RuntimeError)


class NumericalFailure(RuntimeError):
    """At least one replica failed numerically; the record lists which."""


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _roundtrip(x):
    return json.loads(json.dumps(_jsonable(x), sort_keys=True))


def _write_json(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    os.replace(tmp, path)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------------------
# replica workers (top level so they pickle)

def _run_replica(payload):
    cfg_json, index, seed = payload
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    try:
        r = simulate(cfg.lattice_spec(), cfg.reservoir_spec(), cfg.integrator_spec(seed),
                     n_blocks=cfg.params.n_blocks)
    except _NUMERICAL as exc:
        return {"index": index, "seed": seed, "status": "failed", "error": str(exc)}, None
    summary = {name: s.summary() for name, s in sorted(r.series.items())}
    T, Te = r.profile()
    pm, pe = r.plane_means()
    meta = dict(r.metadata)
    wall = meta.pop("wall_seconds")
    rec = {"index": index, "seed": seed, "status": "ok", "observables": summary,
           "profile": {"mean": T, "stderr": Te}, "plane_flux": {"mean": pm, "stderr": pe},
           "metadata": meta}
    series = {name: (s.times, s.values) for name, s in r.series.items()}
    return _roundtrip(rec), (series, wall)


def _sweep_task(payload):
    from .transport import ness_run
    index, args = payload
    try:
        out = ness_run(args)
    except _NUMERICAL as exc:
        return {"index": index, "status": "failed", "error": str(exc),
                "length": args[0].length, "seed": args[2].seed}, None
    wall = out["metadata"].pop("wall_seconds")
    out.update(index=index, status="ok")
    return _roundtrip(out), (None, wall)


# ---------------------------------------------------------------------------

class _Checkpoint:
    def __init__(self, out: Path, chash: str, resume: bool):
        self.path = out / "checkpoint.json"
        self.done: dict = {}
        if resume and self.path.exists():
            d = json.loads(self.path.read_text())
            if d.get("schema") == CHECKPOINT_SCHEMA and d.get("config_hash") == chash:
                self.done = {int(k): v for k, v in d["completed"].items()}
        self.chash = chash

    def add(self, index: int, rec: dict) -> None:
        self.done[index] = rec
        _write_json(self.path, {"schema": CHECKPOINT_SCHEMA, "config_hash": self.chash,
                                "completed": {str(k): v for k, v in sorted(self.done.items())}})


def _fan_out(fn, payloads, jobs: int, ckpt: _Checkpoint, on_result=None) -> tuple[list, float]:
    """Run the payloads not yet in the checkpoint; returns records sorted by index."""
    todo = [p for p in payloads if _index(p) not in ckpt.done]
    wall = 0.0
    if jobs <= 1 or len(todo) <= 1:
        results = (fn(p) for p in todo)
        for rec, extra in results:
            wall += _consume(rec, extra, ckpt, on_result)
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(todo))) as ex:
            futs = [ex.submit(fn, p) for p in todo]
            for f in as_completed(futs):
                rec, extra = f.result()
                wall += _consume(rec, extra, ckpt, on_result)
    return [ckpt.done[i] for i in sorted(ckpt.done)], wall


def _index(p):
    return p[1] if isinstance(p[1], int) else p[0]


def _consume(rec, extra, ckpt, on_result):
    if on_result is not None and extra is not None:
        on_result(rec, extra)
    ckpt.add(rec["index"], rec)
    return extra[1] if extra is not None else 0.0


def _combine(records: list) -> dict:
    """Replica-averaged observables; errors combine as sqrt(sum se^2) / R."""
    ok = [r for r in records if r["status"] == "ok"]
    if not ok:
        return {}
    out = {}
    for name in ok[0]["observables"]:
        ms = [r["observables"][name]["mean"] for r in ok]
        es = [r["observables"][name]["stderr"] for r in ok]
        if any(v is None for v in ms + es):
            out[name] = {"mean": None, "stderr": None}
            continue
        out[name] = {"mean": float(np.mean(ms)),
                     "stderr": float(math.sqrt(sum(e * e for e in es)) / len(ok)),
                     "blocks": ok[0]["observables"][name]["blocks"], "replicas": len(ok)}
    T = np.array([r["profile"]["mean"] for r in ok])
    Te = np.array([r["profile"]["stderr"] for r in ok])
    out["profile"] = {"mean": T.mean(axis=0).tolist(),
                      "stderr": (np.sqrt((Te ** 2).sum(axis=0)) / len(ok)).tolist()}
    return out


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None, jobs: Optional[int] = None,
                   replicas: Optional[int] = None, resume: bool = True) -> dict:
    """Execute the configured study, write its files and return the result record."""
    if replicas is not None:
        cfg = cfg.model_copy(update={"params": cfg.params.model_copy(update={"replicas": replicas})})
        cfg = ExperimentConfig.model_validate(cfg.model_dump())
    if jobs is None:
        jobs = int(os.environ.get("NESSLAB_JOBS", "1"))
    out = Path(out_dir or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    (out / "config.json").write_text(dump_config(cfg) + "\n")
    ckpt = _Checkpoint(out, chash, resume)
    t0 = time.perf_counter()
    study = cfg.study
    record = {"schema": RESULT_SCHEMA, "study": study, "config_hash": chash,
              "config": cfg.model_dump(mode="json"), "observables": {}, "tables": {}, "replicas": []}
    if study == "run":
        record.update(_study_run(cfg, out, jobs, ckpt))
    elif study == "sweep":
        record.update(_study_sweep(cfg, out, jobs, ckpt))
    elif study == "oracle":
        record.update(_study_oracle(cfg, out))
    elif study == "gk":
        record.update(_single(cfg, out, ckpt, _study_gk))
    elif study == "ldf":
        record.update(_single(cfg, out, ckpt, _study_ldf))
    elif study == "kmp":
        record.update(_single(cfg, out, ckpt, _study_kmp))
    failed = [r for r in record["replicas"] if r.get("status") != "ok"]
    record["status"] = "failed" if failed else "ok"
    _write_json(out / "summary.json", record)
    _write_json(out / "timing.json", {"wall_seconds": time.perf_counter() - t0, "jobs": jobs})
    return record


def _replica_seeds(cfg, n):
    from .transport import _replica_seed
    return [_replica_seed(cfg.seed, cfg.lattice.sides[0], r) if n > 1 else cfg.seed for r in range(n)]


def _study_run(cfg, out: Path, jobs: int, ckpt) -> dict:
    n = cfg.params.replicas
    cfg_json = cfg.model_dump_json()
    payloads = [(cfg_json, i, s) for i, s in enumerate(_replica_seeds(cfg, n))]

    def write_series(rec, extra):
        series, _ = extra
        for name, (t, v) in sorted(series.items()):
            _write_csv(out / f"{name}_r{rec['index']:03d}.csv",
                       ["time [k_B=1 units]", f"{name} [energy/time, k_B=1]" if name != "energy"
                        else "energy [k_B=1 units]"], zip(t, v))

    records, _ = _fan_out(_run_replica, payloads, jobs, ckpt, write_series)
    obs = _combine(records)
    if obs:
        prof = obs["profile"]
        _write_csv(out / "profile.csv", ["plane", "kinetic_temperature [k_B=1]", "stderr"],
                   [(j, m, e) for j, (m, e) in enumerate(zip(prof["mean"], prof["stderr"]))])
    return {"observables": obs, "replicas": records}


def _study_sweep(cfg, out: Path, jobs: int, ckpt) -> dict:
    from .transport import aggregate_scan, scan_tasks
    lat, res = cfg.lattice_spec(), cfg.reservoir_spec()
    p = cfg.params
    tasks = scan_tasks(lat, res, p.lengths, cfg.integrator_spec(), p.replicas, p.n_blocks)
    records, _ = _fan_out(_sweep_task, list(enumerate(tasks)), jobs, ckpt)
    ok = [r for r in records if r["status"] == "ok"]
    lengths = sorted({r["length"] for r in ok})
    table = {"rows": [], "alpha": None}
    if len(lengths) >= 3:
        tr = aggregate_scan(lat, res, lengths, ok, p.replicas, p.exclude_smallest)
        table = _roundtrip(tr.to_dict())
    _write_csv(out / "kappa_scaling.csv",
               ["length", "kappa_L [k_B=1 units]", "stderr", "flux [energy/time]", "replicas", "flagged"],
               [(r["length"], r["kappa"], r["stderr"], r["flux"], r["replicas"], int(r["flagged"]))
                for r in table["rows"]])
    return {"tables": {"kappa_scaling": table}, "replicas": records,
            "observables": {"alpha": {"mean": table.get("alpha"), "stderr": table.get("alpha_stderr")}}}


def _study_oracle(cfg, out: Path) -> dict:
    from .harmonic import build_linear_model, exact_observables, stationary_covariance
    lat, res = cfg.lattice_spec(), cfg.reservoir_spec()
    model = build_linear_model(lat, res)
    cov = stationary_covariance(model)
    ex = exact_observables(model, cov)
    obs = {"flux": {"mean": ex.flux, "stderr": 0.0, "blocks": 0, "replicas": 0},
           "profile": {"mean": ex.profile.tolist(), "stderr": [0.0] * ex.profile.size}}
    tables = {"lyapunov": {"relative_residual": cov.residual, "spectral_abscissa": cov.spectral_abscissa},
              "kappa": ex.kappa}
    if cfg.params.lengths:
        from .transport import conductivity_scan
        tr = conductivity_scan(lat, res, cfg.params.lengths, oracle=True)
        tables["kappa_scaling"] = tr.to_dict()
        _write_csv(out / "kappa_scaling.csv", ["length", "kappa_L [k_B=1 units]", "stderr",
                                               "flux [energy/time]", "replicas", "flagged"],
                   [(r["length"], r["kappa"], r["stderr"], r["flux"], r["replicas"], 0) for r in tr.rows])
    _write_csv(out / "profile.csv", ["plane", "kinetic_temperature [k_B=1]", "stderr"],
               [(j, m, 0.0) for j, m in enumerate(ex.profile)])
    return _roundtrip({"observables": obs, "tables": tables,
                       "replicas": [{"index": 0, "status": "ok", "mode": "oracle"}]})


def _single(cfg, out: Path, ckpt, fn) -> dict:
    if 0 in ckpt.done:
        rec = ckpt.done[0]
    else:
        try:
            rec = _roundtrip(dict(fn(cfg, out), index=0, status="ok"))
        except _NUMERICAL as exc:
            rec = {"index": 0, "status": "failed", "error": str(exc)}
        ckpt.add(0, rec)
    body = {k: v for k, v in rec.items() if k not in ("index", "status", "error")}
    return {"observables": body.get("observables", {}), "tables": body.get("tables", {}),
            "replicas": [{k: rec[k] for k in ("index", "status", "error") if k in rec}]}


def _study_gk(cfg, out: Path) -> dict:
    from .transport import green_kubo
    p = cfg.params
    lat = cfg.lattice_spec()
    T = p.T if p.T is not None else 1.0
    r = green_kubo(lat, T, p.t_max, p.total_time, dt=cfg.integrator.dt, replicas=p.replicas,
                   segments=p.segments, sample_every=p.sample_every, seed=cfg.seed, jobs=1,
                   ensemble=p.ensemble)
    _write_csv(out / "gk_integral.csv", ["time [k_B=1 units]", "kappa_GK(t) [k_B=1 units]", "stderr"],
               zip(r.times, r.integral, r.integral_stderr))
    return {"observables": {"kappa_gk": {"mean": r.kappa, "stderr": r.kappa_stderr}},
            "tables": {"green_kubo": r.to_dict()}}


def _study_ldf(cfg, out: Path) -> dict:
    from .transport import entropy_ldf
    p = cfg.params
    edges = np.linspace(-p.p_max, p.p_max, p.p_bins + 1)
    r = entropy_ldf(cfg.lattice_spec(), cfg.reservoir_spec(), p.segment_time, p.n_segments, edges,
                    dt=cfg.integrator.dt, seed=cfg.seed, normalized=p.normalized, min_count=p.min_count)
    _write_csv(out / "rate_function.csv", ["p [entropy/time]", "count", "e(p) [1/time]"],
               [(c, int(n), e if np.isfinite(e) else "") for c, n, e in zip(r.p_centers, r.counts, r.rate)])
    return {"observables": {"ft_slope": {"mean": r.slope, "stderr": r.slope_stderr},
                            "sigma_t": {"mean": r.mean_sigma_t, "stderr": r.mean_sigma_t_stderr}},
            "tables": {"rate_function": r.to_dict()}}


def _study_kmp(cfg, out: Path) -> dict:
    from .kmp import kmp_initial, kmp_profile_and_flux, simulate_kmp
    k = cfg.params.kmp
    st = kmp_initial(k.n, k.T_L, k.T_R, seed=cfg.seed, gamma_ex=k.gamma_ex, gamma_b=k.gamma_b)
    ser = simulate_kmp(st, k.window, k.windows, burn_time=k.burn_time)
    r = kmp_profile_and_flux(ser, cfg.params.n_blocks)
    _write_csv(out / "kmp_profile.csv", ["site", "mean_energy [k_B=1]", "stderr"],
               [(i, m, e) for i, (m, e) in enumerate(zip(r.profile, r.profile_stderr))])
    return {"observables": {"flux": {"mean": r.flux, "stderr": r.flux_stderr},
                            "kappa": {"mean": r.kappa, "stderr": r.kappa_stderr}},
            "tables": {"kmp": r.to_dict()}}
