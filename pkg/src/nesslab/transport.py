"""Conductivity scaling, Green-Kubo conductivity, linear response and entropy-production fluctuations."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import IntegratorSpec, default_dt, initial_state, sample_chunks, simulate
from .lattice import LatticeSpec, SystemState, sample_gibbs
from .observables import block_stats, integrated_autocorrelation
from .thermostats import Isolated, Langevin, ReservoirSpec

__all__ = [
    "TransportResult", "GreenKuboResult", "LinearResponseResult", "LdfResult",
    "conductivity_scan", "scan_tasks", "aggregate_scan", "fit_exponent", "green_kubo", "linear_response_check",
    "entropy_ldf", "ft_slope_extrapolation", "ness_run", "map_jobs",
]


def map_jobs(fn: Callable, items: Sequence, jobs: Optional[int] = None) -> list:
    """Ordered map over a bounded process pool (serial when ``jobs <= 1``)."""
    if jobs is None:
        jobs = int(os.environ.get("NESSLAB_JOBS", "1"))
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# nonequilibrium runs

def ness_run(args) -> dict:
    """One NESS simulation reduced to JSON-ready numbers (picklable in and out)."""
    lattice, reservoir, integrator, n_blocks = args
    r = simulate(lattice, reservoir, integrator, n_blocks=n_blocks)
    f = r.series["flux"]
    pm, pe = r.plane_means()
    T, Te = r.profile()
    out = {
        "seed": integrator.seed, "length": lattice.length, "flux": f.mean, "flux_stderr": f.stderr,
        "flux_flagged": bool(f.flagged), "plane_flux": pm.tolist(), "plane_stderr": pe.tolist(),
        "profile": T.tolist(), "profile_stderr": Te.tolist(), "metadata": r.metadata,
    }
    for name in ("phi_L", "phi_R", "sigma"):
        s = r.series.get(name)
        if s is not None:
            out[name] = s.mean
            out[name + "_stderr"] = s.stderr
    return out


def _plane_disagreement(run: dict) -> float:
    """Largest pairwise plane-flux difference in units of its combined stderr."""
    m, e = run["plane_flux"], run["plane_stderr"]
    if m.size < 2:
        return 0.0
    d = np.abs(m[:, None] - m[None, :])
    s = np.sqrt(e[:, None] ** 2 + e[None, :] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, d / s, 0.0)
    return float(z.max())


@dataclass
class TransportResult:
    """Conductivity table and fitted exponent ``kappa_L ~ L^alpha``."""

    rows: list
    alpha: float
    alpha_stderr: float
    alpha_ci: tuple
    excluded: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "alpha": self.alpha, "alpha_stderr": self.alpha_stderr,
                "alpha_ci": list(self.alpha_ci), "excluded": self.excluded, "metadata": self.metadata}


def fit_exponent(lengths, kappas, stderrs=None, replica_kappas=None) -> tuple[float, float, tuple]:
    """Unweighted least-squares slope of ``log kappa`` against ``log L``.

    The error combines the regression residual error with either a
    delete-one-replica jackknife (``replica_kappas``: lengths x replicas)
    or linear propagation of the per-length standard errors.
    """
    x = np.log(np.asarray(lengths, float))
    y = np.log(np.asarray(kappas, float))
    if x.size < 3:
        raise ValueError("exponent fit needs at least three lengths")
    xc = x - x.mean()
    w = xc / np.sum(xc * xc)
    alpha = float(w @ y)
    resid = y - (y.mean() + alpha * xc)
    se_fit = math.sqrt(float(resid @ resid) / (x.size - 2) / np.sum(xc * xc))
    se_stat = 0.0
    if replica_kappas is not None and np.asarray(replica_kappas).shape[1] >= 2:
        kr = np.asarray(replica_kappas, float)
        R = kr.shape[1]
        jack = []
        for r in range(R):
            keep = np.delete(kr, r, axis=1).mean(axis=1)
            jack.append(float(w @ np.log(keep)))
        jack = np.array(jack)
        se_stat = math.sqrt((R - 1) / R * float(np.sum((jack - jack.mean()) ** 2)))
    elif stderrs is not None:
        rel = np.asarray(stderrs, float) / np.asarray(kappas, float)
        se_stat = math.sqrt(float(np.sum((w * rel) ** 2)))
    se = math.hypot(se_fit, se_stat)
    return alpha, se, (alpha - 1.96 * se, alpha + 1.96 * se)


def conductivity_scan(lattice: LatticeSpec, reservoir: ReservoirSpec, lengths: Sequence[int],
                      integrator: Optional[IntegratorSpec] = None, replicas: int = 1,
                      oracle: bool = False, jobs: Optional[int] = None, n_blocks: int = 32,
                      exclude_smallest: bool = False, steps_for: Optional[Callable[[int], int]] = None
                      ) -> TransportResult:
    """``kappa_L = (mu(Phi) / A) L / dT`` over ``lengths`` and the fitted exponent.

    ``lattice`` is the template whose first side is replaced by each length.
    With ``oracle=True`` the exact harmonic solution replaces simulation.
    ``steps_for(L)`` optionally overrides the total step count per length.
    Runs whose plane fluxes disagree by more than 5 standard errors are
    treated as non-stationary, flagged and left out of the fit.
    """
    lengths = sorted(int(L) for L in lengths)
    if len(lengths) < 3:
        raise ValueError("need at least three lengths")
    T_L, T_R = reservoir.temperatures
    dT = T_L - T_R
    Tm = 0.5 * (T_L + T_R)
    if dT == 0 or abs(dT) / Tm > 0.5:
        raise ValueError("need 0 < |dT| / T <= 0.5")
    rows, excluded = [], []
    if oracle:
        from .harmonic import oracle as exact
        for L in lengths:
            o = exact(lattice.with_length(L), reservoir)
            rows.append({"length": L, "kappa": o.kappa, "stderr": 0.0, "flux": o.flux,
                         "flux_stderr": 0.0, "replicas": 0, "flagged": False})
        alpha, se, ci = fit_exponent(lengths, [r["kappa"] for r in rows])
        return TransportResult(rows, alpha, se, ci, [], {"mode": "oracle"})
    if integrator is None:
        integrator = IntegratorSpec()
    tasks = scan_tasks(lattice, reservoir, lengths, integrator, replicas, n_blocks, steps_for)
    runs = map_jobs(ness_run, tasks, jobs)
    return aggregate_scan(lattice, reservoir, lengths, runs, replicas, exclude_smallest,
                          {"integrator": integrator.to_dict()})


def scan_tasks(lattice, reservoir, lengths, integrator, replicas, n_blocks=32, steps_for=None) -> list:
    """Argument tuples for :func:`ness_run`, ordered by length then replica."""
    tasks = []
    for L in sorted(int(x) for x in lengths):
        lat = lattice.with_length(L)
        integ = integrator
        if steps_for is not None:
            total = int(steps_for(L))
            integ = replace(integ, total_steps=total, burn_in=min(integ.burn_in, total // 2))
        for r in range(replicas):
            tasks.append((lat, reservoir, replace(integ, seed=_replica_seed(integrator.seed, L, r)), n_blocks))
    return tasks


def aggregate_scan(lattice, reservoir, lengths, runs, replicas, exclude_smallest=False,
                   meta: Optional[dict] = None) -> TransportResult:
    """Combine per-replica runs into the conductivity table and exponent fit."""
    lengths = sorted(int(L) for L in lengths)
    T_L, T_R = reservoir.temperatures
    dT = T_L - T_R
    rows, excluded = [], []
    runs = [dict(x, plane_flux=np.asarray(x["plane_flux"], float),
                 plane_stderr=np.asarray(x["plane_stderr"], float)) for x in runs]
    rep_kappa = []
    for L in lengths:
        rs = [x for x in runs if x["length"] == L]
        A = lattice.with_length(L).cross_section
        good = [x for x in rs if _plane_disagreement(x) <= 5.0]
        flagged = len(good) < len(rs)
        use = good if good else rs
        ks = np.array([x["flux"] / A * L / dT for x in use])
        ses = np.array([x["flux_stderr"] / A * L / abs(dT) for x in use])
        k = float(ks.mean())
        se = float(math.sqrt(np.sum(ses ** 2)) / ks.size)
        if ks.size > 1:
            se = max(se, float(ks.std(ddof=1) / math.sqrt(ks.size)))
        rows.append({"length": L, "kappa": k, "stderr": se,
                     "flux": float(np.mean([x["flux"] for x in use])),
                     "flux_stderr": se * A * abs(dT) / L, "replicas": len(use), "flagged": flagged,
                     "seeds": [int(x["seed"]) for x in use]})
        if not good:
            excluded.append(L)
        rep_kappa.append(ks if ks.size == replicas else np.resize(ks, replicas))
    fit = [r for r in rows if r["length"] not in excluded]
    if exclude_smallest and len(fit) > 3:
        excluded.append(fit[0]["length"])
        fit = fit[1:]
    keep = [lengths.index(r["length"]) for r in fit]
    alpha, se, ci = fit_exponent([r["length"] for r in fit], [r["kappa"] for r in fit],
                                 [r["stderr"] for r in fit],
                                 np.array(rep_kappa)[keep] if replicas > 1 else None)
    info = {"mode": "simulation", "lattice": lattice.to_dict(), "reservoir": reservoir.to_dict(),
            "replicas": replicas}
    info.update(meta or {})
    return TransportResult(rows, alpha, se, ci, excluded, info)


def _replica_seed(seed: int, length: int, replica: int) -> int:
    from ._rng import splitmix64
    return splitmix64((int(seed) * 1_000_003 + length * 7919 + replica) & ((1 << 64) - 1)) >> 1


# ---------------------------------------------------------------------------
# Green-Kubo

@dataclass
class GreenKuboResult:
    kappa: float  # plateau value (nan when no plateau)
    kappa_stderr: float
    plateau: bool
    t_max: float
    times: np.ndarray
    integral: np.ndarray  # kappa(t) running estimate
    integral_stderr: np.ndarray
    c0: float  # autocorrelation at zero lag
    c0_stderr: float
    variance: float  # directly computed stationary variance of the flux
    variance_stderr: float
    diagnostic: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "kappa_stderr": self.kappa_stderr, "plateau": self.plateau,
                "t_max": self.t_max, "c0": self.c0, "c0_stderr": self.c0_stderr,
                "variance": self.variance, "variance_stderr": self.variance_stderr,
                "diagnostic": self.diagnostic}


def _matched_state(lattice: LatticeSpec, T: float, seed: int) -> SystemState:
    """Gibbs sample with zero total momentum (when conserved) and kinetic temperature exactly ``T``."""
    rng = np.random.default_rng([int(seed) & (2 ** 63 - 1), 0x6B])
    st = sample_gibbs(lattice, T, rng)
    dof = st.p.size
    if lattice.translation_invariant:
        st.p -= st.p.mean(axis=0)
        dof -= lattice.nu
    kin = float(np.sum(st.p ** 2)) / lattice.mass
    st.p *= math.sqrt(dof * T / kin)
    return st


def _gk_replica(args):
    lattice, T, dt, t_max, n_seg, seg_time, burn_time, sample_every, seed, ensemble = args
    if ensemble == "matched":
        st = _matched_state(lattice, T, seed)
    else:
        st = sample_gibbs(lattice, T, np.random.default_rng([int(seed) & (2 ** 63 - 1), 0x6B]))
    truncate = ensemble == "canonical"
    stride = max(1, int(round(sample_every / dt)))
    h = stride * dt
    list(sample_chunks(lattice, Isolated(), dt, st, seed, 1, max(1, int(burn_time / dt))))
    per_seg = int(round(seg_time / h))
    n_lag = int(round(t_max / h))
    planes = lattice.topology.n_planes
    total = per_seg * n_seg
    x = np.empty(total)
    i = 0
    for out in sample_chunks(lattice, Isolated(), dt, st, seed, total, stride, average=False):
        n = out.flux.shape[0]
        x[i:i + n] = out.flux[:, :planes].mean(axis=1)
        i += n
    segs = []
    var = []
    for s in range(n_seg):
        y = x[s * per_seg:(s + 1) * per_seg]
        t, integ = integrated_autocorrelation(y, h, n_lag, subtract_mean=truncate)
        segs.append(integ)
        var.append(float(np.var(y) if truncate else np.mean(y * y)))
    return np.array(segs), np.array(var), h, float(np.var(x) if truncate else np.mean(x ** 2))


def green_kubo(lattice: LatticeSpec, T: float, t_max: float, total_time: float,
               dt: Optional[float] = None, replicas: int = 1, segments: int = 16,
               sample_every: float = 0.1, burn_time: float = 100.0, seed: int = 0,
               jobs: Optional[int] = None, plateau_tol: float = 0.1,
               ensemble: str = "matched") -> GreenKuboResult:
    """``kappa_GK = (P / (A T^2)) int_0^t_max <Phi(0) Phi(t)> dt`` along isolated trajectories.

    ``Phi`` is the current averaged over the ``P`` longitudinal planes, so
    the prefactor reproduces the usual ``<J J>/(P A T^2)`` with ``J`` the
    total current.  Initial states are Gibbs samples at ``T`` with
    momenta rescaled to kinetic temperature exactly ``T`` and, for
    momentum-conserving lattices, zero total momentum.  Each trajectory is
    cut into ``segments`` pieces; their spread gives the error bars.  The
    mean flux vanishes in equilibrium, so correlations are not truncated.

    ``ensemble="canonical"`` is the cross-check route: unrescaled Gibbs
    initial states, so the energy varies between replicas, and correlations
    truncated by each segment's mean.  Use several replicas with it.

    A plateau is declared when the running integral changes over the
    second half of ``[0, t_max]`` by less than ``plateau_tol`` of its value
    or by less than two standard errors.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    if lattice.translation_invariant and lattice.ends != "periodic":
        raise ValueError("Green-Kubo needs a periodic or pinned lattice")
    if ensemble not in ("matched", "canonical"):
        raise ValueError(f"unknown ensemble {ensemble!r}")
    dt = default_dt(lattice) if dt is None else dt
    planes = lattice.topology.n_planes
    pref = planes / (lattice.cross_section * T * T)
    if t_max == 0:
        return GreenKuboResult(0.0, 0.0, False, 0.0, np.zeros(1), np.zeros(1), np.zeros(1),
                               float("nan"), float("nan"), float("nan"), float("nan"))
    seg_time = total_time / (replicas * segments)
    if seg_time < 2 * t_max:
        raise ValueError("segments must be at least twice t_max long")
    tasks = [(lattice, T, dt, t_max, segments, seg_time, burn_time, sample_every,
              _replica_seed(seed, lattice.length, r), ensemble) for r in range(replicas)]
    res = map_jobs(_gk_replica, tasks, jobs)
    curves = np.concatenate([r[0] for r in res]) * pref
    var_seg = np.concatenate([r[1] for r in res])
    h = res[0][2]
    n = curves.shape[0]
    mean = curves.mean(axis=0)
    err = curves.std(axis=0, ddof=1) / math.sqrt(n)
    times = np.arange(mean.size) * h
    # zero-lag correlation as the average over segments of the mean square
    c0 = float(var_seg.mean())
    c0_err = float(var_seg.std(ddof=1) / math.sqrt(n))
    half = mean.size // 2
    tail = mean[half:]
    tail_err = err[half:]
    change = float(tail[-1] - tail[0])
    level = float(tail.mean())
    plateau = bool(abs(change) <= max(plateau_tol * abs(level), 2.0 * float(tail_err.max())))
    plateau = plateau and level > 0
    k = level if plateau else float("nan")
    k_err = float(tail_err.mean()) if plateau else float("nan")
    diag = {"ensemble": ensemble, "second_half_change": change, "second_half_level": level,
            "final_value": float(mean[-1]), "final_stderr": float(err[-1]),
            "prefactor": pref, "segments": n, "sample_spacing": h, "dt": dt}
    # variance of the pooled trajectory, errors from the segment spread
    return GreenKuboResult(k, k_err, plateau, float(t_max), times, mean, err, c0, c0_err,
                           float(np.mean([r[3] for r in res])), c0_err, diag)


# ---------------------------------------------------------------------------
# linear response

@dataclass
class LinearResponseResult:
    dTs: list
    fluxes: list
    flux_stderr: list
    slope: float  # fitted d mu(Phi) / d dT through the origin
    slope_stderr: float
    gk_slope: float  # D / T^2 with D from the equal-temperature run
    gk_slope_stderr: float
    nonlinear: bool
    dropped: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_origin(x, y, e):
    x, y, e = (np.asarray(v, float) for v in (x, y, e))
    w = 1.0 / np.maximum(e, 1e-300) ** 2
    s = float(np.sum(w * x * y) / np.sum(w * x * x))
    return s, float(1.0 / math.sqrt(np.sum(w * x * x)))


def _quadratic_flag(x, y, e) -> bool:
    x, y, e = (np.asarray(v, float) for v in (x, y, e))
    if x.size < 3:
        return False
    X = np.stack([x, x * x], axis=1) / e[:, None]
    coef, *_ = np.linalg.lstsq(X, y / e, rcond=None)
    cov = np.linalg.inv(X.T @ X)
    return bool(abs(coef[1]) > 2.0 * math.sqrt(cov[1, 1]))


def linear_response_check(lattice: LatticeSpec, reservoir: ReservoirSpec, T: float,
                          dTs: Sequence[float], integrator: IntegratorSpec,
                          equilibrium_integrator: Optional[IntegratorSpec] = None,
                          n_blocks: int = 32, jobs: Optional[int] = None) -> LinearResponseResult:
    """Compare ``d mu(Phi) / d dT`` with ``(1/T^2) int <Phi S_t Phi> dt`` at equal temperatures.

    The integral ``D`` is the long-time variance rate of the time-integrated
    plane-averaged current, estimated from the block variance of the
    equal-temperature run: ``D = stderr^2 * duration / 2``.
    """
    dTs = [float(d) for d in dTs]
    mags = [abs(d) for d in dTs if d != 0]
    if not mags or max(mags) < 4 * min(mags):
        raise ValueError("dT values must span at least a factor 4")
    tasks = [(lattice, reservoir.with_temperatures(T + d / 2, T - d / 2),
              replace(integrator, seed=_replica_seed(integrator.seed, lattice.length, k)), n_blocks)
             for k, d in enumerate(dTs)]
    eq = equilibrium_integrator or integrator
    tasks.append((lattice, reservoir.with_temperatures(T, T), eq, n_blocks))
    runs = map_jobs(ness_run, tasks, jobs)
    fl = [r["flux"] for r in runs[:-1]]
    fe = [r["flux_stderr"] for r in runs[:-1]]
    x, y, e = list(dTs), list(fl), list(fe)
    dropped = []
    nonlinear = _quadratic_flag(x, y, e)
    if nonlinear:
        k = int(np.argmax(np.abs(x)))
        dropped.append(x[k])
        for v in (x, y, e):
            v.pop(k)
    slope, slope_err = _fit_origin(x, y, e)
    eqr = runs[-1]
    meta = eqr["metadata"]
    duration = meta["samples"] * meta["stride"] * meta["dt"]
    D = eqr["flux_stderr"] ** 2 * duration / 2.0
    # stderr of a block variance with n_blocks blocks
    D_err = D * math.sqrt(2.0 / (n_blocks - 1))
    return LinearResponseResult(dTs, fl, fe, slope, slope_err, D / T ** 2, D_err / T ** 2,
                                nonlinear, dropped)


# ---------------------------------------------------------------------------
# entropy-production large deviations

@dataclass
class LdfResult:
    segment_time: float
    p_centers: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    rate: np.ndarray  # e(p) = -(1/t) log density; nan where no counts
    odd_p: np.ndarray
    odd_part: np.ndarray  # e(p) - e(-p) on bins resolvable at both signs
    slope: float
    slope_stderr: float
    mean_sigma_t: float
    mean_sigma_t_stderr: float
    sigma_mean: float  # mean entropy production of the whole run
    n_segments: int
    normalized: bool = False

    def to_dict(self) -> dict:
        return {"segment_time": self.segment_time, "slope": self.slope,
                "slope_stderr": self.slope_stderr, "mean_sigma_t": self.mean_sigma_t,
                "mean_sigma_t_stderr": self.mean_sigma_t_stderr, "sigma_mean": self.sigma_mean,
                "n_segments": self.n_segments, "normalized": self.normalized,
                "table": [{"p": float(p), "count": int(c), "e": None if not np.isfinite(r) else float(r)}
                          for p, c, r in zip(self.p_centers, self.counts, self.rate)]}


def segment_entropy(lattice: LatticeSpec, reservoir: ReservoirSpec, segment_time: float,
                    n_segments: int, dt: float, seed: int = 0, burn_time: float = 100.0,
                    samples_per_segment: int = 1, state: Optional[SystemState] = None) -> np.ndarray:
    """Time-averaged entropy production ``sigma_t`` over consecutive segments."""
    steps = int(round(segment_time / dt))
    if steps % samples_per_segment:
        raise ValueError("segment steps must be divisible by samples_per_segment")
    stride = steps // samples_per_segment
    st = initial_state(lattice, reservoir, seed) if state is None else state.copy()
    list(sample_chunks(lattice, reservoir, dt, st, seed, 1, max(1, int(burn_time / dt))))
    T_L, T_R = reservoir.temperatures
    out = np.empty(n_segments)
    i = 0
    chunk = max(1, (1 << 16) // samples_per_segment) * samples_per_segment
    for buf in sample_chunks(lattice, reservoir, dt, st, seed, n_segments * samples_per_segment,
                             stride, chunk_samples=chunk):
        s = (buf.heat[:, 0] / T_L + buf.heat[:, 1] / T_R).reshape(-1, samples_per_segment).sum(axis=1)
        out[i:i + s.size] = s / (steps * dt)
        i += s.size
    return out


def ldf_from_samples(sig: np.ndarray, segment_time: float, p_edges, min_count: int = 100,
                     normalized: bool = False, sigma_mean: Optional[float] = None) -> LdfResult:
    """Histogram ``sigma_t`` samples on ``p_edges`` and fit the odd part of the rate function.

    ``p_edges`` must be symmetric about zero so that bins pair up as
    ``p`` and ``-p``.  Bins holding fewer than ``min_count`` segments are
    excluded from the fit.  The slope is fitted through the origin with
    weights from the Poisson errors of the counts.
    """
    sig = np.asarray(sig, float)
    mu = float(sig.mean()) if sigma_mean is None else float(sigma_mean)
    x = sig / mu if normalized else sig
    edges = np.asarray(p_edges, float)
    if not np.allclose(edges, -edges[::-1]):
        raise ValueError("p grid must be symmetric about zero")
    counts, _ = np.histogram(x, edges)
    widths = np.diff(edges)
    density = counts / (sig.size * widths)
    with np.errstate(divide="ignore"):
        rate = np.where(counts > 0, -np.log(density) / segment_time, np.nan)
    centers = 0.5 * (edges[1:] + edges[:-1])
    nb = centers.size
    ps, odd, err = [], [], []
    for k in range(nb // 2, nb):
        j = nb - 1 - k
        if centers[k] <= 0:
            continue
        if counts[k] >= min_count and counts[j] >= min_count:
            ps.append(centers[k])
            odd.append(rate[k] - rate[j])
            err.append(math.sqrt(1.0 / counts[k] + 1.0 / counts[j]) / segment_time)
    ps, odd, err = np.array(ps), np.array(odd), np.array(err)
    if ps.size:
        slope, slope_err = _fit_origin(ps, odd, err)
    else:
        slope, slope_err = float("nan"), float("nan")
    st = block_stats(sig, 16) if sig.size >= 32 else None
    return LdfResult(segment_time, centers, counts, density, rate, ps, odd, slope, slope_err,
                     float(sig.mean()), st.stderr if st else float("nan"), mu, sig.size, normalized)


def entropy_ldf(lattice: LatticeSpec, reservoir: ReservoirSpec, segment_time: float,
                n_segments: int, p_edges, dt: Optional[float] = None, seed: int = 0,
                normalized: bool = False, min_count: int = 100, burn_time: float = 100.0) -> LdfResult:
    """Rate-function table of ``sigma_t`` and the slope of its odd part."""
    if n_segments < 100:
        raise ValueError("need at least 100 segments")
    dt = default_dt(lattice) if dt is None else dt
    sig = segment_entropy(lattice, reservoir, segment_time, n_segments, dt, seed, burn_time)
    return ldf_from_samples(sig, segment_time, p_edges, min_count, normalized)


def ft_slope_extrapolation(results: Sequence[LdfResult]) -> tuple[float, float]:
    """Extrapolate the odd-part slope to ``t -> infinity``.

    At finite ``t`` the boundary term ``Delta H / T`` broadens the
    distribution of ``sigma_t`` by an amount of order ``1/t``, so the
    inverse slope is linear in ``1/t``; a weighted fit in ``1/t`` returns the
    intercept's inverse and its standard error.
    """
    t = np.array([r.segment_time for r in results], float)
    s = np.array([r.slope for r in results], float)
    e = np.array([r.slope_stderr for r in results], float)
    ok = np.isfinite(s) & np.isfinite(e) & (s != 0)
    if ok.sum() < 2:
        raise ValueError("need slopes at two or more segment lengths")
    y = 1.0 / s[ok]
    ye = e[ok] / s[ok] ** 2
    X = np.stack([np.ones(ok.sum()), 1.0 / t[ok]], axis=1)
    W = 1.0 / ye ** 2
    cov = np.linalg.inv(X.T @ (W[:, None] * X))
    coef = cov @ (X.T @ (W * y))
    a, a_err = coef[0], math.sqrt(cov[0, 0])
    return float(1.0 / a), float(a_err / a ** 2)
