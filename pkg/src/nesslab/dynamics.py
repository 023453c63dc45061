"""Time integration of the lattice coupled to its reservoirs.

One step is the symmetric splitting

    O(dt/2)  kick(dt/2)  drift(dt)  kick(dt/2)  O(dt/2)

where ``O`` is the thermostat sub-step: an exact Ornstein-Uhlenbeck update
for Langevin baths, an exact exponential rescale plus ``zeta`` half-update
for Nose-Hoover, a half-kick by ``r`` plus exact OU auxiliary update for
extended reservoirs.  The Gaussian isokinetic constraint projects the face
momenta back onto the constant-kinetic-energy shell after each kick.

Heat is the energy change produced by the thermostat sub-steps alone, with
the sign flipped so that positive values enter the reservoir.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import backend
from ._rng import key_from_seed
from .lattice import LatticeSpec, SystemState, is_quadratic, sample_gibbs, total_energy
from .observables import ObservableSeries, entropy_production
from .thermostats import (ConstraintError, Extended, GaussianIso, Isolated, Langevin,
                          NoseHoover, ReservoirSpec, _dof, reservoir_sites)

__all__ = [
    "IntegratorSpec", "SimulationError", "StepRecord", "SimulationResult",
    "default_dt", "max_frequency", "prepare", "step", "advance", "simulate", "initial_state",
]

MODES = {"none": 0, "langevin": 1, "extended": 2, "nose_hoover": 3, "gaussian": 4}


class SimulationError(RuntimeError):
    """Numerical failure: non-finite state or singular constraint."""

    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class IntegratorSpec:
    """Step size, run length and sampling of one trajectory.

    ``dt=None`` picks ``0.05 / omega_max`` from the harmonic part of the
    potentials.  With ``average=True`` each sample is the mean over its
    ``stride`` steps (time-integrated observables); otherwise it is the
    instantaneous value at the end of the stride.
    """

    dt: Optional[float] = None
    total_steps: int = 100_000
    burn_in: int = 10_000
    stride: int = 10
    seed: int = 0
    scheme: str = "obabo"
    average: bool = True

    def __post_init__(self):
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.total_steps < 1 or not 0 <= self.burn_in < self.total_steps:
            raise ValueError("need 0 <= burn_in < total_steps")
        if self.scheme != "obabo":
            raise ValueError(f"unknown scheme {self.scheme!r}; only 'obabo' is implemented")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)


def max_frequency(lattice: LatticeSpec) -> float:
    """Gershgorin bound on the largest harmonic frequency (0 for purely anharmonic models)."""
    top = lattice.topology
    c2, _, cj = lattice.pair.coefficients
    deg = np.bincount(top.bond_i, minlength=top.n_sites)
    inner = top.bond_j >= 0
    deg = deg + np.bincount(top.bond_j[inner], minlength=top.n_sites)
    k_bond = 2.0 * c2 + cj
    row = 2.0 * deg * k_bond + 2.0 * top.u2
    return math.sqrt(float(row.max()) / lattice.mass) if row.size else 0.0


def default_dt(lattice: LatticeSpec) -> float:
    w = max_frequency(lattice)
    return 0.05 / w if w > 0 else 0.01


class StepRecord(NamedTuple):
    heat: np.ndarray  # energy handed to (left, right) reservoirs
    steps: int


@dataclass
class KernelModel:
    """Flat arrays consumed by the compiled (or fallback) integrator."""

    lattice: LatticeSpec
    reservoir: ReservoirSpec
    dt: float
    mode: int
    ou_c: np.ndarray
    ou_s: np.ndarray
    group: np.ndarray
    res: np.ndarray
    kin_norm: float
    coeffs: tuple
    left: np.ndarray
    right: np.ndarray


def prepare(lattice: LatticeSpec, reservoir: ReservoirSpec, dt: float) -> KernelModel:
    n = lattice.n_sites
    m = lattice.mass
    left, right = reservoir_sites(reservoir, lattice)
    group = np.full(n, -1, np.int64)
    group[left] = 0
    group[right] = 1
    ou_c = np.ones(n)
    ou_s = np.zeros(n)
    res = np.zeros(8)
    if isinstance(reservoir, Langevin):
        for sites, lam, T in ((left, reservoir.lam_L, reservoir.T_L), (right, reservoir.lam_R, reservoir.T_R)):
            c = math.exp(-lam * 0.5 * dt / m)
            ou_c[sites] = c
            ou_s[sites] = math.sqrt(max(1.0 - c * c, 0.0) * m * T)
    elif isinstance(reservoir, Extended):
        r = reservoir
        res[:] = [r.lam_L, r.lam_R, r.gamma_L, r.gamma_R, r.T_L, r.T_R, left[0], right[0]]
    elif isinstance(reservoir, NoseHoover):
        g = _dof(reservoir, lattice)
        res[:5] = [reservoir.theta, g[0], g[1], reservoir.T_L, reservoir.T_R]
    elif isinstance(reservoir, GaussianIso):
        # with one momentum component the constraint freezes p entirely
        if min(left.size, right.size) * lattice.nu < 2:
            raise ValueError("isokinetic regions need at least two momentum components each")
        # the constraint removes one degree of freedom per region: holding
        # K = (g - 1) T / 2 makes the rest of the system canonical at T
        g = _dof(reservoir, lattice)
        if min(g) <= 1:
            raise ValueError("isokinetic degree-of-freedom counts must exceed 1")
        res[:2] = [0.5 * (g[0] - 1) * reservoir.T_L, 0.5 * (g[1] - 1) * reservoir.T_R]
    elif not isinstance(reservoir, Isolated):
        raise TypeError(f"unsupported reservoir {type(reservoir).__name__}")
    return KernelModel(
        lattice, reservoir, dt, MODES[reservoir.tag], ou_c, ou_s, group, res,
        1.0 / (m * lattice.nu * lattice.cross_section), lattice.pair.coefficients, left, right,
    )


def initial_state(lattice: LatticeSpec, reservoir: ReservoirSpec, seed: int,
                  T: Optional[float] = None) -> SystemState:
    """Gibbs state at the mean reservoir temperature (or ``T``) with matching auxiliaries."""
    if T is None:
        T = 1.0 if isinstance(reservoir, Isolated) else 0.5 * sum(reservoir.temperatures)
    rng = np.random.default_rng([int(seed) & (2 ** 63 - 1), 0x5EED])
    state = sample_gibbs(lattice, T, rng)
    if isinstance(reservoir, Extended):
        state.aux = np.array([reservoir.lam_L ** 2 * state.q[0, 0], reservoir.lam_R ** 2 * state.q[-1, 0]])
    elif isinstance(reservoir, NoseHoover):
        state.aux = np.zeros(2)
    elif isinstance(reservoir, GaussianIso):
        _project_isokinetic(prepare(lattice, reservoir, 1.0), state)
    return state


def _project_isokinetic(model: KernelModel, state: SystemState) -> None:
    for sites, target in ((model.left, model.res[0]), (model.right, model.res[1])):
        k = float(np.sum(state.p[sites] ** 2)) / (2 * model.lattice.mass)
        if not k > 0:
            raise ConstraintError("isokinetic constraint singular: zero kinetic energy in region")
        state.p[sites] *= math.sqrt(target / k)


def _check_state(model: KernelModel, state: SystemState) -> None:
    lat = model.lattice
    if state.q.shape != (lat.n_sites, lat.nu):
        raise ValueError(f"state shape {state.q.shape} does not match lattice ({lat.n_sites}, {lat.nu})")
    if model.reservoir.needs_aux and (state.aux is None or state.aux.shape != (2,)):
        raise ValueError(f"{model.reservoir.tag} reservoir needs a 2-component aux array")


class _Buffers(NamedTuple):
    flux: np.ndarray
    kin: np.ndarray
    heat: np.ndarray
    energy: np.ndarray


def _run(model: KernelModel, state: SystemState, seed: int, n_samples: int, stride: int,
         average: bool) -> _Buffers:
    """Advance ``state`` in place by ``n_samples * stride`` steps."""
    _check_state(model, state)
    lat = model.lattice
    top = lat.topology
    c2, c4, cj = model.coeffs
    kern = backend.kernel()
    f = np.zeros_like(state.q)
    bf = np.zeros((top.bond_i.size, lat.nu))
    kern.forces_into(state.q, f, bf, top.bond_i, top.bond_j, c2, c4, cj, top.u2, top.u4)
    aux = state.aux if state.aux is not None else np.zeros(2)
    out = _Buffers(np.zeros((n_samples, max(top.n_planes, 1))), np.zeros((n_samples, lat.length)),
                   np.zeros((n_samples, 2)), np.zeros(n_samples))
    status, done = kern.integrate(
        state.q, state.p, f, aux, top.bond_i, top.bond_j, top.bond_plane, c2, c4, cj,
        top.u2, top.u4, top.site_plane, lat.mass, model.mode, model.ou_c, model.ou_s,
        model.group, model.res, key_from_seed(seed), state.step, n_samples, stride,
        model.dt, average, model.kin_norm, out.flux, out.kin, out.heat, out.energy, bf)
    state.step += int(done)
    state.t += int(done) * model.dt
    if status == -1:
        raise SimulationError(f"non-finite state (blow-up) near step {state.step}; reduce dt", state.step)
    if status == -2:
        raise ConstraintError(f"isokinetic constraint singular at step {state.step}")
    return out


def advance(state: SystemState, lattice: LatticeSpec, reservoir: ReservoirSpec, dt: float,
            n_steps: int, seed: int) -> tuple[SystemState, StepRecord]:
    """Return the state ``n_steps`` later and the heat delivered to each reservoir."""
    new = state.copy()
    if n_steps == 0:
        return new, StepRecord(np.zeros(2), 0)
    out = _run(prepare(lattice, reservoir, dt), new, seed, 1, int(n_steps), False)
    return new, StepRecord(out.heat[0].copy(), int(n_steps))


def step(state: SystemState, lattice: LatticeSpec, reservoir: ReservoirSpec,
         integrator: IntegratorSpec, rng=None) -> SystemState:
    """One splitting step.  The noise is a function of ``(integrator.seed, state.step)``.

    ``rng`` is accepted for interface symmetry and ignored: the counter-based
    stream makes the step deterministic given the state and seed.
    """
    dt = integrator.dt if integrator.dt is not None else default_dt(lattice)
    return advance(state, lattice, reservoir, dt, 1, integrator.seed)[0]


@dataclass
class SimulationResult:
    """Sampled scalar series, per-plane micro-block means and run metadata.

    Per-plane flux and kinetic temperature are kept as means over
    ``micro_blocks`` equal consecutive stretches of the run, which is all
    the block statistics need and keeps long runs on large lattices small.
    """

    series: dict
    flux: np.ndarray  # (samples,) plane-averaged current
    heat: np.ndarray  # (samples, 2) heat per sample interval
    energy: np.ndarray
    times: np.ndarray
    sample_dt: float
    plane_blocks: np.ndarray  # (micro_blocks, planes)
    kinetic_blocks: np.ndarray  # (micro_blocks, L)
    final_state: SystemState
    metadata: dict = field(default_factory=dict)
    n_blocks: int = 32

    @property
    def heat_rate(self) -> np.ndarray:
        """Reservoir heat currents ``(Phi_L, Phi_R)`` per sample."""
        return self.heat / self.sample_dt

    def _stats(self, blocks: np.ndarray):
        from .observables import block_stats
        st = [block_stats(blocks[:, j], self.n_blocks) for j in range(blocks.shape[1])]
        return np.array([s.mean for s in st]), np.array([s.stderr for s in st])

    def profile(self) -> tuple[np.ndarray, np.ndarray]:
        """Kinetic temperature per plane with block-averaged standard errors."""
        return self._stats(self.kinetic_blocks)

    def plane_means(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean current through each plane with standard errors."""
        return self._stats(self.plane_blocks)

    def summary(self) -> dict:
        out = {name: s.summary() for name, s in sorted(self.series.items())}
        T, dT = self.profile()
        out["profile"] = {"mean": [float(x) for x in T], "stderr": [float(x) for x in dT]}
        return out


def _check_linear_stability(lattice: LatticeSpec, reservoir: Extended) -> None:
    # the auxiliaries soften the end sites by lambda^2; without enough pinning the
    # linear dynamics has a growing mode and no stationary state
    from .harmonic import build_linear_model
    A = build_linear_model(lattice, reservoir).A
    if np.max(np.linalg.eigvals(A).real) > 1e-12 * max(np.abs(A).max(), 1.0):
        raise ValueError("extended reservoir makes this linear lattice unstable "
                         "(end pinning must exceed lambda^2)")


def simulate(lattice: LatticeSpec, reservoir: ReservoirSpec, integrator: IntegratorSpec,
             state: Optional[SystemState] = None, n_blocks: int = 32,
             chunk_samples: int = 1 << 16) -> SimulationResult:
    """Burn in, then sample flux, temperatures, heats and entropy production.

    The number of samples is rounded down to a multiple of ``4 * n_blocks``;
    the leftover steps extend the burn-in so ``total_steps`` is honoured.
    """
    if not lattice.confining and lattice.pair.kind != "rotator":
        raise ValueError("non-confining model without compact configuration space")
    if isinstance(reservoir, Extended) and is_quadratic(lattice):
        _check_linear_stability(lattice, reservoir)
    dt = integrator.dt if integrator.dt is not None else default_dt(lattice)
    model = prepare(lattice, reservoir, dt)
    st = initial_state(lattice, reservoir, integrator.seed) if state is None else state.copy()
    n_micro = 4 * n_blocks
    per_micro = (integrator.total_steps - integrator.burn_in) // integrator.stride // n_micro
    if per_micro < 1:
        raise ValueError(f"sampling window holds fewer than {n_micro} samples")
    n_samples = per_micro * n_micro
    burn = integrator.total_steps - n_samples * integrator.stride
    t0 = time.perf_counter()
    if burn:
        _run(model, st, integrator.seed, 1, burn, False)
    planes = lattice.topology.n_planes
    flux = np.empty(n_samples)
    heat = np.empty((n_samples, 2))
    energy = np.empty(n_samples)
    plane_sum = np.zeros((n_micro, max(planes, 1)))
    kin_sum = np.zeros((n_micro, lattice.length))
    micro_per_chunk = max(1, chunk_samples // per_micro)
    done = 0
    while done < n_samples:
        n = min(micro_per_chunk * per_micro, n_samples - done)
        out = _run(model, st, integrator.seed, n, integrator.stride, integrator.average)
        sl = slice(done, done + n)
        flux[sl] = out.flux[:, :planes].mean(axis=1) if planes else 0.0
        heat[sl] = out.heat
        energy[sl] = out.energy
        m0 = done // per_micro
        k = n // per_micro
        plane_sum[m0:m0 + k] = out.flux.reshape(k, per_micro, -1).mean(axis=1)
        kin_sum[m0:m0 + k] = out.kin.reshape(k, per_micro, -1).mean(axis=1)
        done += n
    wall = time.perf_counter() - t0
    sample_dt = integrator.stride * dt
    times = st.t - sample_dt * np.arange(n_samples - 1, -1, -1)
    series = {}
    if planes:
        series["flux"] = ObservableSeries.from_values("flux", times, flux, n_blocks)
    series["energy"] = ObservableSeries.from_values("energy", times, energy, n_blocks)
    if not isinstance(reservoir, Isolated):
        rate = heat / sample_dt
        series["phi_L"] = ObservableSeries.from_values("phi_L", times, rate[:, 0], n_blocks)
        series["phi_R"] = ObservableSeries.from_values("phi_R", times, rate[:, 1], n_blocks)
        T_L, T_R = reservoir.temperatures
        series["sigma"] = ObservableSeries.from_values(
            "sigma", times, entropy_production(rate[:, 0], rate[:, 1], T_L, T_R), n_blocks)
    meta = {
        "seed": int(integrator.seed), "dt": dt, "dt_rule": "0.05/omega_max" if integrator.dt is None else "user",
        "omega_max": max_frequency(lattice), "burn_in": burn,
        "total_steps": integrator.total_steps, "stride": integrator.stride,
        "samples": n_samples, "backend": backend.name(), "wall_seconds": wall,
    }
    return SimulationResult(series, flux, heat, energy, times, sample_dt,
                            plane_sum[:, :planes], kin_sum, st, meta, n_blocks)


def sample_chunks(lattice: LatticeSpec, reservoir: ReservoirSpec, dt: float, state: SystemState,
                  seed: int, n_samples: int, stride: int, average: bool = False,
                  chunk_samples: int = 1 << 16):
    """Advance ``state`` in place, yielding raw kernel buffers chunk by chunk."""
    model = prepare(lattice, reservoir, dt)
    done = 0
    while done < n_samples:
        n = min(chunk_samples, n_samples - done)
        yield _run(model, state, seed, n, stride, average)
        done += n


def trajectory(state: SystemState, lattice: LatticeSpec, reservoir: ReservoirSpec, dt: float,
               n_steps: int, seed: int = 0) -> list[SystemState]:
    """States at every step (for continuity checks and small diagnostics)."""
    out = [state.copy()]
    cur = state.copy()
    model = prepare(lattice, reservoir, dt)
    for _ in range(n_steps):
        _run(model, cur, seed, 1, 1, False)
        out.append(cur.copy())
    return out
