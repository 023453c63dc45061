"""Heat reservoir models attached to the faces of a lattice.

Sign convention: heats ``Phi_L``/``Phi_R`` are positive when energy leaves
the lattice and enters the reservoir.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple, Optional, Union

import numpy as np

from .lattice import LatticeSpec, SystemState

__all__ = [
    "Langevin", "Extended", "NoseHoover", "GaussianIso", "Isolated", "ReservoirSpec",
    "ConstraintError", "reservoir_from_dict", "reservoir_sites",
    "langevin_terms", "extended_terms", "nose_hoover_terms", "gaussian_zeta",
    "effective_energy", "reservoir_heat_increment",
]


class ConstraintError(RuntimeError):
    """Isokinetic constraint is singular (zero kinetic energy in a thermostated region)."""


def _positive(obj, *names):
    for n in names:
        v = getattr(obj, n)
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{type(obj).__name__}.{n} must be positive, got {v!r}")


def _sites(v):
    return None if v is None else tuple(int(s) for s in v)


class _Reservoir:
    tag = ""
    needs_aux = False

    @property
    def temperatures(self) -> tuple[float, float]:
        return (float(self.T_L), float(self.T_R))

    def to_dict(self) -> dict:
        d = {"tag": self.tag}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    def with_temperatures(self, T_L: float, T_R: float):
        from dataclasses import replace
        return replace(self, T_L=T_L, T_R=T_R)


@dataclass(frozen=True)
class Langevin(_Reservoir):
    """Ornstein-Uhlenbeck friction and noise on the boundary faces."""

    T_L: float
    T_R: float
    lam_L: float = 1.0
    lam_R: float = 1.0
    left_sites: Optional[tuple] = None
    right_sites: Optional[tuple] = None
    tag = "langevin"

    def __post_init__(self):
        _positive(self, "T_L", "T_R")
        if self.lam_L < 0 or self.lam_R < 0:
            raise ValueError("Langevin couplings must be non-negative")
        object.__setattr__(self, "left_sites", _sites(self.left_sites))
        object.__setattr__(self, "right_sites", _sites(self.right_sites))


@dataclass(frozen=True)
class Extended(_Reservoir):
    """One auxiliary force variable per chain end, driven by an OU process."""

    T_L: float
    T_R: float
    lam_L: float = 1.0
    lam_R: float = 1.0
    gamma_L: float = 1.0
    gamma_R: float = 1.0
    tag = "extended"
    needs_aux = True

    def __post_init__(self):
        _positive(self, "T_L", "T_R", "lam_L", "lam_R")
        if self.gamma_L < 0 or self.gamma_R < 0:
            raise ValueError("extended-reservoir gammas must be non-negative")


@dataclass(frozen=True)
class NoseHoover(_Reservoir):
    """Deterministic friction ``zeta`` steering each face towards ``T``.

    ``g_L``/``g_R`` are kinetic degree-of-freedom counts; ``None`` means
    ``nu * |face|``.  ``g = 2`` gives the literal one-particle normalisation.
    """

    T_L: float
    T_R: float
    theta: float = 1.0
    g_L: Optional[float] = None
    g_R: Optional[float] = None
    left_sites: Optional[tuple] = None
    right_sites: Optional[tuple] = None
    tag = "nose_hoover"
    needs_aux = True

    def __post_init__(self):
        _positive(self, "T_L", "T_R", "theta")
        object.__setattr__(self, "left_sites", _sites(self.left_sites))
        object.__setattr__(self, "right_sites", _sites(self.right_sites))


@dataclass(frozen=True)
class GaussianIso(_Reservoir):
    """Isokinetic constraint holding each face at ``g T / 2`` kinetic energy."""

    T_L: float
    T_R: float
    g_L: Optional[float] = None
    g_R: Optional[float] = None
    left_sites: Optional[tuple] = None
    right_sites: Optional[tuple] = None
    tag = "gaussian"

    def __post_init__(self):
        _positive(self, "T_L", "T_R")
        object.__setattr__(self, "left_sites", _sites(self.left_sites))
        object.__setattr__(self, "right_sites", _sites(self.right_sites))


@dataclass(frozen=True)
class Isolated(_Reservoir):
    tag = "none"

    @property
    def temperatures(self):
        return (float("nan"), float("nan"))

    def with_temperatures(self, T_L, T_R):
        return self


ReservoirSpec = Union[Langevin, Extended, NoseHoover, GaussianIso, Isolated]
_TAGS = {c.tag: c for c in (Langevin, Extended, NoseHoover, GaussianIso, Isolated)}


def reservoir_from_dict(d: dict) -> ReservoirSpec:
    d = dict(d)
    tag = d.pop("tag", None)
    if tag not in _TAGS:
        raise ValueError(f"unknown reservoir tag {tag!r}; expected one of {sorted(_TAGS)}")
    for k in ("left_sites", "right_sites"):
        if d.get(k) is not None:
            d[k] = tuple(d[k])
    return _TAGS[tag](**d)


def reservoir_sites(res: ReservoirSpec, lattice: LatticeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Thermostated site sets; defaults are the left face ``i1 = 1`` and right face ``i1 = N_1``."""
    A, N = lattice.cross_section, lattice.n_sites
    if isinstance(res, Isolated):
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if isinstance(res, Extended):
        if lattice.dimension != 1 or lattice.nu != 1:
            raise ValueError("extended reservoirs need a scalar 1D chain")
        return np.array([0]), np.array([N - 1])
    left = np.arange(A) if res.left_sites is None else np.array(res.left_sites)
    right = np.arange(N - A, N) if res.right_sites is None else np.array(res.right_sites)
    for s in (left, right):
        if s.size and (s.min() < 0 or s.max() >= N):
            raise ValueError("reservoir sites outside the lattice")
    if np.intersect1d(left, right).size:
        raise ValueError("left and right reservoir site sets overlap")
    return left.astype(np.int64), right.astype(np.int64)


def _dof(res, lattice: LatticeSpec) -> tuple[float, float]:
    left, right = reservoir_sites(res, lattice)
    g_L = res.g_L if res.g_L is not None else lattice.nu * left.size
    g_R = res.g_R if res.g_R is not None else lattice.nu * right.size
    return float(g_L), float(g_R)


def _require(res, cls):
    if not isinstance(res, cls):
        raise TypeError(f"expected a {cls.__name__} reservoir, got {type(res).__name__}")


def langevin_terms(res: Langevin, lattice: LatticeSpec, state: SystemState):
    """Friction drift ``-lambda p / m`` and noise amplitude ``sqrt(2 lambda T)`` per site."""
    _require(res, Langevin)
    left, right = reservoir_sites(res, lattice)
    lam = np.zeros(lattice.n_sites)
    temp = np.zeros(lattice.n_sites)
    lam[left], temp[left] = res.lam_L, res.T_L
    lam[right], temp[right] = res.lam_R, res.T_R
    drift = -lam[:, None] * state.p / lattice.mass
    return drift, np.sqrt(2.0 * lam * temp)


class ExtendedTerms(NamedTuple):
    force_L: float
    force_R: float
    r_drift: np.ndarray
    r_noise: np.ndarray


def extended_terms(res: Extended, lattice: LatticeSpec, state: SystemState) -> ExtendedTerms:
    """Chain-end forces ``r_L``, ``r_R`` and the OU drift/noise of the auxiliaries.

    The right auxiliary relaxes towards ``lambda_R^2 q_N``.
    """
    _require(res, Extended)
    reservoir_sites(res, lattice)
    r = state.aux if state.aux is not None else np.zeros(2)
    q_end = np.array([state.q[0, 0], state.q[-1, 0]])
    lam2 = np.array([res.lam_L, res.lam_R]) ** 2
    gam = np.array([res.gamma_L, res.gamma_R])
    drift = -gam * (r - lam2 * q_end)
    noise = np.sqrt(2.0 * gam * lam2 * np.array(res.temperatures))
    return ExtendedTerms(float(r[0]), float(r[1]), drift, noise)


def effective_energy(res: Extended, lattice: LatticeSpec, state: SystemState) -> float:
    """Chain energy whose Gibbs weight is the marginal of the extended-reservoir Gibbs state.

    Integrating ``r^2 / (2 lambda^2) - q r`` out of ``exp(-G / T)`` leaves
    ``H - lambda_L^2 q_1^2 / 2 - lambda_R^2 q_N^2 / 2``.
    """
    from .lattice import total_energy
    _require(res, Extended)
    return total_energy(lattice, state) - 0.5 * res.lam_L ** 2 * float(state.q[0, 0]) ** 2 \
        - 0.5 * res.lam_R ** 2 * float(state.q[-1, 0]) ** 2


def generalized_energy(res: Extended, lattice: LatticeSpec, state: SystemState) -> float:
    from .lattice import total_energy
    _require(res, Extended)
    r = state.aux
    return total_energy(lattice, state) \
        + r[0] ** 2 / (2 * res.lam_L ** 2) - float(state.q[0, 0]) * r[0] \
        + r[1] ** 2 / (2 * res.lam_R ** 2) - float(state.q[-1, 0]) * r[1]


def nose_hoover_terms(res: NoseHoover, lattice: LatticeSpec, state: SystemState):
    """Momentum drift ``-zeta p / m`` on each face and the feedback rates ``d zeta / dt``."""
    _require(res, NoseHoover)
    left, right = reservoir_sites(res, lattice)
    g = _dof(res, lattice)
    zeta = state.aux if state.aux is not None else np.zeros(2)
    drift = np.zeros_like(state.p)
    zdot = np.zeros(2)
    for a, sites in enumerate((left, right)):
        drift[sites] = -zeta[a] * state.p[sites] / lattice.mass
        kin = float(np.sum(state.p[sites] ** 2)) / (2.0 * lattice.mass)
        zdot[a] = (2.0 * kin / (g[a] * res.temperatures[a]) - 1.0) / res.theta ** 2
    return drift, zdot


def gaussian_zeta(res: GaussianIso, lattice: LatticeSpec, state: SystemState,
                  force: np.ndarray) -> tuple[float, float]:
    """Multipliers keeping each face's kinetic energy constant: ``sum p.F / sum p^2``."""
    _require(res, GaussianIso)
    out = []
    for sites in reservoir_sites(res, lattice):
        pp = float(np.sum(state.p[sites] ** 2))
        if not pp > 0:
            raise ConstraintError("isokinetic constraint singular: zero kinetic energy in region")
        out.append(float(np.sum(state.p[sites] * force[sites])) / pp)
    return out[0], out[1]


def reservoir_heat_increment(res: ReservoirSpec, before: SystemState, after: SystemState,
                             record) -> tuple[float, float]:
    """Energy handed to the left/right reservoir during one step.

    ``record`` is the step record from :func:`nesslab.dynamics.advance`,
    whose thermostat sub-steps were bookkept as minus their energy change.
    """
    if isinstance(res, Isolated):
        return 0.0, 0.0
    if after.step != before.step + record.steps:
        raise ValueError("record does not belong to this pair of states")
    return float(record.heat[0]), float(record.heat[1])
