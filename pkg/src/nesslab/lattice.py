"""Oscillator lattices: geometry, potentials, energies and forces.

Sites are flattened with the longitudinal index slowest, so site
``i1 * A + t`` sits in plane ``i1`` at transverse position ``t``.
Displacements and momenta are stored as ``(N, nu)`` arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional, Union

import numpy as np

__all__ = [
    "Harmonic", "FPUBeta", "Rotator", "PinnedQuadratic", "QuarticOnsite",
    "LatticeSpec", "SystemState", "Topology",
    "potential_from_dict", "total_energy", "potential_energy", "forces",
    "local_energy", "local_energies", "sample_gibbs",
]


class _Potential:
    """Polynomial-plus-cosine potential ``c2 r^2 + c4 r^4 + J sum(1 - cos x)``."""

    kind = ""
    confining = True

    @property
    def coefficients(self) -> tuple[float, float, float]:
        raise NotImplementedError

    def value(self, x):
        """Energy of displacement vectors ``x`` (last axis = components)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        if scalar:
            x = x[None]
        c2, c4, cj = self.coefficients
        r2 = np.sum(x * x, axis=-1)
        out = c2 * r2 + c4 * r2 * r2
        if cj:
            out = out + cj * np.sum(1.0 - np.cos(x), axis=-1)
        return float(out) if scalar else out

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        if scalar:
            x = x[None]
        c2, c4, cj = self.coefficients
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        out = (2.0 * c2 + 4.0 * c4 * r2) * x
        if cj:
            out = out + cj * np.sin(x)
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        d.update({k: float(v) for k, v in self.__dict__.items()})
        return d


@dataclass(frozen=True)
class Harmonic(_Potential):
    """Pair spring ``V(x) = k x^2 / 2``."""

    k: float = 1.0
    kind = "harmonic"

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("harmonic stiffness k must be positive")

    @property
    def coefficients(self):
        return (0.5 * self.k, 0.0, 0.0)


@dataclass(frozen=True)
class FPUBeta(_Potential):
    """Pair potential ``V(x) = k2 x^2 + k4 x^4``."""

    k2: float = 1.0
    k4: float = 1.0
    kind = "fpu_beta"

    def __post_init__(self):
        if self.k2 < 0 or self.k4 < 0 or (self.k2 == 0 and self.k4 == 0):
            raise ValueError("FPU coefficients must be non-negative and not both zero")

    @property
    def coefficients(self):
        return (float(self.k2), float(self.k4), 0.0)


@dataclass(frozen=True)
class Rotator(_Potential):
    """Bounded pair potential ``V(x) = J (1 - cos x)``."""

    J: float = 1.0
    kind = "rotator"
    confining = False

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError("rotator coupling J must be positive")

    @property
    def coefficients(self):
        return (0.0, 0.0, float(self.J))


@dataclass(frozen=True)
class PinnedQuadratic(_Potential):
    """On-site pinning ``U(q) = omega2 q^2 / 2``."""

    omega2: float = 1.0
    kind = "pinned_quadratic"

    def __post_init__(self):
        if not self.omega2 > 0:
            raise ValueError("omega2 must be positive")

    @property
    def coefficients(self):
        return (0.5 * self.omega2, 0.0, 0.0)


@dataclass(frozen=True)
class QuarticOnsite(_Potential):
    """On-site ``U(q) = a2 q^2 / 2 + a4 q^4 / 4`` (phi-4 form)."""

    a2: float = 0.0
    a4: float = 1.0
    kind = "quartic_onsite"

    def __post_init__(self):
        if self.a2 < 0 or not self.a4 > 0:
            raise ValueError("quartic on-site needs a2 >= 0 and a4 > 0")

    @property
    def coefficients(self):
        return (0.5 * self.a2, 0.25 * self.a4, 0.0)


PairPotential = Union[Harmonic, FPUBeta, Rotator]
OnsitePotential = Union[PinnedQuadratic, QuarticOnsite]

_PAIR_KINDS = {"harmonic": Harmonic, "fpu_beta": FPUBeta, "rotator": Rotator}
_ONSITE_KINDS = {"pinned_quadratic": PinnedQuadratic, "quartic_onsite": QuarticOnsite}


def potential_from_dict(d: dict, role: str = "pair"):
    kinds = _PAIR_KINDS if role == "pair" else _ONSITE_KINDS
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in kinds:
        raise ValueError(f"unknown {role} potential kind {kind!r}; expected one of {sorted(kinds)}")
    return kinds[kind](**d)


@dataclass(frozen=True)
class Topology:
    n_sites: int
    length: int
    cross_section: int
    bond_i: np.ndarray
    bond_j: np.ndarray  # -1 marks a clamped phantom wall site at q = 0
    bond_plane: np.ndarray  # longitudinal plane index, -1 for transverse and wall bonds
    n_planes: int
    site_plane: np.ndarray
    u2: np.ndarray
    u4: np.ndarray


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and interactions of a crystal of oscillators.

    ``sides`` is ``(N_1,)`` for a chain or ``(N_1, N_2)`` for a slab; heat
    flows along the first axis.  ``ends`` is one of ``"free"``, ``"fixed"``
    (phantom sites clamped at zero bonded to both faces) or ``"periodic"``.
    ``onsite_sites`` restricts the pinning potential to a subset of sites.
    """

    sides: tuple
    pair: PairPotential = field(default_factory=Harmonic)
    onsite: Optional[OnsitePotential] = None
    onsite_sites: Optional[tuple] = None
    mass: float = 1.0
    nu: int = 1
    transverse: str = "free"
    ends: str = "free"

    def __post_init__(self):
        object.__setattr__(self, "sides", tuple(int(s) for s in self.sides))
        if len(self.sides) not in (1, 2):
            raise ValueError("only d = 1 or d = 2 lattices are supported")
        if any(s < 1 for s in self.sides):
            raise ValueError("all sides must be >= 1")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if self.nu < 1:
            raise ValueError("nu must be >= 1")
        if self.transverse not in ("free", "periodic"):
            raise ValueError("transverse must be 'free' or 'periodic'")
        if self.ends not in ("free", "fixed", "periodic"):
            raise ValueError("ends must be 'free', 'fixed' or 'periodic'")
        if self.onsite_sites is not None:
            sites = tuple(int(s) for s in self.onsite_sites)
            if any(s < 0 or s >= self.n_sites for s in sites):
                raise ValueError("onsite_sites out of range")
            object.__setattr__(self, "onsite_sites", sites)

    @property
    def dimension(self) -> int:
        return len(self.sides)

    @property
    def length(self) -> int:
        return self.sides[0]

    @property
    def cross_section(self) -> int:
        return int(np.prod(self.sides[1:], dtype=int)) if len(self.sides) > 1 else 1

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.sides, dtype=int))

    @property
    def translation_invariant(self) -> bool:
        return self.onsite is None and self.ends != "fixed"

    @property
    def confining(self) -> bool:
        return self.pair.confining or self.onsite is not None

    def with_length(self, length: int) -> "LatticeSpec":
        return replace(self, sides=(int(length),) + self.sides[1:])

    @cached_property
    def topology(self) -> Topology:
        L, A, N = self.length, self.cross_section, self.n_sites
        idx = np.arange(N).reshape(L, A)
        bi, bj, bp = [], [], []
        for i1 in range(L - 1):
            bi.append(idx[i1]); bj.append(idx[i1 + 1]); bp.append(np.full(A, i1))
        if self.ends == "periodic" and L > 2:
            bi.append(idx[L - 1]); bj.append(idx[0]); bp.append(np.full(A, L - 1))
        if self.ends == "fixed":
            bi.append(idx[0]); bj.append(np.full(A, -1)); bp.append(np.full(A, -1))
            bi.append(idx[L - 1]); bj.append(np.full(A, -1)); bp.append(np.full(A, -1))
        if self.dimension == 2:
            n2 = self.sides[1]
            for t in range(n2 - 1):
                bi.append(idx[:, t]); bj.append(idx[:, t + 1]); bp.append(np.full(L, -1))
            if self.transverse == "periodic" and n2 > 2:
                bi.append(idx[:, n2 - 1]); bj.append(idx[:, 0]); bp.append(np.full(L, -1))
        cat = (lambda xs: np.concatenate(xs).astype(np.int64)) if bi else (lambda xs: np.zeros(0, np.int64))
        if self.ends == "periodic" and L > 2:
            n_planes = L
        else:
            n_planes = max(L - 1, 0)
        u2 = np.zeros(N)
        u4 = np.zeros(N)
        if self.onsite is not None:
            c2, c4, _ = self.onsite.coefficients
            mask = np.zeros(N, bool)
            mask[list(self.onsite_sites) if self.onsite_sites is not None else slice(None)] = True
            u2[mask] = c2
            u4[mask] = c4
        return Topology(
            n_sites=N, length=L, cross_section=A,
            bond_i=cat(bi), bond_j=cat(bj), bond_plane=cat(bp), n_planes=n_planes,
            site_plane=np.repeat(np.arange(L), A).astype(np.int64), u2=u2, u4=u4,
        )

    def to_dict(self) -> dict:
        return {
            "sides": list(self.sides),
            "pair": self.pair.to_dict(),
            "onsite": None if self.onsite is None else self.onsite.to_dict(),
            "onsite_sites": None if self.onsite_sites is None else list(self.onsite_sites),
            "mass": float(self.mass),
            "nu": int(self.nu),
            "transverse": self.transverse,
            "ends": self.ends,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeSpec":
        d = dict(d)
        d["pair"] = potential_from_dict(d.get("pair", {"kind": "harmonic"}), "pair")
        if d.get("onsite") is not None:
            d["onsite"] = potential_from_dict(d["onsite"], "onsite")
        if d.get("onsite_sites") is not None:
            d["onsite_sites"] = tuple(d["onsite_sites"])
        d["sides"] = tuple(d["sides"])
        return cls(**d)


@dataclass
class SystemState:
    """Phase-space point plus thermostat auxiliaries and clock.

    ``aux`` holds ``(r_L, r_R)`` for extended reservoirs or
    ``(zeta_L, zeta_R)`` for Nose-Hoover; ``step`` is the integer step
    counter that positions the noise stream.
    """

    q: np.ndarray
    p: np.ndarray
    aux: Optional[np.ndarray] = None
    t: float = 0.0
    step: int = 0

    def __post_init__(self):
        self.q = np.ascontiguousarray(np.asarray(self.q, dtype=float))
        self.p = np.ascontiguousarray(np.asarray(self.p, dtype=float))
        if self.q.ndim == 1:
            self.q = self.q[:, None].copy()
        if self.p.ndim == 1:
            self.p = self.p[:, None].copy()
        if self.q.shape != self.p.shape:
            raise ValueError(f"q shape {self.q.shape} != p shape {self.p.shape}")
        if self.aux is not None:
            self.aux = np.ascontiguousarray(np.asarray(self.aux, dtype=float))

    @classmethod
    def zeros(cls, spec: LatticeSpec, aux: bool = False) -> "SystemState":
        shape = (spec.n_sites, spec.nu)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(2) if aux else None)

    def copy(self) -> "SystemState":
        return SystemState(self.q.copy(), self.p.copy(),
                           None if self.aux is None else self.aux.copy(), self.t, self.step)

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(), "p": self.p.tolist(),
            "aux": None if self.aux is None else self.aux.tolist(),
            "t": self.t, "step": self.step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemState":
        return cls(np.array(d["q"], float), np.array(d["p"], float),
                   None if d.get("aux") is None else np.array(d["aux"], float),
                   float(d["t"]), int(d["step"]))


def _check(spec: LatticeSpec, arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1 and spec.nu == 1:
        arr = arr[:, None]
    if arr.shape != (spec.n_sites, spec.nu):
        raise ValueError(f"{name} has shape {arr.shape}, lattice needs {(spec.n_sites, spec.nu)}")
    return arr


def _bond_vectors(spec: LatticeSpec, q: np.ndarray) -> np.ndarray:
    top = spec.topology
    qj = np.where((top.bond_j >= 0)[:, None], q[np.maximum(top.bond_j, 0)], 0.0)
    return q[top.bond_i] - qj


def _onsite_values(spec: LatticeSpec, q: np.ndarray) -> np.ndarray:
    top = spec.topology
    r2 = np.sum(q * q, axis=1)
    return top.u2 * r2 + top.u4 * r2 * r2


def potential_energy(spec: LatticeSpec, q) -> float:
    q = _check(spec, q, "Q")
    return float(np.sum(spec.pair.value(_bond_vectors(spec, q))) + np.sum(_onsite_values(spec, q)))


def total_energy(spec: LatticeSpec, state: SystemState) -> float:
    """Kinetic plus pair plus on-site energy, each bond counted once."""
    p = _check(spec, state.p, "P")
    return float(np.sum(p * p) / (2.0 * spec.mass)) + potential_energy(spec, state.q)


def forces(spec: LatticeSpec, q) -> np.ndarray:
    """Return ``-grad V(Q)`` per site, shape ``(N, nu)``."""
    q = _check(spec, q, "Q")
    top = spec.topology
    f = -spec.pair.grad(_bond_vectors(spec, q))
    out = np.zeros_like(q)
    np.add.at(out, top.bond_i, f)
    inner = top.bond_j >= 0
    np.add.at(out, top.bond_j[inner], -f[inner])
    r2 = np.sum(q * q, axis=1, keepdims=True)
    out -= (2.0 * top.u2[:, None] + 4.0 * top.u4[:, None] * r2) * q
    return out


def local_energies(spec: LatticeSpec, state: SystemState) -> np.ndarray:
    """Per-site energies; interior bonds split half/half, wall bonds go whole to their site."""
    q = _check(spec, state.q, "Q")
    p = _check(spec, state.p, "P")
    top = spec.topology
    out = np.sum(p * p, axis=1) / (2.0 * spec.mass) + _onsite_values(spec, q)
    vb = spec.pair.value(_bond_vectors(spec, q))
    inner = top.bond_j >= 0
    w = np.where(inner, 0.5, 1.0)
    np.add.at(out, top.bond_i, w * vb)
    np.add.at(out, top.bond_j[inner], 0.5 * vb[inner])
    return out


def local_energy(spec: LatticeSpec, state: SystemState, site: int) -> float:
    if not 0 <= site < spec.n_sites:
        raise IndexError(f"site {site} outside lattice of {spec.n_sites} sites")
    return float(local_energies(spec, state)[site])


# ---------------------------------------------------------------------------
# Gibbs sampling

def _force_matrix(spec: LatticeSpec) -> np.ndarray:
    """Harmonic stiffness matrix K with V(Q) = Q.K.Q/2 for quadratic models (nu = 1 block)."""
    top = spec.topology
    c2, c4, cj = spec.pair.coefficients
    if c4 or cj or np.any(top.u4):
        raise ValueError("force matrix requires quadratic potentials")
    K = np.zeros((top.n_sites, top.n_sites))
    for i, j in zip(top.bond_i, top.bond_j):
        K[i, i] += 2 * c2
        if j >= 0:
            K[j, j] += 2 * c2
            K[i, j] -= 2 * c2
            K[j, i] -= 2 * c2
    K[np.diag_indices_from(K)] += 2 * top.u2
    return K


def is_quadratic(spec: LatticeSpec) -> bool:
    c2, c4, cj = spec.pair.coefficients
    return not c4 and not cj and not np.any(spec.topology.u4)


def _stretch_sampler(pot, T: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Exact draws from exp(-V(x)/T) on the line by tabulated inverse CDF."""
    c2, c4, cj = pot.coefficients
    if cj and not (c2 or c4):
        # bounded rotator: rejection from uniform on (-pi, pi]
        out = np.empty(0)
        while out.size < size:
            x = rng.uniform(-math.pi, math.pi, 2 * size + 16)
            keep = rng.uniform(size=x.size) < np.exp(-cj * (1 - np.cos(x)) / T)
            out = np.concatenate([out, x[keep]])
        return out[:size]
    # width set by the quadratic or quartic scale
    scale = math.sqrt(T / c2) if c2 else (T / c4) ** 0.25
    x = np.linspace(-12 * scale, 12 * scale, 20001)
    w = np.exp(-(c2 * x * x + c4 * x ** 4 + cj * (1 - np.cos(x))) / T)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    return np.interp(rng.uniform(size=size), cdf, x)


def _mala(spec: LatticeSpec, T: float, rng: np.random.Generator, q: np.ndarray,
          n_steps: int, h: float) -> np.ndarray:
    """Metropolis-adjusted overdamped Langevin chain targeting exp(-V(Q)/T)."""
    def logp(x):
        return -potential_energy(spec, x) / T

    def drift(x):
        return forces(spec, x) / T

    lp, g = logp(q), drift(q)
    for _ in range(n_steps):
        prop = q + h * g + math.sqrt(2 * h) * rng.standard_normal(q.shape)
        lp2, g2 = logp(prop), drift(prop)
        fwd = -np.sum((prop - q - h * g) ** 2) / (4 * h)
        bwd = -np.sum((q - prop - h * g2) ** 2) / (4 * h)
        if math.log(rng.uniform()) < lp2 - lp + bwd - fwd:
            q, lp, g = prop, lp2, g2
    return q


def sample_gibbs(spec: LatticeSpec, T: float, rng: np.random.Generator,
                 burn_in: int = 2000, mala_step: Optional[float] = None) -> SystemState:
    """Draw a state from exp(-H/T).

    Momenta are exact Gaussians.  Positions are exact for quadratic models
    with a non-singular stiffness matrix and for free-ended unpinned
    chains (independent bond stretches).  Anything else is equilibrated by
    ``burn_in`` Metropolis-adjusted overdamped Langevin moves.
    """
    if not T > 0:
        raise ValueError("temperature must be positive")
    if not spec.confining and spec.pair.kind != "rotator":
        raise ValueError("non-confining model cannot be Gibbs sampled")
    N, nu = spec.n_sites, spec.nu
    p = rng.normal(0.0, math.sqrt(spec.mass * T), size=(N, nu))
    if spec.dimension == 1 and spec.onsite is None and spec.ends == "free":
        x = _stretch_sampler(spec.pair, T, rng, (N - 1) * nu).reshape(N - 1, nu) if N > 1 else np.zeros((0, nu))
        q = np.vstack([np.zeros((1, nu)), np.cumsum(x, axis=0)])
        q -= q.mean(axis=0)
        return SystemState(q, p)
    if is_quadratic(spec):
        K = _force_matrix(spec)
        w, v = np.linalg.eigh(K)
        if w.min() > 1e-12 * max(w.max(), 1.0):
            z = rng.standard_normal((N, nu))
            q = v @ (z * np.sqrt(T / w)[:, None])
            return SystemState(q, p)
    if spec.ends == "periodic" and spec.dimension == 1 and spec.onsite is None:
        # stretches constrained to sum to zero; drawn independently then centred, then refined
        x = _stretch_sampler(spec.pair, T, rng, N * nu).reshape(N, nu)
        x -= x.mean(axis=0)
        q = np.vstack([np.zeros((1, nu)), np.cumsum(x[:-1], axis=0)])
        q -= q.mean(axis=0)
    else:
        q = np.zeros((N, nu))
    if mala_step is None:
        c2, c4, cj = spec.pair.coefficients
        top = spec.topology
        stiff = 4 * 2 * c2 + 2 * float(top.u2.max()) + 2 * cj + 12 * (4 * c4 + float(top.u4.max())) * T
        mala_step = 0.3 * T / max(stiff, 1e-12)
    q = _mala(spec, T, rng, q, burn_in, mala_step)
    return SystemState(q, p)
