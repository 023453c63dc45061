"""Heat flux, kinetic temperature, entropy production and error bars.

Flux sign: a positive bond current carries energy towards increasing
``i_1``.  For a bond ``(i, j)`` with ``f = -grad V(q_i - q_j)`` (the force
on ``i``), the current from ``i`` to ``j`` is ``-f . (p_i + p_j) / 2m``, and
every site obeys ``dh_i/dt = (current in) - (current out)`` exactly.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lattice import LatticeSpec, SystemState, _bond_vectors, local_energies

__all__ = [
    "BlockStats", "ObservableSeries", "block_stats", "bond_flux", "bond_currents",
    "plane_flux", "continuity_residual", "kinetic_temperature_profile",
    "entropy_production", "integrated_autocorrelation", "autocorrelation", "Moments",
]


@dataclass(frozen=True)
class BlockStats:
    mean: float
    stderr: float
    n_blocks: int
    block_length: int
    # stderr with half-length blocks; a >20% change flags correlated blocks
    stderr_half: float
    flagged: bool


def block_stats(values, n_blocks: int = 32) -> BlockStats:
    """Mean and standard error from ``n_blocks`` non-overlapping block means.

    The diagnostic recomputes the error with blocks half as long; if the
    estimate moves by more than 20% the blocks are shorter than the
    correlation time and ``flagged`` is set.
    """
    x = np.asarray(values, dtype=float).ravel()
    if n_blocks < 2 or x.size < 2 * n_blocks:
        raise ValueError(f"series of length {x.size} too short for {n_blocks} blocks")
    b = x.size // n_blocks
    means = x[: b * n_blocks].reshape(n_blocks, b).mean(axis=1)
    err = float(means.std(ddof=1) / math.sqrt(n_blocks))
    if b >= 2:
        hb = b // 2
        half = x[: hb * 2 * n_blocks].reshape(2 * n_blocks, hb).mean(axis=1)
        err_half = float(half.std(ddof=1) / math.sqrt(2 * n_blocks))
    else:
        err_half = err
    if err == 0.0 and err_half == 0.0:
        flagged = False
    else:
        flagged = abs(err - err_half) > 0.2 * max(err, err_half)
    return BlockStats(float(means.mean()), err, n_blocks, b, err_half, flagged)


@dataclass
class ObservableSeries:
    """Sampled time series with its block-averaged summary."""

    name: str
    times: np.ndarray
    values: np.ndarray
    mean: float = float("nan")
    stderr: float = float("nan")
    n_blocks: int = 0
    flagged: bool = False
    unit: str = ""

    @classmethod
    def from_values(cls, name: str, times, values, n_blocks: int = 32, unit: str = "") -> "ObservableSeries":
        values = np.asarray(values, dtype=float)
        s = cls(name, np.asarray(times, dtype=float), values, unit=unit)
        if values.size >= 2 * n_blocks:
            st = block_stats(values, n_blocks)
            s.mean, s.stderr, s.n_blocks, s.flagged = st.mean, st.stderr, st.n_blocks, st.flagged
        elif values.size:
            s.mean = float(values.mean())
        return s

    def summary(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "blocks": self.n_blocks,
                "correlated_blocks": self.flagged, "unit": self.unit}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", f"{self.name} [{self.unit or 'k_B=1 units'}]"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


@dataclass
class Moments:
    """Mergeable count/mean/second-moment accumulator."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, values) -> "Moments":
        v = np.asarray(values, dtype=float).ravel()
        return self.merge(Moments(v.size, float(v.mean()) if v.size else 0.0,
                                  float(((v - v.mean()) ** 2).sum()) if v.size else 0.0))

    def merge(self, other: "Moments") -> "Moments":
        n = self.n + other.n
        if n == 0:
            return Moments()
        d = other.mean - self.mean
        return Moments(n, self.mean + d * other.n / n, self.m2 + other.m2 + d * d * self.n * other.n / n)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else float("nan")


def bond_currents(lattice: LatticeSpec, state: SystemState) -> np.ndarray:
    """Energy current along every bond of the topology (zero for wall bonds)."""
    top = lattice.topology
    f = -lattice.pair.grad(_bond_vectors(lattice, state.q))
    inner = top.bond_j >= 0
    pj = np.where(inner[:, None], state.p[np.maximum(top.bond_j, 0)], 0.0)
    cur = -np.sum(f * (state.p[top.bond_i] + pj), axis=1) / (2.0 * lattice.mass)
    return np.where(inner, cur, 0.0)


def bond_flux(lattice: LatticeSpec, state: SystemState, site: int, direction: int = 0) -> float:
    """Current from ``site`` to its neighbour ``site + 1_k`` along axis ``direction``."""
    top = lattice.topology
    if not 0 <= site < lattice.n_sites or direction not in range(lattice.dimension):
        raise IndexError("site or direction outside the lattice")
    if direction == 0:
        sel = (top.bond_i == site) & (top.bond_plane >= 0)
    else:
        sel = (top.bond_i == site) & (top.bond_plane < 0) & (top.bond_j >= 0)
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise ValueError(f"no bond from site {site} along axis {direction}")
    return float(bond_currents(lattice, state)[idx[0]])


def plane_flux(lattice: LatticeSpec, state: SystemState, plane: int) -> float:
    """Total current between planes ``plane`` and ``plane + 1`` (0-based)."""
    top = lattice.topology
    if not 0 <= plane < top.n_planes:
        raise IndexError(f"plane {plane} outside 0..{top.n_planes - 1}")
    return float(np.sum(bond_currents(lattice, state)[top.bond_plane == plane]))


def continuity_residual(lattice: LatticeSpec, trajectory: Sequence[SystemState], dt: float,
                        site: int, reservoir_sites: Optional[Sequence[int]] = None) -> float:
    """Max over the segment of ``|dh_i/dt - net current into i|``.

    ``dh_i/dt`` is a centred difference over consecutive states spaced by
    ``dt``; the residual is therefore O(dt^2) for isolated dynamics.
    """
    if reservoir_sites is not None and site in set(int(s) for s in reservoir_sites):
        raise ValueError("continuity check needs a bulk site without reservoir terms")
    if len(trajectory) < 3:
        raise ValueError("need at least three states")
    top = lattice.topology
    into = np.zeros(top.bond_i.size)
    into[top.bond_j == site] += 1.0
    into[top.bond_i == site] -= 1.0
    into[top.bond_j < 0] = 0.0
    h = np.array([local_energies(lattice, s)[site] for s in trajectory])
    res = 0.0
    for k in range(1, len(trajectory) - 1):
        dh = (h[k + 1] - h[k - 1]) / (2.0 * dt)
        div = float(into @ bond_currents(lattice, trajectory[k]))
        res = max(res, abs(dh - div))
    return res


def kinetic_temperature_profile(lattice: LatticeSpec, states: Sequence[SystemState]):
    """Per-plane kinetic temperature ``<p^2>/(m nu)`` with a naive standard error."""
    if len(states) < 1:
        raise ValueError("need at least one sample")
    L, A = lattice.length, lattice.cross_section
    samples = np.array([np.sum(s.p ** 2, axis=1).reshape(L, A).mean(axis=1)
                        for s in states]) / (lattice.mass * lattice.nu)
    mean = samples.mean(axis=0)
    err = samples.std(axis=0, ddof=1) / math.sqrt(len(states)) if len(states) > 1 else np.full(L, np.nan)
    return mean, err


def entropy_production(phi_L, phi_R, T_L: float, T_R: float):
    """Reservoir entropy production ``Phi_L / T_L + Phi_R / T_R``."""
    return np.asarray(phi_L) / T_L + np.asarray(phi_R) / T_R


def autocorrelation(x, max_lag: Optional[int] = None, subtract_mean: bool = True) -> np.ndarray:
    """Time-averaged autocorrelation ``<x(0) x(t)>`` for lags ``0..max_lag`` via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if subtract_mean:
        x = x - x.mean()
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    nfft = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(x, nfft)
    c = np.fft.irfft(fx * np.conj(fx), nfft)[: max_lag + 1]
    return c / (n - np.arange(max_lag + 1))


def integrated_autocorrelation(x, dt: float, max_lag: Optional[int] = None,
                               subtract_mean: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Running integral ``int_0^t <x(0) x(s)> ds`` (trapezoid) and its lag times."""
    c = autocorrelation(x, max_lag, subtract_mean)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (c[1:] + c[:-1]) * dt)])
    return np.arange(c.size) * dt, integral
