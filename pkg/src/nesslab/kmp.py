"""Stochastic energy-exchange chain with thermalizing ends, simulated event by event.

Each of the ``N - 1`` bonds fires at rate ``gamma_ex`` and splits the pair
energy uniformly; each end fires at rate ``gamma_b`` and redraws its
energy from the exponential law with mean ``T_L`` or ``T_R``.  Event ``k``
draws its three uniforms (waiting time, channel, split) from counters
``3k, 3k+1, 3k+2`` of the seeded stream, so runs are reproducible and may
be split into pieces at any event boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import backend
from ._rng import key_from_seed, uniforms
from .observables import block_stats

__all__ = ["KmpState", "KmpSeries", "KmpProfile", "kmp_step", "pair_exchange",
           "simulate_kmp", "kmp_profile_and_flux", "kmp_initial"]


@dataclass
class KmpState:
    e: np.ndarray
    T_L: float
    T_R: float
    gamma_ex: float = 1.0
    gamma_b: float = 1.0
    t: float = 0.0
    events: int = 0
    seed: int = 0

    def __post_init__(self):
        self.e = np.ascontiguousarray(np.asarray(self.e, dtype=float))
        if self.e.ndim != 1 or self.e.size < 2:
            raise ValueError("need at least two sites")
        if np.any(self.e < 0):
            raise ValueError("energies must be non-negative")
        if not (self.T_L > 0 and self.T_R > 0 and self.gamma_ex > 0 and self.gamma_b > 0):
            raise ValueError("temperatures and rates must be positive")

    def copy(self) -> "KmpState":
        return replace(self, e=self.e.copy())


def kmp_initial(n: int, T_L: float, T_R: float, seed: int = 0, **rates) -> KmpState:
    """Product of exponentials interpolating linearly between the reservoir temperatures."""
    rng = np.random.default_rng([int(seed) & (2 ** 63 - 1), 0x4B4D50])
    return KmpState(rng.exponential(np.linspace(T_L, T_R, n)), T_L, T_R, seed=seed, **rates)


def pair_exchange(e: np.ndarray, i: int, u: float) -> None:
    """Redistribute ``e[i] + e[i+1]`` as ``(u s, s - u s)`` in place."""
    s = e[i] + e[i + 1]
    e[i] = u * s
    e[i + 1] = s - e[i]


def kmp_step(state: KmpState, rng=None) -> KmpState:
    """Execute the next event.  ``rng`` is ignored: the draw is fixed by ``(seed, events)``."""
    st = state.copy()
    n = st.e.size
    rate_pairs = (n - 1) * st.gamma_ex
    rate = rate_pairs + 2 * st.gamma_b
    k = st.events
    u0, x, u = uniforms(np.array([3 * k, 3 * k + 1, 3 * k + 2], dtype=np.uint64), key_from_seed(st.seed))
    st.t += -math.log(1.0 - u0) / rate
    x *= rate
    if x < rate_pairs:
        pair_exchange(st.e, min(int(x / st.gamma_ex), n - 2), u)
    elif x - rate_pairs < st.gamma_b:
        st.e[0] = -st.T_L * math.log(1.0 - u)
    else:
        st.e[-1] = -st.T_R * math.log(1.0 - u)
    st.events += 1
    return st


@dataclass
class KmpSeries:
    window: float
    energies: np.ndarray  # (windows, N) time-averaged site energies per window
    transfer: np.ndarray  # (windows, N-1) energy moved left-to-right across each bond
    heat: np.ndarray  # (windows, 2) energy handed to the left/right reservoir
    final: KmpState


def simulate_kmp(state: KmpState, window: float, n_windows: int,
                 burn_time: float = 0.0) -> KmpSeries:
    """Run for ``burn_time`` then record ``n_windows`` windows of length ``window``."""
    st = state.copy()
    kern = backend.kernel()
    n = st.e.size
    key = key_from_seed(st.seed)
    if burn_time > 0:
        prof, bond, heat = np.zeros((1, n)), np.zeros((1, n - 1)), np.zeros((1, 2))
        ev, st.t = kern.kmp_run(st.e, st.T_L, st.T_R, st.gamma_ex, st.gamma_b, key, st.events,
                                st.t, burn_time, 1, prof, bond, heat)
        st.events += int(ev)
    prof, bond, heat = np.zeros((n_windows, n)), np.zeros((n_windows, n - 1)), np.zeros((n_windows, 2))
    ev, t = kern.kmp_run(st.e, st.T_L, st.T_R, st.gamma_ex, st.gamma_b, key, st.events,
                         st.t, window, n_windows, prof, bond, heat)
    st.events += int(ev)
    st.t = t
    return KmpSeries(window, prof / window, bond, heat, st)


@dataclass
class KmpProfile:
    profile: np.ndarray
    profile_stderr: np.ndarray
    flux: float
    flux_stderr: float
    kappa: float  # flux (N-1) / (<e_1> - <e_N>)
    kappa_stderr: float
    kappa_reservoir: float  # flux (N-1) / (T_L - T_R)
    linear_deviation: np.ndarray  # <e_i> minus the line through the end values, in stderr units

    def to_dict(self) -> dict:
        return {"profile": self.profile.tolist(), "profile_stderr": self.profile_stderr.tolist(),
                "flux": self.flux, "flux_stderr": self.flux_stderr, "kappa": self.kappa,
                "kappa_stderr": self.kappa_stderr, "kappa_reservoir": self.kappa_reservoir,
                "linear_deviation": self.linear_deviation.tolist()}


def kmp_profile_and_flux(series: KmpSeries, n_blocks: int = 32) -> KmpProfile:
    """Stationary profile, current and conductivity with block-averaged errors.

    The current is the mean over all bonds of the energy moved per unit time
    (all bonds carry the same mean current).  The conductivity uses the
    measured end-site temperatures, which removes the contact resistance of
    the thermalizing ends.
    """
    E = series.energies
    n = E.shape[1]
    st = [block_stats(E[:, i], n_blocks) for i in range(n)]
    prof = np.array([s.mean for s in st])
    perr = np.array([s.stderr for s in st])
    j = series.transfer.mean(axis=1) / series.window
    js = block_stats(j, n_blocks)
    d = E[:, 0] - E[:, -1]
    dm = float(d.mean())
    x = np.linspace(0.0, 1.0, n)
    line_series = E - (E[:, :1] * (1 - x) + E[:, -1:] * x)
    dev = np.zeros(n)
    for i in range(1, n - 1):
        b = block_stats(line_series[:, i], n_blocks)
        dev[i] = b.mean / b.stderr if b.stderr > 0 else 0.0
    T_L, T_R = series.final.T_L, series.final.T_R
    if dm != 0:
        kappa = js.mean * (n - 1) / dm
        # delta method on the ratio of means
        z = (j - kappa * d / (n - 1)) * (n - 1) / dm
        kerr = block_stats(z, n_blocks).stderr
    else:
        kappa, kerr = float("nan"), float("nan")
    kres = js.mean * (n - 1) / (T_L - T_R) if T_L != T_R else float("nan")
    return KmpProfile(prof, perr, js.mean, js.stderr, float(kappa), float(kerr), float(kres), dev)
