"""Exact stationary Gaussian states of harmonic lattices.

For quadratic potentials the Langevin and extended-reservoir dynamics are
linear SDEs ``dX = A X dt + B dW``.  Their stationary covariance solves the
Lyapunov equation ``A C + C A^T + B B^T = 0``, and the mean flux and kinetic
temperatures are linear functionals of ``C``.  Displacement components
decouple for quadratic potentials, so the model is assembled for one
component and observables are multiplied by ``nu`` where they add.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .lattice import Harmonic, LatticeSpec, _force_matrix, is_quadratic
from .thermostats import Extended, Langevin, ReservoirSpec, reservoir_sites

__all__ = [
    "LinearSDEModel", "StationaryCovariance", "ExactObservables", "NotHurwitzError",
    "build_linear_model", "stationary_covariance", "exact_observables",
    "self_consistent_profile", "SelfConsistentResult", "oracle", "lyapunov_kron",
]


class NotHurwitzError(ValueError):
    """Drift matrix has an eigenvalue with non-negative real part."""


@dataclass(frozen=True)
class LinearSDEModel:
    A: np.ndarray
    B: np.ndarray
    q_index: np.ndarray
    p_index: np.ndarray
    r_index: np.ndarray
    lattice: LatticeSpec
    reservoir: ReservoirSpec

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class StationaryCovariance:
    C: np.ndarray
    residual: float  # ||A C + C A^T + B B^T|| / ||B B^T||
    spectral_abscissa: float  # max Re(eig A) < 0


def _noise(lattice: LatticeSpec, reservoir) -> tuple[np.ndarray, np.ndarray]:
    left, right = reservoir_sites(reservoir, lattice)
    lam = np.zeros(lattice.n_sites)
    T = np.zeros(lattice.n_sites)
    lam[left], T[left] = reservoir.lam_L, reservoir.T_L
    lam[right], T[right] = reservoir.lam_R, reservoir.T_R
    return lam, T


def build_linear_model(lattice: LatticeSpec, reservoir: ReservoirSpec,
                       site_lam: Optional[np.ndarray] = None,
                       site_T: Optional[np.ndarray] = None) -> LinearSDEModel:
    """Assemble ``A`` and ``B`` for a quadratic lattice with Langevin or extended baths.

    ``site_lam``/``site_T`` override the per-site Langevin couplings and
    temperatures (used for chains with a bath on every site).
    """
    if not is_quadratic(lattice):
        raise ValueError("linear model requires purely quadratic potentials")
    if not isinstance(reservoir, (Langevin, Extended)):
        raise TypeError("linear model supports Langevin and extended reservoirs only")
    n, m = lattice.n_sites, lattice.mass
    K = _force_matrix(lattice)
    n_aux = 2 if isinstance(reservoir, Extended) else 0
    dim = 2 * n + n_aux
    A = np.zeros((dim, dim))
    B = np.zeros((dim, dim))
    qi, pi = np.arange(n), np.arange(n, 2 * n)
    A[np.ix_(qi, pi)] = np.eye(n) / m
    A[np.ix_(pi, qi)] = -K
    if isinstance(reservoir, Langevin):
        lam, T = _noise(lattice, reservoir)
        if site_lam is not None:
            lam = np.asarray(site_lam, float)
        if site_T is not None:
            T = np.asarray(site_T, float)
        A[pi, pi] = -lam / m
        B[pi, pi] = np.sqrt(2.0 * lam * T)
        ri = np.zeros(0, np.int64)
    else:
        ri = np.array([2 * n, 2 * n + 1])
        ends = (0, n - 1)
        for a, (site, lam, gam, T) in enumerate(zip(
                ends, (reservoir.lam_L, reservoir.lam_R), (reservoir.gamma_L, reservoir.gamma_R),
                reservoir.temperatures)):
            A[pi[site], ri[a]] += 1.0
            A[ri[a], ri[a]] = -gam
            A[ri[a], qi[site]] = gam * lam ** 2
            B[ri[a], ri[a]] = math.sqrt(2.0 * gam * lam ** 2 * T)
    return LinearSDEModel(A, B, qi, pi, ri, lattice, reservoir)


def stationary_covariance(model: LinearSDEModel, rtol: float = 1e-10) -> StationaryCovariance:
    """Solve the Lyapunov equation by Bartels-Stewart and certify the residual."""
    abscissa = float(np.max(np.linalg.eigvals(model.A).real))
    scale = max(float(np.max(np.abs(model.A))), 1e-300)
    if not abscissa < -1e-12 * scale:
        raise NotHurwitzError(f"drift matrix not Hurwitz (max Re eig = {abscissa:.3e}); "
                              "an undamped or unpinned mode has no stationary state")
    Q = model.B @ model.B.T
    C = scipy.linalg.solve_continuous_lyapunov(model.A, -Q)
    C = 0.5 * (C + C.T)
    res = model.A @ C + C @ model.A.T + Q
    rel = float(np.linalg.norm(res) / max(np.linalg.norm(Q), 1e-300))
    if rel > rtol:
        raise ArithmeticError(f"ill-conditioned Lyapunov solve: relative residual {rel:.2e}")
    return StationaryCovariance(C, rel, abscissa)


def lyapunov_kron(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Reference solve of ``A X + X A^T + Q = 0`` via the vectorised Kronecker system."""
    n = A.shape[0]
    I = np.eye(n)
    M = np.kron(I, A) + np.kron(A, I)
    return np.linalg.solve(M, -Q.reshape(-1, order="F")).reshape(n, n, order="F")


@dataclass(frozen=True)
class ExactObservables:
    plane_flux: np.ndarray  # mean current through each longitudinal plane
    flux: float  # average over planes
    profile: np.ndarray  # kinetic temperature per plane
    site_temperature: np.ndarray  # <p_i^2>/m per site
    kappa: float  # (flux / A) * L / (T_L - T_R); nan at equal temperatures

    def summary(self) -> dict:
        return {"flux": {"mean": self.flux, "stderr": 0.0, "blocks": 0,
                         "correlated_blocks": False, "unit": ""},
                "kappa": self.kappa,
                "profile": [float(x) for x in self.profile]}


def exact_observables(model: LinearSDEModel, cov: StationaryCovariance) -> ExactObservables:
    lat = model.lattice
    top = lat.topology
    C = cov.C
    c2 = lat.pair.coefficients[0]
    qi, pi = model.q_index, model.p_index
    nu, m = lat.nu, lat.mass
    fluxes = np.zeros(top.n_planes)
    for b in np.flatnonzero(top.bond_plane >= 0):
        i, j = top.bond_i[b], top.bond_j[b]
        # <(q_i - q_j)(p_i + p_j)> scaled by the harmonic bond force constant
        e = C[qi[i], pi[i]] + C[qi[i], pi[j]] - C[qi[j], pi[i]] - C[qi[j], pi[j]]
        fluxes[top.bond_plane[b]] += nu * c2 / m * e
    site_T = np.diag(C)[pi] / m
    profile = site_T.reshape(lat.length, lat.cross_section).mean(axis=1)
    flux = float(fluxes.mean()) if fluxes.size else 0.0
    dT = model.reservoir.T_L - model.reservoir.T_R
    kappa = flux / lat.cross_section * lat.length / dT if dT != 0 else float("nan")
    return ExactObservables(fluxes, flux, profile, site_T, kappa)


def oracle(lattice: LatticeSpec, reservoir: ReservoirSpec) -> ExactObservables:
    """Exact flux, profile and conductivity of a harmonic lattice."""
    model = build_linear_model(lattice, reservoir)
    return exact_observables(model, stationary_covariance(model))


@dataclass(frozen=True)
class SelfConsistentResult:
    temperatures: np.ndarray
    flux: float
    iterations: int
    max_exchange: float


def _site_kinetic(lattice, lam, T):
    model = build_linear_model(lattice, Langevin(1.0, 1.0), site_lam=lam, site_T=T)
    cov = stationary_covariance(model)
    return model, cov, np.diag(cov.C)[model.p_index] / lattice.mass


def self_consistent_profile(lattice: LatticeSpec, T_L: float, T_R: float, tol: float = 1e-10,
                            lam_end: float = 1.0, lam_bulk: float = 1.0, method: str = "newton",
                            damping: float = 0.5, max_iter: int = 500) -> SelfConsistentResult:
    """Harmonic chain with a Langevin bath on every site, bulk temperatures tuned to zero net exchange.

    The net heat from site ``i`` into its bath is ``lam (<p_i^2>/m - T_i) / m``.
    The kinetic temperatures are affine in the bath temperatures, so
    ``method="newton"`` converges in one step up to rounding;
    ``method="picard"`` applies damped updates ``T_i += damping (<p_i^2>/m - T_i)``.
    """
    if lattice.dimension != 1 or lattice.nu != 1:
        raise ValueError("self-consistent profile is defined for scalar chains")
    if not (T_L > 0 and T_R > 0):
        raise ValueError("temperatures must be positive")
    n = lattice.n_sites
    if n < 3:
        raise ValueError("need at least one bulk site")
    lam = np.full(n, float(lam_bulk))
    lam[0], lam[-1] = lam_end, lam_end
    T = np.linspace(T_L, T_R, n)
    bulk = slice(1, n - 1)
    m = lattice.mass

    def exchange(T):
        model, cov, kin = _site_kinetic(lattice, lam, T)
        return model, cov, lam[bulk] * (kin[bulk] - T[bulk]) / m

    model, cov, ex = exchange(T)
    it = 0
    while np.max(np.abs(ex)) >= tol:
        if it >= max_iter:
            raise RuntimeError(f"self-consistent iteration did not converge in {max_iter} iterations "
                               f"(max exchange {np.max(np.abs(ex)):.2e})")
        if method == "picard":
            T = T.copy()
            T[bulk] += damping * ex * m / lam[bulk]
        elif method == "newton":
            # exchange is affine in T: recover its Jacobian from unit perturbations
            nb = n - 2
            J = np.zeros((nb, nb))
            for k in range(nb):
                Tk = T.copy()
                Tk[1 + k] += 1.0
                J[:, k] = exchange(Tk)[2] - ex
            T = T.copy()
            T[bulk] -= np.linalg.solve(J, ex)
        else:
            raise ValueError(f"unknown method {method!r}")
        model, cov, ex = exchange(T)
        it += 1
    obs = exact_observables(model, cov)
    return SelfConsistentResult(T, obs.flux, it, float(np.max(np.abs(ex))) if ex.size else 0.0)
