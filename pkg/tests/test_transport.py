import math

import numpy as np
import pytest

from nesslab.dynamics import IntegratorSpec
from nesslab.lattice import FPUBeta, Harmonic, LatticeSpec, PinnedQuadratic, QuarticOnsite
from nesslab.thermostats import Langevin
from nesslab.transport import (LdfResult, conductivity_scan, entropy_ldf, fit_exponent,
                               ft_slope_extrapolation, green_kubo, ldf_from_samples,
                               linear_response_check, map_jobs, ness_run)


def chain(n, **kw):
    return LatticeSpec((n,), **kw)


def _square(x):
    return x * x


class TestFit:
    def test_exact_power_law(self):
        L = [8, 16, 32, 64]
        a, se, ci = fit_exponent(L, [3.0 * x ** 0.4 for x in L])
        assert a == pytest.approx(0.4, abs=1e-12) and se < 1e-12
        assert ci[0] <= 0.4 <= ci[1]

    def test_needs_three_lengths(self):
        with pytest.raises(ValueError):
            fit_exponent([8, 16], [1.0, 2.0])

    def test_jackknife_over_replicas(self):
        rng = np.random.default_rng(0)
        L = np.array([16, 32, 64])
        reps = 2.0 * L[:, None] ** 0.3 * (1 + 0.05 * rng.normal(size=(3, 6)))
        a, se, _ = fit_exponent(L, reps.mean(axis=1), replica_kappas=reps)
        assert abs(a - 0.3) < 4 * se and se > 0


class TestScan:
    def test_harmonic_oracle_alpha_one(self):
        r = conductivity_scan(chain(8, ends="fixed"), Langevin(1.2, 0.8), [8, 16, 32, 64], oracle=True)
        assert r.alpha == pytest.approx(1.0, abs=0.02)
        assert r.alpha_ci[0] <= 1.0 <= r.alpha_ci[1] or abs(r.alpha - 1) < 1e-3
        assert all(row["stderr"] == 0.0 for row in r.rows)

    @pytest.mark.parametrize("kw", [dict(lengths=[8, 16]),
                                    dict(reservoir=Langevin(1.0, 1.0)),
                                    dict(reservoir=Langevin(2.0, 0.5))])
    def test_invalid(self, kw):
        args = dict(lattice=chain(8, ends="fixed"), reservoir=Langevin(1.2, 0.8), lengths=[8, 16, 32])
        args.update(kw)
        with pytest.raises(ValueError):
            conductivity_scan(oracle=True, **args)

    def test_simulated_scan_rows(self):
        integ = IntegratorSpec(dt=0.05, total_steps=100_000, burn_in=5000, stride=10, seed=3)
        r = conductivity_scan(chain(4, ends="fixed"), Langevin(1.2, 0.8), [4, 6, 8], integ, replicas=2)
        assert [row["length"] for row in r.rows] == [4, 6, 8]
        assert all(row["stderr"] > 0 and row["replicas"] == 2 for row in r.rows)
        assert len({s for row in r.rows for s in row["seeds"]}) == 6
        assert math.isfinite(r.alpha) and r.alpha_stderr > 0

    def test_map_jobs_pool_matches_serial(self):
        assert map_jobs(_square, range(5), jobs=2) == map_jobs(_square, range(5), jobs=1)

    def test_stride_and_seed_invariance(self):
        lat, res = chain(4, ends="fixed"), Langevin(1.2, 0.8)
        a = ness_run((lat, res, IntegratorSpec(dt=0.05, total_steps=400_000, burn_in=2000, stride=10, seed=1), 32))
        b = ness_run((lat, res, IntegratorSpec(dt=0.05, total_steps=400_000, burn_in=2000, stride=20, seed=2), 32))
        assert abs(a["flux"] - b["flux"]) < 3 * math.hypot(a["flux_stderr"], b["flux_stderr"])


class TestGreenKubo:
    def test_zero_window(self):
        r = green_kubo(chain(8, onsite=PinnedQuadratic(1.0)), 1.0, 0.0, 100.0)
        assert r.kappa == 0.0

    def test_requires_pinned_or_periodic(self):
        with pytest.raises(ValueError):
            green_kubo(chain(8, pair=FPUBeta(1.0, 1.0)), 1.0, 5.0, 1000.0)
        with pytest.raises(ValueError):
            green_kubo(chain(8, ends="periodic"), -1.0, 5.0, 1000.0)

    def test_segments_too_short(self):
        with pytest.raises(ValueError):
            green_kubo(chain(8, ends="periodic"), 1.0, 50.0, 1000.0, segments=16)

    def test_zero_lag_equals_variance(self):
        lat = chain(16, onsite=QuarticOnsite(0.0, 1.0), ends="periodic")
        r = green_kubo(lat, 1.0, 5.0, 4000.0, dt=0.02, segments=32)
        assert abs(r.c0 - r.variance) <= 2 * r.c0_stderr + 1e-12
        # equilibrium <Phi^2> of the plane-averaged current is positive and finite
        assert r.c0 > 0

    def test_canonical_route_agrees(self):
        lat = chain(16, onsite=QuarticOnsite(0.0, 1.0), ends="periodic")
        kw = dict(dt=0.02, segments=8, replicas=4, seed=1)
        a = green_kubo(lat, 1.0, 5.0, 8000.0, **kw)
        b = green_kubo(lat, 1.0, 5.0, 8000.0, ensemble="canonical", **kw)
        assert b.diagnostic["ensemble"] == "canonical"
        assert abs(a.integral[-1] - b.integral[-1]) < 3 * math.hypot(a.integral_stderr[-1],
                                                                     b.integral_stderr[-1])
        with pytest.raises(ValueError):
            green_kubo(lat, 1.0, 5.0, 8000.0, ensemble="micro")

    def test_harmonic_periodic_has_no_plateau(self):
        r = green_kubo(chain(32, ends="periodic"), 1.0, 40.0, 8000.0, dt=0.02, segments=32)
        assert not r.plateau and math.isnan(r.kappa)
        assert r.integral[-1] > 1.5 * r.integral[r.integral.size // 2]


class TestLinearResponse:
    def test_span_required(self):
        with pytest.raises(ValueError):
            linear_response_check(chain(4, ends="fixed"), Langevin(1, 1), 1.0, [0.1, 0.2],
                                  IntegratorSpec(dt=0.05))

    def test_harmonic_slope_matches_oracle(self):
        from nesslab.harmonic import oracle
        lat = chain(4, ends="fixed")
        integ = IntegratorSpec(dt=0.05, total_steps=1_000_000, burn_in=5000, stride=10, seed=2)
        r = linear_response_check(lat, Langevin(1, 1), 1.0, [0.1, 0.2, 0.4, -0.4], integ)
        exact = oracle(lat, Langevin(1.2, 0.8)).flux / 0.4
        assert abs(r.slope - exact) < 3 * r.slope_stderr
        assert abs(r.gk_slope - exact) < 3 * r.gk_slope_stderr
        # odd in dT
        assert abs(r.fluxes[2] + r.fluxes[3]) < 3 * math.hypot(r.flux_stderr[2], r.flux_stderr[3])


class TestLdf:
    def test_gaussian_fluctuation_theorem_synthetic(self):
        # Gaussian sigma_t with variance 2 mu / t has an odd rate-function part of exactly -p
        rng = np.random.default_rng(0)
        t, mu = 5.0, 0.2
        sig = rng.normal(mu, math.sqrt(2 * mu / t), 400_000)
        r = ldf_from_samples(sig, t, np.linspace(-0.6, 0.6, 25))
        assert abs(r.slope + 1.0) < 3 * r.slope_stderr + 0.02
        assert np.sum(r.density * np.diff(np.linspace(-0.6, 0.6, 25))) <= 1.0 + 1e-12

    def test_histogram_normalised(self):
        rng = np.random.default_rng(1)
        sig = rng.normal(0, 0.1, 10_000)
        edges = np.linspace(-1, 1, 41)
        r = ldf_from_samples(sig, 1.0, edges)
        assert np.sum(r.density * np.diff(edges)) == pytest.approx(1.0)
        assert np.all(np.isnan(r.rate[r.counts == 0]))

    def test_equilibrium_odd_part_zero(self):
        rng = np.random.default_rng(2)
        r = ldf_from_samples(rng.normal(0, 0.2, 200_000), 4.0, np.linspace(-0.5, 0.5, 21))
        assert abs(r.slope) < 3 * r.slope_stderr + 1e-3

    def test_asymmetric_grid_rejected(self):
        with pytest.raises(ValueError):
            ldf_from_samples(np.zeros(10), 1.0, [-1.0, 0.0, 2.0])

    def test_no_negative_support(self):
        r = ldf_from_samples(np.full(1000, 0.5), 1.0, np.linspace(-1, 1, 5))
        assert math.isnan(r.slope)

    def test_min_segments(self):
        with pytest.raises(ValueError):
            entropy_ldf(chain(4, pair=FPUBeta(1.0, 1.0)), Langevin(1.2, 0.8), 1.0, 50, [-1, 0, 1])

    def test_mean_matches_run(self):
        lat = chain(4, pair=FPUBeta(1.0, 1.0))
        r = entropy_ldf(lat, Langevin(1.2, 0.8), 2.0, 4000, np.linspace(-1, 1, 21), dt=0.02, seed=3)
        from nesslab.dynamics import simulate
        full = simulate(lat, Langevin(1.2, 0.8), IntegratorSpec(dt=0.02, total_steps=400_000,
                                                                 burn_in=5000, stride=10, seed=9))
        s = full.series["sigma"]
        assert abs(r.mean_sigma_t - s.mean) < 2 * math.hypot(r.mean_sigma_t_stderr, s.stderr) + 1e-12

    def test_extrapolation(self):
        def fake(t, s):
            return LdfResult(t, np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1),
                             np.zeros(1), s, 0.01, 0.0, 0.0, 0.0, 100)
        # 1/slope = -1 - 2/t exactly
        res = [fake(t, 1.0 / (-1.0 - 2.0 / t)) for t in (2.0, 4.0, 8.0)]
        s, e = ft_slope_extrapolation(res)
        assert s == pytest.approx(-1.0, abs=1e-9)
        with pytest.raises(ValueError):
            ft_slope_extrapolation(res[:1])
