import json
import math

import numpy as np
import pytest

from nesslab.dynamics import IntegratorSpec, simulate, trajectory
from nesslab.lattice import (FPUBeta, Harmonic, LatticeSpec, PinnedQuadratic, QuarticOnsite,
                             SystemState, sample_gibbs)
from nesslab.observables import (Moments, ObservableSeries, autocorrelation, block_stats,
                                 bond_currents, bond_flux, continuity_residual, entropy_production,
                                 integrated_autocorrelation, kinetic_temperature_profile, plane_flux)
from nesslab.thermostats import Isolated, Langevin


def chain(n, **kw):
    return LatticeSpec((n,), **kw)


class TestBondFlux:
    def test_hand_value(self):
        lat = chain(2, pair=Harmonic(1.0))
        st = SystemState(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        # f(q_0 - q_1) = 1 and (p_0 + p_1)/2 = 1; the stretched bond does positive work
        # on site 0 and negative work on site 1, so energy moves leftwards
        assert bond_flux(lat, st, 0) == pytest.approx(-1.0)

    def test_sign_follows_energy(self, rng):
        # the rate of change of the left half's energy equals minus the current across the cut
        from nesslab.lattice import local_energies
        from nesslab.dynamics import advance
        lat = chain(6, pair=FPUBeta(1.0, 1.0))
        st = SystemState(rng.normal(size=6), rng.normal(size=6))
        dt = 1e-5
        a, _ = advance(st, lat, Isolated(), dt, 1, seed=0)
        left = lambda s: local_energies(lat, s)[:3].sum()
        rate = (left(a) - left(st)) / dt
        assert rate == pytest.approx(-bond_flux(lat, st, 2), rel=1e-3, abs=1e-6)

    def test_zero_momenta(self, rng):
        lat = chain(5, pair=FPUBeta(1.0, 1.0))
        st = SystemState(rng.normal(size=5), np.zeros(5))
        assert np.all(bond_currents(lat, st) == 0.0)

    def test_missing_bond(self):
        lat = chain(3)
        with pytest.raises(ValueError):
            bond_flux(lat, SystemState.zeros(lat), 2)
        with pytest.raises(IndexError):
            bond_flux(lat, SystemState.zeros(lat), 5)

    def test_plane_equals_bond_in_1d(self, rng):
        lat = chain(6, pair=FPUBeta(1.0, 0.5))
        st = SystemState(rng.normal(size=6), rng.normal(size=6))
        for j in range(5):
            assert plane_flux(lat, st, j) == bond_flux(lat, st, j)

    def test_plane_out_of_range(self):
        lat = chain(4)
        with pytest.raises(IndexError):
            plane_flux(lat, SystemState.zeros(lat), 3)

    def test_two_identical_rows(self, rng):
        q1, p1 = rng.normal(size=5), rng.normal(size=5)
        one = chain(5, pair=FPUBeta(1.0, 1.0))
        two = LatticeSpec((5, 2), pair=FPUBeta(1.0, 1.0))
        st1 = SystemState(q1, p1)
        st2 = SystemState(np.repeat(q1, 2), np.repeat(p1, 2))
        for j in range(4):
            assert plane_flux(two, st2, j) == pytest.approx(2 * plane_flux(one, st1, j))

    def test_equilibrium_mean_zero(self):
        lat = chain(6, pair=FPUBeta(1.0, 1.0))
        r = simulate(lat, Langevin(1.0, 1.0), IntegratorSpec(dt=0.02, total_steps=300_000,
                                                             burn_in=5000, stride=10, seed=3))
        f = r.series["flux"]
        assert abs(f.mean) < 3 * f.stderr

    def test_planes_agree_in_steady_state(self):
        lat = chain(8, pair=FPUBeta(1.0, 1.0))
        r = simulate(lat, Langevin(1.5, 0.5), IntegratorSpec(dt=0.02, total_steps=500_000,
                                                             burn_in=10_000, stride=10, seed=4))
        m, e = r.plane_means()
        for i in range(m.size):
            for j in range(i + 1, m.size):
                assert abs(m[i] - m[j]) < 3 * math.hypot(e[i], e[j])


class TestContinuity:
    def test_static_state(self):
        lat = chain(5, pair=Harmonic(1.0))
        st = SystemState(np.zeros(5), np.zeros(5))
        traj = trajectory(st, lat, Isolated(), 1e-3, 10)
        assert continuity_residual(lat, traj, 1e-3, 2) == 0.0

    @pytest.mark.parametrize("lat", [chain(6, pair=Harmonic(1.0)),
                                     chain(6, pair=FPUBeta(1.0, 1.0), onsite=QuarticOnsite(0.5, 1.0)),
                                     LatticeSpec((4, 3), pair=FPUBeta(1.0, 1.0))],
                             ids=["harmonic", "quartic", "slab"])
    def test_second_order(self, lat, rng):
        st = sample_gibbs(lat, 1.0, rng)
        site = lat.cross_section * 2 + 1
        res = []
        for dt in (2e-3, 1e-3, 5e-4):
            traj = trajectory(st, lat, Isolated(), dt, int(round(0.2 / dt)))
            res.append(continuity_residual(lat, traj, dt, site))
        if lat.pair.kind == "harmonic":
            scale = np.abs(bond_currents(lat, st)).max()
            assert res[1] < 1e-4 * max(scale, 1.0)
        assert 3.0 < res[0] / res[1] < 5.0 and 3.0 < res[1] / res[2] < 5.0

    def test_reservoir_site_rejected(self):
        lat = chain(4)
        traj = [SystemState.zeros(lat)] * 3
        with pytest.raises(ValueError):
            continuity_residual(lat, traj, 0.1, 0, reservoir_sites=[0])


class TestTemperature:
    def test_gibbs_samples_flat(self):
        lat = chain(5, pair=Harmonic(1.0), onsite=PinnedQuadratic(1.0))
        rng = np.random.default_rng(5)
        states = [sample_gibbs(lat, 0.6, rng) for _ in range(4000)]
        T, err = kinetic_temperature_profile(lat, states)
        assert np.all(np.abs(T - 0.6) < 3.5 * err)

    def test_empty(self):
        with pytest.raises(ValueError):
            kinetic_temperature_profile(chain(3), [])


class TestEntropy:
    def test_substitution(self):
        assert entropy_production(-1.0, 1.0, 2.0, 1.0) == pytest.approx(0.5)

    def test_equal_temperature_is_energy_balance(self):
        assert entropy_production(0.3, -0.1, 2.0, 2.0) == pytest.approx(0.1)

    def test_stationary_identity(self):
        lat = chain(6, pair=FPUBeta(1.0, 1.0))
        T_L, T_R = 1.5, 0.5
        r = simulate(lat, Langevin(T_L, T_R), IntegratorSpec(dt=0.02, total_steps=400_000,
                                                            burn_in=10_000, stride=10, seed=6))
        s, phi_R = r.series["sigma"], r.series["phi_R"]
        pred = (1 / T_R - 1 / T_L) * phi_R.mean
        assert s.mean > 3 * s.stderr
        assert abs(s.mean - pred) < 3 * math.hypot(s.stderr, (1 / T_R - 1 / T_L) * phi_R.stderr)


class TestBlockStats:
    def test_constant(self):
        b = block_stats(np.full(1000, 2.5), 16)
        assert b.mean == 2.5 and b.stderr == 0.0 and not b.flagged

    def test_iid(self):
        x = np.random.default_rng(0).normal(size=1 << 16)
        b = block_stats(x, 32)
        assert abs(b.stderr * math.sqrt(x.size) - 1.0) < 0.2
        assert not b.flagged

    def test_ar1_flagged_until_blocks_exceed_tau(self):
        from scipy.signal import lfilter
        rng = np.random.default_rng(1)
        phi = 0.99  # integrated correlation time (1 + phi) / (1 - phi) ~ 200 samples
        x = lfilter([1.0], [1.0, -phi], rng.normal(size=1 << 20))
        assert block_stats(x[: 32 * 16], 32).flagged
        assert block_stats(x[: 32 * 64], 32).flagged
        assert not block_stats(x, 128).flagged

    def test_too_short(self):
        with pytest.raises(ValueError):
            block_stats(np.ones(31), 16)


class TestSeries:
    def test_csv_and_json(self, tmp_path):
        s = ObservableSeries.from_values("flux", np.arange(64) * 0.5, np.arange(64.0), 16)
        s.to_csv(tmp_path / "f.csv")
        rows = (tmp_path / "f.csv").read_text().splitlines()
        assert rows[0].startswith("time,flux") and len(rows) == 65
        d = json.loads(s.summary_json())
        assert d["blocks"] == 16 and d["mean"] == pytest.approx(31.5)

    def test_moments_merge_order_independent(self, rng):
        chunks = [rng.normal(size=k) for k in (5, 17, 1, 40)]
        a = Moments()
        for c in chunks:
            a = a.add(c)
        b = Moments()
        for c in reversed(chunks):
            b = b.add(c)
        allv = np.concatenate(chunks)
        assert a.n == b.n == allv.size
        assert a.mean == pytest.approx(allv.mean()) and b.mean == pytest.approx(allv.mean())
        assert a.variance == pytest.approx(allv.var(ddof=1)) and b.variance == pytest.approx(a.variance)


class TestAutocorrelation:
    def test_matches_direct_sum(self, rng):
        x = rng.normal(size=300)
        c = autocorrelation(x, 10, subtract_mean=False)
        for k in range(11):
            assert c[k] == pytest.approx(np.mean(x[: 300 - k] * x[k:]))

    def test_integral_of_exponential(self):
        t = np.arange(200) * 0.1
        x = np.cos(t)
        times, integ = integrated_autocorrelation(x, 0.1, 5, subtract_mean=False)
        assert times[1] == pytest.approx(0.1) and integ[0] == 0.0
