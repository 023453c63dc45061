import math

import numpy as np
import pytest

from nesslab.lattice import (FPUBeta, Harmonic, LatticeSpec, PinnedQuadratic, QuarticOnsite,
                             Rotator, SystemState, forces, local_energies, local_energy,
                             potential_energy, potential_from_dict, sample_gibbs, total_energy)


def chain(n, **kw):
    return LatticeSpec((n,), **kw)


class TestTotalEnergy:
    def test_zero_state_single_pinned_site(self):
        lat = chain(1, onsite=PinnedQuadratic(1.0))
        assert total_energy(lat, SystemState.zeros(lat)) == 0.0

    def test_three_site_harmonic_bonds(self):
        lat = chain(3, pair=Harmonic(1.0))
        st = SystemState(np.array([0.0, 1.0, 0.0]), np.zeros(3))
        assert total_energy(lat, st) == pytest.approx(1.0, abs=1e-15)

    def test_kinetic_only_with_mass_two(self):
        lat = chain(2, mass=2.0)
        st = SystemState(np.zeros(2), np.array([2.0, 0.0]))
        assert total_energy(lat, st) == pytest.approx(1.0, abs=1e-15)

    def test_shape_mismatch(self):
        lat = chain(3)
        with pytest.raises(ValueError):
            total_energy(lat, SystemState(np.zeros(4), np.zeros(4)))

    def test_fixed_walls_count_wall_bonds(self):
        lat = chain(2, ends="fixed")
        st = SystemState(np.array([1.0, 0.0]), np.zeros(2))
        # wall-site1 and site1-site2 bonds, each k x^2 / 2
        assert total_energy(lat, st) == pytest.approx(1.0)

    def test_periodic_chain_wraps(self):
        lat = chain(4, ends="periodic")
        st = SystemState(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(4))
        assert total_energy(lat, st) == pytest.approx(1.0)


class TestForces:
    def test_middle_site_of_displaced_chain(self):
        lat = chain(3, pair=Harmonic(1.0))
        f = forces(lat, np.array([0.0, 1.0, 0.0]))
        assert f[1, 0] == pytest.approx(-2.0)

    def test_zero_configuration(self):
        lat = LatticeSpec((3, 3), pair=FPUBeta(1.0, 1.0), onsite=QuarticOnsite(1.0, 1.0))
        assert np.all(forces(lat, np.zeros((9, 1))) == 0.0)

    def test_fpu_pair(self):
        lat = chain(2, pair=FPUBeta(1.0, 1.0))
        f = forces(lat, np.array([0.0, 1.0]))
        assert f[0, 0] == pytest.approx(6.0)
        assert f[1, 0] == pytest.approx(-6.0)

    @pytest.mark.parametrize("lat", [
        chain(5, pair=Harmonic(1.3)),
        chain(5, pair=FPUBeta(1.0, 0.7), ends="fixed"),
        chain(6, pair=Rotator(1.1), ends="periodic"),
        chain(5, pair=Harmonic(1.0), onsite=PinnedQuadratic(0.8)),
        chain(5, pair=FPUBeta(0.5, 0.2), onsite=QuarticOnsite(0.3, 1.2)),
        LatticeSpec((3, 4), pair=FPUBeta(1.0, 1.0), onsite=QuarticOnsite(0.0, 1.0), transverse="periodic"),
        LatticeSpec((3, 2), pair=FPUBeta(1.0, 0.5), nu=2),
    ], ids=["harmonic", "fpu-fixed", "rotator", "pinned", "quartic", "slab", "vector"])
    def test_central_differences(self, lat, rng):
        h = 1e-5
        for _ in range(100):
            q = rng.normal(0, 0.7, (lat.n_sites, lat.nu))
            f = forces(lat, q)
            num = np.zeros_like(q)
            for i in range(lat.n_sites):
                for c in range(lat.nu):
                    e = np.zeros_like(q)
                    e[i, c] = h
                    num[i, c] = -(potential_energy(lat, q + e) - potential_energy(lat, q - e)) / (2 * h)
            scale = max(np.abs(f).max(), 1.0)
            assert np.abs(num - f).max() / scale < 1e-6


class TestLocalEnergy:
    def test_interior_site_zero_state(self):
        lat = chain(5)
        assert local_energy(lat, SystemState.zeros(lat), 2) == 0.0

    def test_half_weighted_bonds(self):
        lat = chain(3)
        st = SystemState(np.array([0.0, 1.0, 0.0]), np.zeros(3))
        assert local_energy(lat, st, 1) == pytest.approx(0.5)

    def test_out_of_range(self):
        lat = chain(3)
        with pytest.raises(IndexError):
            local_energy(lat, SystemState.zeros(lat), 3)

    @pytest.mark.parametrize("ends", ["free", "fixed", "periodic"])
    def test_sum_equals_total(self, ends, rng):
        lat = LatticeSpec((6, 3), pair=FPUBeta(1.0, 0.5), onsite=QuarticOnsite(0.5, 1.0), ends=ends)
        for _ in range(20):
            st = SystemState(rng.normal(size=(18, 1)), rng.normal(size=(18, 1)))
            H = total_energy(lat, st)
            assert abs(local_energies(lat, st).sum() - H) <= 1e-12 * abs(H)


class TestLatticeSpec:
    def test_invalid_dimension(self):
        with pytest.raises(ValueError):
            LatticeSpec((2, 2, 2))

    def test_invalid_mass(self):
        with pytest.raises(ValueError):
            LatticeSpec((3,), mass=0.0)

    def test_translation_invariance_flag(self):
        assert chain(4).translation_invariant
        assert not chain(4, ends="fixed").translation_invariant
        assert not chain(4, onsite=PinnedQuadratic(1.0)).translation_invariant

    def test_confinement(self):
        assert Harmonic().confining and FPUBeta().confining
        assert not Rotator().confining
        assert chain(3, pair=Rotator(), onsite=QuarticOnsite()).confining

    @pytest.mark.parametrize("pot", [Harmonic(2.0), FPUBeta(1.0, 0.3), Rotator(0.5)])
    def test_even_pair_potentials(self, pot):
        x = np.linspace(-3, 3, 31)
        assert np.allclose(pot.value(x), pot.value(-x))

    def test_round_trip(self):
        lat = LatticeSpec((4, 2), pair=FPUBeta(1.0, 2.0), onsite=QuarticOnsite(0.1, 1.0),
                          transverse="periodic", ends="fixed", nu=2, mass=1.5)
        assert LatticeSpec.from_dict(lat.to_dict()) == lat

    def test_unknown_potential(self):
        with pytest.raises(ValueError):
            potential_from_dict({"kind": "lennard_jones"})

    def test_fpu_form(self):
        assert FPUBeta(1.0, 0.5).value(2.0) == pytest.approx(4.0 + 0.5 * 16)

    def test_quartic_onsite_form(self):
        assert QuarticOnsite(2.0, 4.0).value(1.0) == pytest.approx(1.0 + 1.0)


class TestGibbs:
    def test_single_pinned_site_variance(self):
        lat = chain(1, onsite=PinnedQuadratic(1.0))
        rng = np.random.default_rng(1)
        q = np.array([sample_gibbs(lat, 2.0, rng).q[0, 0] for _ in range(20000)])
        se = q.var() * math.sqrt(2 / q.size)
        assert abs(q.var() - 2.0) < 3 * se

    def test_momentum_mean_zero(self):
        lat = chain(1000, onsite=PinnedQuadratic(1.0))
        p = sample_gibbs(lat, 1.5, np.random.default_rng(2)).p
        assert abs(p.mean()) < 3 * p.std() / math.sqrt(p.size)

    def test_fpu_kinetic_temperature(self):
        lat = chain(500, pair=FPUBeta(1.0, 1.0))
        p = sample_gibbs(lat, 0.7, np.random.default_rng(3)).p
        v = p[:, 0] ** 2
        assert abs(v.mean() - 0.7) < 3 * v.std() / math.sqrt(v.size)

    def test_non_confining_rejected(self):
        from dataclasses import dataclass

        @dataclass(frozen=True)
        class Flat(Harmonic):
            confining = False
            kind = "flat"
        with pytest.raises(ValueError):
            sample_gibbs(chain(3, pair=Flat()), 1.0, np.random.default_rng(0))

    def test_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            sample_gibbs(chain(3), 0.0, np.random.default_rng(0))

    def test_mala_pinned_quartic_second_moment(self):
        # single site: exact <q^2> of exp(-q^4/(4T)) by quadrature
        lat = chain(1, onsite=QuarticOnsite(0.0, 1.0))
        T = 1.0
        x = np.linspace(-6, 6, 20001)
        w = np.exp(-x ** 4 / 4 / T)
        exact = np.trapezoid(x * x * w, x) / np.trapezoid(w, x)
        rng = np.random.default_rng(4)
        q = np.array([sample_gibbs(lat, T, rng, burn_in=200).q[0, 0] for _ in range(3000)])
        assert abs((q ** 2).mean() - exact) < 4 * (q ** 2).std() / math.sqrt(q.size)
