import math

import numpy as np
import pytest

from gblab.lattice import (
    SpacetimeSpectrum,
    Trajectory,
    field_from_modes,
    make_lattice,
    make_tau_grid,
    zero_field,
)
from gblab.norms import (
    NormSpec,
    besov_1d,
    besov_norm,
    difference_norm,
    dyadic_shells,
    everything,
    h_norm,
    k_band,
    lp_bump,
    mod_gt_k,
    mod_gt_k2,
    mod_le_k,
    mod_le_k2,
    mod_much_gt_k2,
    mod_shell,
    norm_report,
    project,
    ws_norm,
    xsb_norm,
    ys_norm,
)

from conftest import random_spectrum


def spectrum_cell(lattice, tau, freq, tau_value, weight=1.0):
    c = np.zeros((tau.size, lattice.modes), dtype=complex)
    i_tau = int(np.argmin(np.abs(tau - tau_value)))
    c[i_tau, lattice.index_of(freq)] = weight
    return SpacetimeSpectrum(lattice, tau, c), tau[i_tau]


class TestHNorm:
    def test_zero(self, small_lattice):
        assert h_norm(zero_field(small_lattice), -0.5) == 0.0

    def test_single_unit_mode_at_zero(self):
        for lam in (1.0, 4.0):
            lat = make_lattice(lam, 2.0)
            f = field_from_modes(lat, {0.0: 1.0})
            for s in (-0.75, 0.0, 1.5):
                assert h_norm(f, s) == pytest.approx(lam**-0.5, rel=1e-14)

    def test_two_neighbor_modes_asymptotics(self):
        # two unit modes at N and N+1/lam: exact value vs sqrt(2) lam^-1/2 N^s
        lam, N, s = 4.0, 64.0, -0.5
        lat = make_lattice(lam, 80.0)
        f = field_from_modes(lat, {N: 1.0, N + 1 / lam: 1.0})
        exact = math.sqrt(
            (1 / lam) * ((1 + N**2) ** s + (1 + (N + 1 / lam) ** 2) ** s)
        )
        assert h_norm(f, s) == pytest.approx(exact, rel=1e-14)
        assert exact == pytest.approx(math.sqrt(2 / lam) * N**s, rel=2e-2)


class TestXsbNorm:
    def test_single_cell(self):
        lat = make_lattice(2.0, 2.0)
        tau = make_tau_grid(10.0, 0.5)
        u, tau0 = spectrum_cell(lat, tau, 1.5, -3.0, weight=2.0)
        s, b = -0.5, 0.375
        expected = (
            2.0
            * (1 + 1.5**2) ** (s / 2)
            * (1 + (tau0 + 1.5**2) ** 2) ** (b / 2)
            * math.sqrt(u.dtau / lat.lam)
        )
        assert xsb_norm(u, s, b) == pytest.approx(expected, rel=1e-12)

    def test_b_zero_is_weighted_l2(self, rng):
        lat = make_lattice(2.0, 3.0)
        tau = make_tau_grid(15.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        w = (1 + lat.k**2) ** (-0.25 / 2)
        ref = math.sqrt(np.sum(np.abs(u.coeff * w[None, :]) ** 2) * u.dtau / lat.lam)
        assert xsb_norm(u, -0.25, 0.0) == pytest.approx(ref, rel=1e-12)

    def test_free_evolution_factorizes(self):
        # windowed free evolution: xsb norm = ||window||_{H^b} ||phi||_{H^s}
        from gblab.lattice import time_transform
        from gblab.solver import bump_psi, free_trajectory

        lat = make_lattice(1.0, 2.0)
        phi = field_from_modes(lat, {-2.0: 0.7, 0.0: 1.0, 1.0: -0.5j})
        t = np.linspace(-2.5, 2.5, 4001)
        traj = free_trajectory(phi, t)
        tau = make_tau_grid(60.0, 0.05)
        u = time_transform(traj, bump_psi, tau)
        for s, b in [(-0.5, 1.0), (-0.25, 0.375)]:
            # 1-d oracle for the window's H^b norm on the same tau resolution
            dt = t[1] - t[0]
            sigma = make_tau_grid(60.0, 0.05)
            w_hat = (dt / math.sqrt(2 * math.pi)) * (
                np.exp(-1j * np.outer(sigma, t)) @ bump_psi(t)
            )
            hb = math.sqrt(np.sum((1 + sigma**2) ** b * np.abs(w_hat) ** 2) * 0.05)
            assert xsb_norm(u, s, b) == pytest.approx(hb * h_norm(phi, s), rel=1e-6)


class TestYsNorm:
    def test_zero(self, small_lattice, small_spectrum_grid):
        u = SpacetimeSpectrum(
            small_lattice,
            small_spectrum_grid,
            np.zeros((small_spectrum_grid.size, small_lattice.modes), dtype=complex),
        )
        assert ys_norm(u, -0.5) == 0.0

    def test_single_cell(self):
        lat = make_lattice(4.0, 1.0)
        tau = make_tau_grid(5.0, 0.25)
        u, _ = spectrum_cell(lat, tau, 0.5, 2.0, weight=3.0)
        expected = u.dtau * (1 + 0.25) ** (-0.25) * 3.0 * lat.lam**-0.5
        assert ys_norm(u, -0.5) == pytest.approx(expected, rel=1e-12)

    def test_cauchy_schwarz_vs_xsb(self, rng):
        # on <tau+k^2> <= M the L1-in-tau norm is at most (2M dtau-free) ... the
        # discrete Cauchy-Schwarz constant is the tau-measure of the support
        lat = make_lattice(2.0, 4.0)
        tau = make_tau_grid(40.0, 0.25)
        M = 8.0
        for _ in range(20):
            u = project(random_spectrum(lat, tau, rng), mod_shell(M))
            lhs = ys_norm(u, -0.5)
            # support of <tau+k^2> ~ M in tau has length <= 2*sqrt(4M^2-1)
            c = math.sqrt(2.0 * math.sqrt(4 * M * M - 1))
            assert lhs <= c * xsb_norm(u, -0.5, 0.0) * (1 + 1e-9)


class TestProjections:
    def test_full_predicate_is_identity(self, rng):
        lat = make_lattice(1.0, 3.0)
        tau = make_tau_grid(20.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        assert np.array_equal(project(u, everything()).coeff, u.coeff)

    def test_predicate_and_complement(self, rng):
        lat = make_lattice(1.0, 3.0)
        tau = make_tau_grid(20.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        low = project(u, mod_le_k())
        high = project(u, mod_gt_k())
        assert np.abs(project(low, mod_gt_k()).coeff).max() == 0.0
        assert np.abs(low.coeff + high.coeff - u.coeff).max() < 1e-15

    def test_idempotent(self, rng):
        lat = make_lattice(2.0, 3.0)
        tau = make_tau_grid(20.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        p = mod_le_k2() & k_band(0.5, 2.0)
        once = project(u, p)
        twice = project(once, p)
        assert np.array_equal(once.coeff, twice.coeff)

    def test_shells_partition(self, rng):
        lat = make_lattice(2.0, 4.0)
        tau = make_tau_grid(40.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        shells = dyadic_shells(u)
        total = sum(piece.coeff for _, piece in shells)
        assert np.abs(total - u.coeff).max() < 1e-12
        energy = sum(piece.l2_norm() ** 2 for _, piece in shells)
        assert energy == pytest.approx(u.l2_norm() ** 2, rel=1e-12)

    def test_shell_membership(self):
        lat = make_lattice(1.0, 1.0)
        tau = make_tau_grid(10.0, 0.5)
        u, tau0 = spectrum_cell(lat, tau, 0.0, 4.9)  # <4.9> ~ 5 -> shell M=4
        assert abs(math.sqrt(1 + tau0**2) - 5.0) < 0.2
        for M, piece in dyadic_shells(u):
            mass = piece.l2_norm()
            if M == 4.0:
                assert mass > 0
            else:
                assert mass == 0.0

    def test_projections_commute_with_k_multipliers(self, rng):
        from gblab.reduction import omega_sq

        lat = make_lattice(2.0, 3.0)
        tau = make_tau_grid(20.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        p = mod_gt_k()
        a = omega_sq(project(u, p), 2.0)
        b = project(omega_sq(u, 2.0), p)
        assert np.abs(a.coeff - b.coeff).max() < 1e-15


class TestWsNorm:
    def test_low_modulation_only_reduces_to_xs1(self, rng):
        lat = make_lattice(2.0, 4.0)
        tau = make_tau_grid(40.0, 0.25)
        u = project(random_spectrum(lat, tau, rng), mod_le_k())
        for s in (-0.5, -0.3, -0.25):
            assert ws_norm(u, s) == pytest.approx(xsb_norm(u, s, 1.0), rel=1e-12)

    def test_domination_by_xs1(self, rng):
        lat = make_lattice(2.0, 4.0)
        tau = make_tau_grid(60.0, 0.25)
        for s in (-0.5, -0.25):
            worst = 0.0
            for _ in range(25):
                u = random_spectrum(lat, tau, rng, k_decay=1.0, mod_decay=0.75)
                worst = max(worst, ws_norm(u, s) / xsb_norm(u, s, 1.0))
            assert worst < 10.0

    def test_sandwich(self, rng):
        lat = make_lattice(2.0, 4.0)
        tau = make_tau_grid(60.0, 0.25)
        for s in (-0.5, -0.25):
            for _ in range(10):
                u = random_spectrum(lat, tau, rng, k_decay=0.5, mod_decay=0.5)
                w = ws_norm(u, s)
                assert xsb_norm(u, s, 0.0) <= w * (1 + 1e-9)
                assert ys_norm(u, s) <= 4.0 * w

    def test_rejects_s_out_of_range(self, rng):
        lat = make_lattice(1.0, 2.0)
        tau = make_tau_grid(10.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        with pytest.raises(ValueError):
            ws_norm(u, -0.2)
        with pytest.raises(ValueError):
            ws_norm(u, -0.6)


class TestBesov:
    def test_bump_partition_of_unity(self):
        x = np.linspace(-40, 40, 2001)
        total = sum(lp_bump(j, x) for j in range(8))
        assert np.abs(total - 1.0).max() < 1e-12

    def test_zero(self, small_lattice, small_spectrum_grid):
        u = SpacetimeSpectrum(
            small_lattice,
            small_spectrum_grid,
            np.zeros((small_spectrum_grid.size, small_lattice.modes), dtype=complex),
        )
        assert besov_norm(u, -0.5, 0.5) == 0.0

    def test_pure_tensor_factorizes(self, rng):
        lat = make_lattice(2.0, 4.0)
        tau = make_tau_grid(30.0, 0.25)
        a = (rng.standard_normal(tau.size) + 1j * rng.standard_normal(tau.size)) * np.exp(
            -((tau / 8) ** 2)
        )
        b = rng.standard_normal(lat.modes) + 1j * rng.standard_normal(lat.modes)
        u = SpacetimeSpectrum(lat, tau, np.outer(a, b))
        s, bb = -0.5, 0.5
        lhs = besov_norm(u, s, bb)
        rhs = besov_1d(a, tau, bb, u.dtau) * besov_1d(b, lat.k, s, 1 / lat.lam)
        assert lhs == pytest.approx(rhs, rel=1e-10)


class TestDifferenceNorm:
    def _traj_and_spectrum(self, rng, n_t=512):
        lat = make_lattice(1.0, 3.0)
        t = np.linspace(-4.0, 4.0, n_t + 1)
        envelope = np.exp(-(t**2))
        base = rng.standard_normal((8, lat.modes)) + 1j * rng.standard_normal((8, lat.modes))
        # smooth-in-time random field: few low temporal frequencies
        freqs = np.linspace(0.3, 2.0, 8)
        rows = np.zeros((t.size, lat.modes), dtype=complex)
        for f, row in zip(freqs, base):
            rows += np.outer(np.exp(1j * f * t), row)
        rows *= envelope[:, None]
        return Trajectory(lat, t, rows)

    def test_zero(self):
        lat = make_lattice(1.0, 2.0)
        t = np.linspace(0.0, 1.0, 33)
        traj = Trajectory(lat, t, np.zeros((t.size, lat.modes), dtype=complex))
        assert difference_norm(traj, -0.5, 0.5) == 0.0

    def test_rejects_bad_b(self, rng):
        traj = self._traj_and_spectrum(rng)
        with pytest.raises(ValueError):
            difference_norm(traj, -0.5, 1.0)

    def test_equivalence_band_with_besov(self, rng):
        # the time-difference form is equivalent to the block-sum form; the
        # constant must be stable under grid refinement
        from gblab.lattice import time_transform
        from gblab.solver import bump_psi

        ratios = {}
        for n_t in (512, 1024):
            traj = self._traj_and_spectrum(rng, n_t=n_t)
            window = lambda x: bump_psi(x / 2.0)
            tau = make_tau_grid(30.0, 0.25)
            u = time_transform(traj, window, tau)
            d = difference_norm(traj, -0.5, 0.5)
            bnorm = besov_norm(u, -0.5, 0.5)
            ratios[n_t] = d / bnorm
        for r in ratios.values():
            assert 0.05 < r < 20.0
        assert abs(ratios[1024] - ratios[512]) / ratios[512] < 0.25


class TestNormReport:
    def test_report_fields(self, rng):
        lat = make_lattice(2.0, 3.0)
        tau = make_tau_grid(20.0, 0.5)
        u = random_spectrum(lat, tau, rng)
        rep = norm_report(u, NormSpec(family="Ws", s=-0.5, m_max=1024.0))
        assert rep["family"] == "Ws"
        assert rep["lambda"] == 2.0
        assert rep["value"] == pytest.approx(ws_norm(u, -0.5, 1024.0))
        assert rep["shells"]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            NormSpec(family="bogus", s=0.0)
        with pytest.raises(ValueError):
            NormSpec(family="Ws", s=-0.5, m_max=3.0)


class TestNormAxioms:
    def test_homogeneity_and_triangle(self, rng):
        lat = make_lattice(2.0, 3.0)
        tau = make_tau_grid(30.0, 0.5)
        norms = [
            lambda u: xsb_norm(u, -0.5, 0.375),
            lambda u: ys_norm(u, -0.5),
            lambda u: ws_norm(u, -0.5),
            lambda u: besov_norm(u, -0.5, 0.5),
        ]
        for _ in range(5):
            u = random_spectrum(lat, tau, rng)
            v = random_spectrum(lat, tau, rng)
            both = u.with_coeff(u.coeff + v.coeff)
            scaled = u.with_coeff(3.7 * u.coeff)
            for n in norms:
                assert n(scaled) == pytest.approx(3.7 * n(u), rel=1e-10)
                assert n(both) <= (n(u) + n(v)) * (1 + 1e-10)
