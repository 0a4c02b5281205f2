import math

import numpy as np
import pytest

from berryemf import (DensityFloor, GridWaveFunction, InvalidConfig, InvalidEnsemble,
                      InvalidTemperature, MixtureEnsemble, VortexConfig, berry_connection_mb,
                      boltzmann_weights, chi_gradient, constant_field, curl_z,
                      factorization_check, mixture_connection, phase_from_chi)
from berryemf.field_core import VectorField2D

K = np.array([0.7, -0.4])
L = 8.0


def mesh(n, length=L):
    h = length / (n - 1)
    x = h * np.arange(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return xx, yy, h


def plane_wave(n, sigma=6.0):
    xx, yy, h = mesh(n)
    g = np.exp(-((xx - L / 2) ** 2 + (yy - L / 2) ** 2) / (2 * sigma ** 2))
    return GridWaveFunction.from_orbital(g * np.exp(1j * (K[0] * xx + K[1] * yy)), h)


def vortex_state(n):
    """exp(-i theta) r exp(-r^2/8): chi = 2 theta about the mesh centre."""
    xx, yy, h = mesh(n)
    dx, dy = xx - L / 2, yy - L / 2
    r = np.hypot(dx, dy)
    psi = r * np.exp(-1j * np.arctan2(dy, dx)) * np.exp(-r ** 2 / 8)
    return GridWaveFunction.from_orbital(psi, h), r, h


def vortex_expected(n):
    # A = -grad(chi)/2 with chi = 2 theta: minus the w = +1 angle gradient
    xx, yy, _ = mesh(n)
    # a unit-winding config centred on the mesh; the mesh centre is never evaluated
    cfg = VortexConfig.from_cores([(L / 2, L / 2, 1)], L + 1, L + 1, eps_core=1e-12)
    pts = np.stack([xx, yy], -1)
    r = np.hypot(xx - L / 2, yy - L / 2)
    out = np.zeros(xx.shape + (2,))
    ok = r > 0
    out[ok] = -chi_gradient(cfg)(pts[ok])
    return out


def max_err(values, expected, keep):
    return float(np.hypot(*(values - expected)[keep].T).max())


class TestGridWaveFunction:
    def test_normalization_enforced(self):
        xx, yy, h = mesh(9)
        with pytest.raises(InvalidConfig, match="norm"):
            GridWaveFunction(np.ones(xx.shape), h)
        psi = GridWaveFunction(np.ones(xx.shape), h, normalize=True)
        assert abs(psi.norm - 1) < 1e-12

    def test_grid_caps(self):
        with pytest.raises(InvalidConfig, match="capped"):
            GridWaveFunction(np.ones((65, 10)), 0.1, normalize=True)
        with pytest.raises(InvalidConfig, match="capped"):
            GridWaveFunction(np.ones((25, 3, 1, 25, 3, 1)), 0.1, normalize=True)

    def test_antisymmetry_enforced(self):
        xx, yy, h = mesh(6)
        a = np.exp(-xx ** 2)
        b = np.exp(-yy ** 2)
        sym = np.multiply.outer(a, b) + np.multiply.outer(b, a)
        with pytest.raises(InvalidConfig, match="antisymmetric"):
            GridWaveFunction(sym[:, :, None, :, :, None], h, normalize=True)

    def test_bad_rank(self):
        with pytest.raises(InvalidConfig):
            GridWaveFunction(np.ones((4, 4, 1, 4)), 0.1, normalize=True)


class TestConnection:
    def test_plane_wave(self):
        conn = berry_connection_mb(plane_wave(31))
        assert max_err(conn.values, K, ~conn.masked) < 2e-2

    def test_real_state_zero(self):
        xx, yy, h = mesh(15)
        psi = GridWaveFunction.from_orbital(np.exp(-(xx - 3) ** 2 - (yy - 4) ** 2 / 3), h)
        conn = berry_connection_mb(psi)
        assert np.all(conn.values[~conn.masked] == 0.0)

    def test_vortex_phase(self):
        psi, r, _ = vortex_state(31)
        conn = berry_connection_mb(psi)
        keep = ~conn.masked & (r >= 1.5)
        assert max_err(conn.values, vortex_expected(31), keep) < 2e-2

    def test_node_masked(self):
        psi, r, _ = vortex_state(31)   # odd mesh: the centre node is exactly zero
        conn = berry_connection_mb(psi)
        assert conn.n_masked == 1 and conn.masked[15, 15]
        assert np.isnan(conn.connection([L / 2, L / 2])).all()
        with pytest.raises(DensityFloor):
            berry_connection_mb(psi, strict=True)

    def test_global_phase(self):
        psi = plane_wave(21)
        turned = GridWaveFunction(psi.amplitudes * np.exp(0.83j), psi.spacing)
        np.testing.assert_allclose(berry_connection_mb(turned).values,
                                   berry_connection_mb(psi).values, rtol=1e-12, atol=1e-12)

    def test_density_integrates_to_one(self):
        conn = berry_connection_mb(plane_wave(21))
        assert conn.density.sum() * plane_wave(21).spacing ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_plane_wave_second_order(self):
        errs = []
        for n in (16, 31, 61):
            c = berry_connection_mb(plane_wave(n))
            errs.append(max_err(c.values, K, ~c.masked))
        r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
        assert 3.5 <= r1 <= 4.5 and 3.5 <= r2 <= 4.5


class TestTwoElectrons:
    def orbitals(self, n=21):
        xx, yy, h = mesh(n, 6.0)
        g = np.exp(-((xx - 3) ** 2 + (yy - 3) ** 2) / 8)
        phase = np.exp(1j * (0.5 * xx + 0.2 * yy))
        return g * phase, (xx - 3) * g * phase, h, phase

    def test_slater_common_phase(self):
        a, b, h, phase = self.orbitals()
        psi = GridWaveFunction.slater_pair(a, b, h)
        conn = berry_connection_mb(psi)
        assert max_err(conn.values, [0.5, 0.2], ~conn.masked) < 0.03
        rep = factorization_check(psi, phase)
        assert rep.residual < 1e-10

    def test_spin_singlet(self):
        a, b, h, _ = self.orbitals()
        up, dn = np.zeros(a.shape + (2,), complex), np.zeros(a.shape + (2,), complex)
        up[..., 0], dn[..., 1] = a, a
        psi = GridWaveFunction.slater_pair(up, dn, h)
        assert psi.spin_dim == 2 and psi.electron_count == 2
        conn = berry_connection_mb(psi)
        assert max_err(conn.values, [0.5, 0.2], ~conn.masked) < 0.03


class TestFactorization:
    def test_exact_phase(self):
        psi, r, h = vortex_state(31)
        xx, yy, _ = mesh(31)
        phase = phase_from_chi(2 * np.arctan2(yy - L / 2, xx - L / 2))
        rep = factorization_check(psi, phase)
        assert rep.residual < 1e-3 * h ** 2

    def test_real_state(self):
        xx, yy, h = mesh(15)
        psi = GridWaveFunction.from_orbital(np.exp(-(xx - 3) ** 2 - (yy - 4) ** 2), h)
        assert factorization_check(psi, np.ones(xx.shape)).residual == 0.0

    def test_wrong_phase_detected(self):
        psi = plane_wave(31)
        rep = factorization_check(psi, np.ones((31, 31)))
        assert rep.residual == pytest.approx(np.hypot(*K), rel=2e-2)

    def test_phase_modulus_checked(self):
        psi = plane_wave(11)
        with pytest.raises(ValueError):
            factorization_check(psi, 2 * np.ones((11, 11)))


class TestBoltzmann:
    def test_degenerate(self):
        np.testing.assert_allclose(boltzmann_weights([1.3, 1.3], 0.7), [0.5, 0.5])

    def test_huge_gap(self):
        p = boltzmann_weights([0.0, 1e6], 1.0)
        assert p[0] == 1.0 and p[1] < 1e-300

    def test_closed_form(self):
        e = math.exp(-1)
        np.testing.assert_allclose(boltzmann_weights([0, 1], 1.0), [1 / (1 + e), e / (1 + e)],
                                   rtol=1e-15)

    def test_no_overflow(self):
        p = boltzmann_weights([-5000.0, -4999.0], 1.0)
        assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("t", [0.0, -1.0, [1.0, 0.0]])
    def test_bad_temperature(self, t):
        with pytest.raises(InvalidTemperature):
            boltzmann_weights([0, 1], t)

    def test_temperature_field(self):
        w = boltzmann_weights([0, 1], lambda p: 1.0 + p[:, 0])
        p = w(np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert p.shape == (2, 2)
        assert p[1, 1] > p[0, 1]


class TestMixture:
    def test_opposite_members(self):
        ens = MixtureEnsemble([constant_field(K), constant_field(-K)], [0.5, 0.5])
        np.testing.assert_allclose(mixture_connection(ens)([[1, 2], [3, 4]]), 0.0, atol=1e-16)

    def test_single_member(self):
        ens = MixtureEnsemble([constant_field((0.3, -0.2))], [1.0])
        np.testing.assert_allclose(mixture_connection(ens)([0, 0]), [0.3, -0.2])

    def test_convex_combination(self):
        ens = MixtureEnsemble([constant_field((1, 0)), constant_field((0, 1))], [0.75, 0.25])
        np.testing.assert_allclose(mixture_connection(ens)([0, 0]), [0.75, 0.25])

    @pytest.mark.parametrize("p", [[0.5, 0.6], [1.2, -0.2], [1.0]])
    def test_invalid_probabilities(self, p):
        with pytest.raises(InvalidEnsemble):
            MixtureEnsemble([constant_field((1, 0)), constant_field((0, 1))], p)

    def test_linearity_and_permutation(self):
        f = [constant_field((1, 2)), constant_field((-3, 0.5)), constant_field((0, -1))]
        p, q = np.array([0.2, 0.5, 0.3]), np.array([0.6, 0.1, 0.3])
        pts = np.array([[0.1, 0.2]])
        mix = lambda fields, w: mixture_connection(MixtureEnsemble(fields, w))(pts)  # noqa: E731
        lam = 0.35
        np.testing.assert_allclose(mix(f, lam * p + (1 - lam) * q),
                                   lam * mix(f, p) + (1 - lam) * mix(f, q), atol=1e-15)
        np.testing.assert_allclose(mix(f[::-1], p[::-1]), mix(f, p), atol=1e-15)

    def test_from_wavefunctions(self):
        ens = MixtureEnsemble([plane_wave(21), plane_wave(21)], [0.3, 0.7])
        np.testing.assert_allclose(mixture_connection(ens)([4.0, 4.0]), K, atol=2e-2)

    def test_position_dependent_weights_make_curl(self):
        # two curl-free members; weights vary with x, so the mixture has curl
        a1, a2 = constant_field((0.0, 1.0)), constant_field((1.0, 0.0))
        ens = MixtureEnsemble.boltzmann([a1, a2], [0.0, 1.0], lambda p: 0.5 + 0.2 * p[:, 0])
        field = mixture_connection(ens)
        pts = np.array([[1.0, 1.0], [2.0, 0.5]])
        assert np.all(np.abs(curl_z(a1, pts, 1e-3)) < 1e-12)
        curl = curl_z(field, pts, 1e-3)
        assert np.all(np.abs(curl) > 1e-2)

    def test_bad_callable_probabilities(self):
        ens = MixtureEnsemble([constant_field((1, 0)), constant_field((0, 1))],
                              lambda p: np.full((len(p), 2), 0.7))
        with pytest.raises(InvalidEnsemble):
            mixture_connection(ens)([0, 0])

    def test_singular_members_kept(self):
        cfg = VortexConfig.from_cores([(1, 1, 1)], 3, 3)
        ens = MixtureEnsemble([chi_gradient(cfg), constant_field((0, 0))], [0.5, 0.5])
        field = mixture_connection(ens)
        assert isinstance(field, VectorField2D)
        np.testing.assert_array_equal(field.singular_points, cfg.positions)
