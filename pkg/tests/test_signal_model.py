import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ofdmpath.signal_model import (
    MultipathChannel,
    NoiseSpec,
    OfdmConfig,
    apply_channel,
    channel_coeffs,
    generate_symbols,
    ieee80211,
    omega_matrix,
    steering_delay,
    steering_doppler,
    unvec,
    vec,
)

from conftest import small_cfg


class TestOfdmConfig:
    def test_derived_quantities(self):
        cfg = ieee80211(128)
        assert cfg.K == 52 and cfg.null_set == {27}
        assert cfg.n_active == 51
        assert cfg.Td == pytest.approx(8e-6)
        assert cfg.delay_cell == pytest.approx(6.4e-6 / 52)
        assert cfg.doppler_cell == pytest.approx(1 / (128 * 8e-6))
        np.testing.assert_array_equal(cfg.subcarrier_offsets[[0, 26, 51]], [-26, 0, 25])

    @pytest.mark.parametrize(
        "kw",
        [
            dict(K=1, L=4, T=1.0, Td=1.0, Tcp=0.0),
            dict(K=4, L=4, T=1.0, Td=1.5, Tcp=0.25),
            dict(K=4, L=4, T=-1.0, Td=-1.0, Tcp=0.0),
            dict(K=4, L=4, T=1.0, Td=1.0, Tcp=0.0, null_set=frozenset({5})),
        ],
    )
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            OfdmConfig(**kw)

    def test_with_L_keeps_everything_else(self):
        cfg = ieee80211(128).with_L(512)
        assert cfg.L == 512 and cfg.K == 52 and cfg.null_set == {27}


class TestSymbols:
    def test_all_ones(self):
        X = generate_symbols(small_cfg(), "ones")
        np.testing.assert_array_equal(X, np.ones((2, 4)))

    def test_null_column_zero(self):
        X = generate_symbols(small_cfg(null_set={3}), "ones")
        np.testing.assert_array_equal(X[:, 2], 0)
        np.testing.assert_array_equal(X[:, [0, 1, 3]], 1)

    def test_qpsk_grid(self):
        cfg = ieee80211(128)
        X = generate_symbols(cfg, "psk", 4, seed=7)
        act = X[:, cfg.active_mask]
        np.testing.assert_array_equal(X[:, 26], 0)
        np.testing.assert_allclose(np.abs(act), 1.0, atol=1e-15)
        pts = np.array([1, 1j, -1, -1j])
        assert np.all(np.min(np.abs(act[..., None] - pts), axis=-1) < 1e-12)
        assert np.mean(np.abs(act) ** 2) == pytest.approx(1.0)

    def test_deterministic_given_seed(self):
        cfg = small_cfg(K=8, L=4)
        a = generate_symbols(cfg, "psk", 8, seed=3)
        b = generate_symbols(cfg, "psk", 8, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            generate_symbols(small_cfg(), "psk", 1)


class TestSteering:
    def test_zero_is_all_ones(self):
        cfg = small_cfg()
        np.testing.assert_array_equal(steering_doppler(cfg, 0.0), np.ones(2))
        np.testing.assert_array_equal(steering_delay(cfg, 0.0), np.ones(4))

    def test_doppler_half_cycle(self):
        cfg = small_cfg(L=2, T=6.4e-6, Tcp=1.6e-6)
        np.testing.assert_allclose(steering_doppler(cfg, 62500.0), [1, -1], atol=1e-12)

    def test_delay_quarter_symbol(self):
        cfg = small_cfg(K=4)
        phi = steering_delay(cfg, 1.6e-6)
        assert phi[0] == pytest.approx(-1.0)
        # c_k = -2, -1, 0, 1 -> phases -pi, -pi/2, 0, pi/2
        np.testing.assert_allclose(phi, [-1, -1j, 1, 1j], atol=1e-12)

    def test_matrix_shapes(self):
        cfg = small_cfg(K=6, L=5)
        assert steering_doppler(cfg, [0.0, 1.0, 2.0]).shape == (5, 3)
        assert steering_delay(cfg, [0.0, 1e-7]).shape == (6, 2)

    @given(nu=st.floats(-1e5, 1e5), tau=st.floats(-1e-5, 1e-5))
    def test_unit_modulus_and_symmetry(self, nu, tau):
        cfg = small_cfg(K=8, L=5)
        psi = steering_doppler(cfg, nu)
        phi = steering_delay(cfg, tau)
        np.testing.assert_allclose(np.abs(psi), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.abs(phi), 1.0, atol=1e-12)
        np.testing.assert_allclose(steering_doppler(cfg, -nu), psi.conj(), atol=1e-12)

    @given(tau=st.floats(0, 1e-5))
    def test_delay_periodic_in_T(self, tau):
        cfg = small_cfg(K=8)
        np.testing.assert_allclose(steering_delay(cfg, tau + cfg.T), steering_delay(cfg, tau), atol=1e-9)


def _random_channel(rng, P, tau_max=1.6e-6, nu_max=2e4):
    a = rng.standard_normal(P) + 1j * rng.standard_normal(P)
    return MultipathChannel(a, rng.uniform(0, tau_max, P), rng.uniform(-nu_max, nu_max, P))


class TestChannel:
    def test_trivial_tap(self):
        cfg = small_cfg(K=4, L=3)
        H = channel_coeffs(cfg, MultipathChannel([1.0], [0.0], [0.0]))
        np.testing.assert_allclose(H, np.ones((3, 4)))

    def test_quarter_symbol_delay(self):
        cfg = small_cfg(K=4, L=2)
        H = channel_coeffs(cfg, MultipathChannel([1.0], [0.25 * cfg.T], [0.0]))
        assert H[0, 0] == pytest.approx(-1.0)

    def test_linear_in_taps(self, rng):
        cfg = small_cfg(K=8, L=6)
        c = _random_channel(rng, 2)
        parts = [channel_coeffs(cfg, MultipathChannel(c.a[i:i + 1], c.tau[i:i + 1], c.nu[i:i + 1])) for i in range(2)]
        np.testing.assert_allclose(channel_coeffs(cfg, c), parts[0] + parts[1], atol=1e-12)

    @given(
        P=st.integers(1, 5), K=st.integers(2, 64), L=st.integers(2, 64),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_matrix_and_direct_paths_agree(self, P, K, L, seed):
        cfg = small_cfg(K=K, L=L)
        c = _random_channel(np.random.default_rng(seed), P)
        Hm = channel_coeffs(cfg, c, "matrix")
        Hd = channel_coeffs(cfg, c, "direct")
        assert np.linalg.norm(Hm - Hd) <= 1e-12 * np.linalg.norm(Hd)
        assert np.all(np.abs(Hm) <= np.sum(np.abs(c.a)) * (1 + 1e-12))

    def test_rejects_negative_delay(self):
        with pytest.raises(ValueError):
            MultipathChannel([1.0], [-1e-9], [0.0])

    def test_arrays_read_only(self):
        c = MultipathChannel([1.0], [0.0], [0.0])
        with pytest.raises(ValueError):
            c.tau[0] = 1.0

    def test_model_warnings(self):
        cfg = ieee80211(16)
        ok = MultipathChannel([1.0], [100e-9], [100.0])
        bad = MultipathChannel([1.0, 1.0], [2e-6, 0.0], [0.0, 2e5])
        assert ok.model_warnings(cfg) == []
        assert len(bad.model_warnings(cfg)) == 2


class TestNoise:
    def test_sigma2_from_snr(self):
        cfg = ieee80211(128)
        assert NoiseSpec.from_snr(cfg, 100).sigma2 == pytest.approx(0.51)
        assert NoiseSpec.from_snr_db(cfg, 20).sigma2 == pytest.approx(0.51)
        assert NoiseSpec.from_snr(small_cfg(K=52, L=128), 100).sigma2 == pytest.approx(0.52)

    def test_noiseless_is_exact(self, rng):
        cfg = small_cfg(K=8, L=4)
        X = generate_symbols(cfg, "psk", 4, seed=1)
        H = channel_coeffs(cfg, _random_channel(rng, 3))
        np.testing.assert_array_equal(apply_channel(X, H, NoiseSpec.noiseless()), H * X)
        np.testing.assert_array_equal(apply_channel(np.ones_like(H), H, NoiseSpec.noiseless()), H)

    def test_empirical_variance(self):
        cfg = small_cfg(K=52, L=128)
        noise = NoiseSpec.from_snr(cfg, 100, seed=9)
        X = np.ones((cfg.L, cfg.K))
        Z = apply_channel(X, np.zeros_like(X), noise)
        assert np.mean(np.abs(Z) ** 2) == pytest.approx(0.52, rel=0.05)
        # circular: real and imaginary parts share the variance
        assert np.var(Z.real) == pytest.approx(np.var(Z.imag), rel=0.1)

    def test_seeded(self):
        cfg = small_cfg(K=8, L=4)
        X = np.ones((4, 8))
        a = apply_channel(X, X, NoiseSpec.from_snr(cfg, 10, seed=5))
        b = apply_channel(X, X, NoiseSpec.from_snr(cfg, 10, seed=5))
        np.testing.assert_array_equal(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            apply_channel(np.ones((2, 4)), np.ones((4, 2)), NoiseSpec.noiseless())


class TestOmega:
    def test_trivial_column(self):
        cfg = small_cfg(K=4, L=3)
        Om = omega_matrix(cfg, np.ones((3, 4)), [0.0], [0.0])
        np.testing.assert_allclose(Om, np.ones((12, 1)))

    def test_vec_ordering_symbol_fastest(self):
        G = np.arange(6).reshape(2, 3)
        np.testing.assert_array_equal(vec(G), [0, 3, 1, 4, 2, 5])
        np.testing.assert_array_equal(unvec(vec(G), 2, 3), G)

    def test_consistent_with_channel(self, rng):
        cfg = small_cfg(K=4, L=3)
        X = generate_symbols(cfg, "psk", 4, seed=2)
        c = _random_channel(rng, 2)
        Om = omega_matrix(cfg, X, c.tau, c.nu)
        np.testing.assert_allclose(unvec(Om @ c.a, 3, 4), channel_coeffs(cfg, c) * X, atol=1e-12)

    def test_gram_diagonal_is_KL(self, rng):
        cfg = small_cfg(K=6, L=5)
        X = generate_symbols(cfg, "psk", 8, seed=4)
        Om = omega_matrix(cfg, X, rng.uniform(0, 1e-6, 3), rng.uniform(-1e4, 1e4, 3))
        np.testing.assert_allclose(np.diag(Om.conj().T @ Om).real, 30.0)

    @given(L=st.integers(1, 9), K=st.integers(1, 9))
    def test_vec_roundtrip(self, L, K):
        G = np.arange(L * K).reshape(L, K) * (1 + 2j)
        np.testing.assert_array_equal(unvec(vec(G), L, K), G)
