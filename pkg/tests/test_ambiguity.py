import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ofdmpath.ambiguity import (
    AmbiguityLookup,
    ReferenceOnlyError,
    ambiguity_approx,
    ambiguity_exact,
    ambiguity_grid,
    ambiguity_psk_closed,
    ambiguity_psk_null_dc,
    ambiguity_surface,
    ambiguity_uniform,
    correlation_vector,
    gram_matrix,
)
from ofdmpath.signal_model import (
    MultipathChannel,
    NoiseSpec,
    apply_channel,
    channel_coeffs,
    generate_symbols,
    ieee80211,
    omega_matrix,
    vec,
)
from ofdmpath.waveform import rect_window_ambiguity

from conftest import small_cfg


def _brute_approx(cfg, X, tau, nu):
    # direct double loop, independent of the vectorised steering code
    K, L = cfg.K, cfg.L
    s = 0j
    for l in range(L):
        for k in range(K):
            c = k - K // 2
            s += abs(X[l, k]) ** 2 * np.exp(-2j * np.pi * l * nu * cfg.Td) * np.exp(2j * np.pi * c * tau / cfg.T)
    return s / (K * L)


class TestApprox:
    def test_origin_is_one(self):
        cfg = small_cfg(K=8, L=4)
        X = generate_symbols(cfg, "psk", 4, seed=0)
        assert ambiguity_approx(cfg, X, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_matches_loop(self, rng):
        cfg = small_cfg(K=7, L=5, null_set={2})
        X = generate_symbols(cfg, "psk", 8, seed=1) * rng.uniform(0.5, 2, (5, 7))
        for tau, nu in [(0.0, 0.0), (3e-7, 1e4), (-1e-6, -3.3e4)]:
            assert ambiguity_approx(cfg, X, tau, nu) == pytest.approx(_brute_approx(cfg, X, tau, nu), abs=1e-13)

    def test_first_delay_null(self):
        cfg = small_cfg(K=16, L=4)
        X = generate_symbols(cfg, "psk", 4, seed=3)
        assert abs(ambiguity_approx(cfg, X, cfg.T / cfg.K, 0.0)) < 1e-14

    def test_first_doppler_null(self):
        cfg = small_cfg(K=16, L=8)
        X = generate_symbols(cfg, "ones")
        assert abs(ambiguity_approx(cfg, X, 0.0, 1 / (cfg.L * cfg.Td))) < 1e-14

    def test_broadcasting(self):
        cfg = small_cfg(K=8, L=4)
        X = generate_symbols(cfg, "ones")
        taus = np.linspace(-1e-6, 1e-6, 5)
        nus = np.linspace(-2e4, 2e4, 3)
        out = ambiguity_approx(cfg, X, taus[None, :], nus[:, None])
        np.testing.assert_allclose(out, ambiguity_surface(cfg, X, taus, nus), atol=1e-14)

    def test_uniform_closed_form_is_exact(self):
        cfg = small_cfg(K=52, L=90, T=6.4e-6, Tcp=1.6e-6)
        X = generate_symbols(cfg, "ones")
        taus = np.linspace(-3e-7, 3e-7, 40)
        nus = np.linspace(-3e3, 3e3, 40)
        ref = ambiguity_surface(cfg, X, taus, nus)
        closed = ambiguity_uniform(cfg, taus[None, :], nus[:, None])
        assert np.max(np.abs(ref - closed)) < 1e-12

    def test_uniform_at_dirichlet_singularities(self):
        cfg = small_cfg(K=8, L=4)
        # tau = T and nu = 1/Td are full periods of the kernels
        assert ambiguity_uniform(cfg, cfg.T, 0.0) == pytest.approx(1.0, abs=1e-12)
        assert ambiguity_uniform(cfg, 0.0, 1 / cfg.Td) == pytest.approx(1.0, abs=1e-12)
        assert ambiguity_uniform(cfg, cfg.T, 1 / cfg.Td) == pytest.approx(1.0, abs=1e-12)

    @given(tau=st.floats(-2e-6, 2e-6), nu=st.floats(-1e5, 1e5))
    def test_peak_at_origin(self, tau, nu):
        cfg = small_cfg(K=12, L=6, null_set={7})
        X = generate_symbols(cfg, "ones")
        assert abs(ambiguity_approx(cfg, X, tau, nu)) <= abs(ambiguity_approx(cfg, X, 0, 0)) + 1e-12

    def test_doppler_null_scales_with_L_delay_null_does_not(self):
        for L in (90, 180):
            cfg = small_cfg(K=52, L=L)
            X = generate_symbols(cfg, "ones")
            assert abs(ambiguity_approx(cfg, X, 0.0, 1 / (L * cfg.Td))) < 1e-12
            assert abs(ambiguity_approx(cfg, X, cfg.T / cfg.K, 0.0)) < 1e-12


class TestClosedForms:
    def test_psk_closed_values(self):
        cfg = ieee80211(90, dc_null=False)
        assert ambiguity_psk_closed(cfg, 0.0, 0.0) == pytest.approx(1.0)
        assert abs(ambiguity_psk_closed(cfg, 0.0, 1 / (cfg.L * cfg.Td))) < 1e-15
        nu = 0.5 / (cfg.L * cfg.Td)
        assert abs(ambiguity_psk_closed(cfg, 0.0, nu)) == pytest.approx(2 / np.pi, abs=1e-12)

    def test_psk_closed_null_location_matches_approx(self):
        cfg = ieee80211(90, dc_null=False)
        X = generate_symbols(cfg, "ones")
        for tau, nu in [(cfg.T / cfg.K, 0.0), (0.0, 1 / (cfg.L * cfg.Td))]:
            assert abs(ambiguity_psk_closed(cfg, tau, nu)) < 1e-12
            assert abs(ambiguity_approx(cfg, X, tau, nu)) < 1e-12

    def test_psk_closed_is_only_approximate(self):
        # sinc vs Dirichlet and a dropped phase: magnitudes close near the
        # origin, complex values are not
        cfg = ieee80211(90, dc_null=False)
        X = generate_symbols(cfg, "ones")
        taus = np.linspace(-3e-7, 3e-7, 40)
        nus = np.linspace(-3e3, 3e3, 40)
        exact = ambiguity_surface(cfg, X, taus, nus)
        closed = ambiguity_psk_closed(cfg, taus[None, :], nus[:, None])
        assert np.max(np.abs(np.abs(exact) - np.abs(closed))) < 1e-3
        assert np.max(np.abs(exact - closed)) > 0.5

    def test_null_dc_origin(self):
        assert ambiguity_psk_null_dc(ieee80211(90), 0.0, 0.0) == pytest.approx(1.0)

    def test_null_dc_separable_in_nu(self):
        cfg = ieee80211(90)
        taus = np.array([0.0, 3e-8, 1.1e-7, 2.5e-7])
        r = ambiguity_psk_null_dc(cfg, taus, 200.0) / ambiguity_psk_null_dc(cfg, taus, 900.0)
        np.testing.assert_allclose(r, r[0], rtol=1e-12)

    def test_null_dc_deviates_from_summation(self):
        # the DC-nulled sum is (K-1)/K at the origin; the closed form gives 1
        cfg = ieee80211(90)
        X = generate_symbols(cfg, "ones")
        assert ambiguity_approx(cfg, X, 0.0, 0.0) == pytest.approx(51 / 52)
        taus = np.linspace(-3e-7, 3e-7, 40)
        nus = np.linspace(-3e3, 3e3, 40)
        dev = np.abs(np.abs(ambiguity_surface(cfg, X, taus, nus))
                     - np.abs(ambiguity_psk_null_dc(cfg, taus[None, :], nus[:, None])))
        assert 1e-3 < dev.max() < 5e-2


def _exact_by_integration(cfg, X, tau, nu, n=4000):
    # integral x(t) x*(t - tau) exp(-j 2 pi nu t) dt on a fine midpoint grid,
    # with x built from the rectangular-window symbol definition
    t_end = cfg.L * cfg.Td + abs(tau)
    t = (np.arange(int(n * cfg.L)) + 0.5) * (t_end + abs(tau)) / (n * cfg.L) - abs(tau)
    dt = t[1] - t[0]

    def x(tt):
        out = np.zeros(tt.shape, complex)
        c = np.arange(cfg.K) - cfg.K // 2
        for l in range(cfg.L):
            m = (tt >= l * cfg.Td) & (tt < (l + 1) * cfg.Td)
            out[m] = np.exp(2j * np.pi * np.outer(tt[m] - cfg.Tcp, c) / cfg.T) @ X[l]
        return out / np.sqrt(cfg.K * cfg.L * cfg.Td)

    return np.sum(x(t) * np.conj(x(t - tau)) * np.exp(-2j * np.pi * nu * t)) * dt


class TestExact:
    def test_origin_mean_over_psk_is_one(self):
        # one packet is not unit energy (subcarriers are not orthogonal over
        # the CP-extended window); the PSK average is
        cfg = small_cfg(K=4, L=2)
        m = np.mean([ambiguity_exact(cfg, generate_symbols(cfg, "psk", 4, seed=s), 0.0, 0.0)
                     for s in range(2000)])
        assert m == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("tau,nu", [(0.0, 0.0), (3e-7, 2e4), (-1.1e-6, -5e4), (9e-6, 1e3)])
    def test_matches_numerical_integral(self, tau, nu):
        cfg = small_cfg(K=4, L=2)
        X = generate_symbols(cfg, "psk", 4, seed=11)
        ref = _exact_by_integration(cfg, X, tau, nu)
        assert ambiguity_exact(cfg, X, tau, nu) == pytest.approx(ref, abs=1e-3)

    def test_psk_average_reduces_to_approx_times_window(self):
        # cross terms have zero mean over random PSK: E[A] = Atilde * A_w
        cfg = small_cfg(K=4, L=2)
        tau, nu = 2e-7, 1.5e4
        draws = [ambiguity_exact(cfg, generate_symbols(cfg, "psk", 4, seed=s), tau, nu) for s in range(400)]
        pred = ambiguity_approx(cfg, np.ones((2, 4)), tau, nu) * rect_window_ambiguity(cfg, tau, nu)
        # window phase convention differs by the CP offset; compare magnitudes
        assert abs(np.mean(draws)) == pytest.approx(abs(pred), abs=0.05)

    def test_psk_average_near_approx(self):
        cfg = small_cfg(K=4, L=2)
        X1 = np.ones((2, 4))
        for tau, nu in [(0.0, 0.0), (1e-7, 5e3), (-2e-7, -1e4)]:
            m = np.mean([ambiguity_exact(cfg, generate_symbols(cfg, "psk", 4, seed=s), tau, nu)
                         for s in range(400)])
            assert abs(abs(m) - abs(ambiguity_approx(cfg, X1, tau, nu))) <= 0.15

    def test_conjugate_symmetry_magnitude(self):
        cfg = small_cfg(K=4, L=2)
        X = np.ones((2, 4))
        for tau in np.linspace(-1e-6, 1e-6, 5):
            for nu in np.linspace(-4e4, 4e4, 5):
                a = ambiguity_exact(cfg, X, tau, nu)
                b = ambiguity_exact(cfg, X, -tau, -nu)
                assert abs(a) == pytest.approx(abs(b), abs=1e-12)

    def test_size_guard(self):
        cfg = small_cfg(K=64, L=65)
        with pytest.raises(ReferenceOnlyError):
            ambiguity_exact(cfg, np.ones((65, 64)), 0.0, 0.0)


def _instance(seed, K=None, L=None, P=None, nulls=False):
    rng = np.random.default_rng(seed)
    K = K or int(rng.integers(2, 17))
    L = L or int(rng.integers(2, 9))
    P = P or int(rng.integers(1, 5))
    null_set = {int(rng.integers(1, K + 1))} if nulls and K > 2 else set()
    cfg = small_cfg(K=K, L=L, null_set=null_set)
    X = generate_symbols(cfg, "psk", 4, seed=seed)
    chan = MultipathChannel(rng.standard_normal(P) + 1j * rng.standard_normal(P),
                            rng.uniform(0, 1.6e-6, P), rng.uniform(-2e4, 2e4, P))
    return cfg, X, chan


class TestGram:
    def test_single_tap(self):
        cfg = small_cfg(K=6, L=3)
        R = gram_matrix(cfg, np.ones((3, 6)), [1e-7], [50.0])
        np.testing.assert_allclose(R, [[18.0]])

    @given(seed=st.integers(0, 2**32 - 1), nulls=st.booleans())
    def test_matches_brute_force(self, seed, nulls):
        cfg, X, chan = _instance(seed, nulls=nulls)
        Om = omega_matrix(cfg, X, chan.tau, chan.nu)
        G = Om.conj().T @ Om
        R = gram_matrix(cfg, X, chan.tau, chan.nu)
        assert np.max(np.abs(R - G)) <= 1e-10 * np.max(np.abs(G))
        np.testing.assert_allclose(R, R.conj().T, atol=0)
        assert np.linalg.eigvalsh(R).min() >= -1e-9 * cfg.K * cfg.L

    def test_general_profile(self, rng):
        cfg = small_cfg(K=5, L=4)
        X = rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))
        taus, nus = [0.0, 2e-7, 9e-7], [0.0, 3e3, -8e3]
        lookup = AmbiguityLookup(cfg, X)
        assert lookup.kind == "general"
        Om = omega_matrix(cfg, X, taus, nus)
        np.testing.assert_allclose(gram_matrix(cfg, X, taus, nus, lookup), Om.conj().T @ Om, atol=1e-10)

    def test_lookup_kinds(self):
        assert AmbiguityLookup(small_cfg(), np.ones((2, 4))).kind == "uniform"
        assert AmbiguityLookup(small_cfg(null_set={2}), generate_symbols(small_cfg(null_set={2}))).kind == "separable"

    def test_lookup_memoises(self):
        lk = AmbiguityLookup(small_cfg(K=8, L=4), np.ones((4, 8)))
        lk(1e-7, 10.0)
        lk(1e-7, 10.0)
        assert len(lk._cache) == 1

    def test_delay_cell_separation_decouples(self):
        cfg = small_cfg(K=16, L=4)
        X = generate_symbols(cfg, "psk", 4, seed=2)
        R = gram_matrix(cfg, X, [1e-7, 1e-7 + cfg.T / cfg.K], [300.0, 300.0])
        assert abs(R[0, 1]) < 1e-12


class TestCorrelation:
    def test_coherent_single_tap(self):
        cfg = small_cfg(K=8, L=6)
        a, tau, nu = 0.7 - 0.2j, 3e-7, 4e3
        X = np.ones((6, 8))
        Y = channel_coeffs(cfg, MultipathChannel([a], [tau], [nu]))
        np.testing.assert_allclose(correlation_vector(cfg, Y, X, [tau], [nu]), [48 * a], atol=1e-12)

    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_brute_force(self, seed):
        cfg, X, chan = _instance(seed)
        Y = apply_channel(X, channel_coeffs(cfg, chan), NoiseSpec.from_snr(cfg, 10, seed=seed))
        Om = omega_matrix(cfg, X, chan.tau, chan.nu)
        ref = Om.conj().T @ vec(Y)
        w = correlation_vector(cfg, Y, X, chan.tau, chan.nu)
        assert np.max(np.abs(w - ref)) <= 1e-10 * max(np.max(np.abs(ref)), 1e-300)

    def test_zero_observation(self):
        cfg = small_cfg(K=8, L=6)
        w = correlation_vector(cfg, np.zeros((6, 8)), np.ones((6, 8)), [0.0, 1e-7], [0.0, 1.0])
        np.testing.assert_array_equal(w, 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            correlation_vector(small_cfg(K=8, L=6), np.zeros((8, 6)), None, [0.0], [0.0])


class TestGrid:
    def test_rows_and_axes(self):
        cfg = ieee80211(90)
        taus = np.linspace(-2e-7, 2e-7, 3)
        nus = np.linspace(-1e3, 1e3, 5)
        g = ambiguity_grid(cfg, generate_symbols(cfg), taus, nus)
        assert g.values.shape == (5, 3)
        rows = list(g.rows())
        assert len(rows) == 15
        tau, nu, re, im, ab = rows[7]
        assert (tau, nu) == (taus[1], nus[2])
        assert ab == pytest.approx(abs(complex(re, im)))

    @pytest.mark.parametrize("L,null_hz", [(90, 1388.9), (242, 516.5)])
    def test_doppler_null_in_preset_grid(self, L, null_hz):
        cfg = ieee80211(L)
        nu0 = 1 / (L * cfg.Td)
        assert nu0 == pytest.approx(null_hz, abs=0.1)
        g = ambiguity_grid(cfg, generate_symbols(cfg), [0.0], [0.0, nu0])
        assert abs(g.values[1, 0]) < 1e-12

    def test_delay_dip_with_dc_null(self):
        # with the DC carrier removed the T/K point is a shallow local minimum
        cfg = ieee80211(90)
        X = generate_symbols(cfg)
        taus = cfg.T / cfg.K + np.array([-5e-9, 0.0, 5e-9])
        v = np.abs(ambiguity_approx(cfg, X, taus, 0.0))
        assert v[1] == pytest.approx(1 / 52, abs=1e-3)
        assert v[1] < v[0] and v[1] < v[2]

    def test_unknown_formula(self):
        with pytest.raises(ValueError):
            ambiguity_grid(small_cfg(), np.ones((2, 4)), [0.0], [0.0], "bogus")
