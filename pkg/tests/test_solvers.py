import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlris.channel import generate_channel
from xlris.config import child_rng, desk_profile
from xlris.dictionary import unified_dictionary
from xlris.measurement import gen_pilots, sensing_matrices, synthesize_observations
from xlris.solvers import (
    EstimateResult,
    Problem,
    SolverConfig,
    bomp,
    nmse,
    nmse_ratio,
    omp,
    pcsbl_1d,
    pcsbl_2d,
    posterior,
    reconstruct,
    run_method,
    somp,
    to_db,
)
from xlris.solvers.sbl import _estep, neighbour_sum


def crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def gaussian_matrix(rng, T, M):
    return crandn(rng, (T, M)) / np.sqrt(T)


def drifting_blocks(rng, M, P, n_blocks=4, block=8, drift_every=1):
    """Blocks of ``block`` coefficients whose start moves one index every ``drift_every`` columns."""
    spacing = M // n_blocks
    starts = spacing * np.arange(n_blocks) + rng.integers(0, spacing - block - P // drift_every, n_blocks)
    X = np.zeros((M, P), dtype=complex)
    for j in range(P):
        for s in starts:
            X[s + j // drift_every + np.arange(block), j] = crandn(rng, block)
    return X


# ---------------------------------------------------------------------------
# metric and reconstruction
# ---------------------------------------------------------------------------


class TestNmse:
    def test_examples(self):
        H = crandn(np.random.default_rng(0), (10, 3))
        assert nmse(H, H) == -300.0
        assert nmse(np.zeros_like(H), H) == pytest.approx(0.0, abs=1e-12)
        assert nmse(H / 2, H) == pytest.approx(10 * np.log10(0.25), abs=1e-12)
        assert nmse(H / 2, H) == pytest.approx(-6.0206, abs=1e-4)

    def test_zero_reference(self):
        with pytest.raises(ValueError):
            nmse_ratio(np.ones(3), np.zeros(3))

    def test_floor(self):
        assert to_db(0.0) == -300.0
        assert to_db(1e-40) == -300.0
        assert to_db(10.0) == pytest.approx(10.0)


class TestReconstruct:
    def test_round_trip_and_zero(self):
        cfg = desk_profile()
        u = unified_dictionary(cfg)
        H = generate_channel(cfg, child_rng(1, "rec", 0)).H
        X = np.sqrt(cfg.n_ris) * u.e_mu.conj().T @ H
        np.testing.assert_allclose(reconstruct(X, u), H, atol=1e-12)
        assert not np.any(reconstruct(np.zeros_like(X), u))


# ---------------------------------------------------------------------------
# greedy
# ---------------------------------------------------------------------------


class TestOmp:
    def test_single_column(self):
        rng = np.random.default_rng(1)
        A = gaussian_matrix(rng, 20, 50)
        A /= np.linalg.norm(A, axis=0)
        res = omp(A[:, 7], A)
        assert res.support == [7]
        assert res.x[7] == pytest.approx(1.0, abs=1e-9)
        assert res.residual_norms[-1] < 1e-9

    def test_zero_measurement(self):
        A = gaussian_matrix(np.random.default_rng(2), 10, 30)
        res = omp(np.zeros(10), A)
        assert res.support == [] and not np.any(res.x)

    @pytest.mark.parametrize("seed", range(10))
    def test_exact_recovery_of_3_sparse(self, seed):
        rng = np.random.default_rng(seed)
        A = gaussian_matrix(rng, 24, 80)
        support = rng.choice(80, 3, replace=False)
        x = np.zeros(80, dtype=complex)
        x[support] = crandn(rng, 3) + np.exp(1j * rng.uniform(0, 6, 3))
        res = omp(A @ x, A, SolverConfig(k_max=3))
        assert sorted(res.support) == sorted(support.tolist())
        np.testing.assert_allclose(res.x, x, atol=1e-8)

    def test_ties_go_to_lowest_index(self):
        A = np.eye(4, dtype=complex)
        res = omp(np.array([1, 0, 1, 0], dtype=complex), A, SolverConfig(k_max=1))
        assert res.support == [0]

    def test_residual_monotone_and_orthogonal(self):
        rng = np.random.default_rng(3)
        A = gaussian_matrix(rng, 30, 90)
        y = crandn(rng, 30)
        res = omp(y, A, SolverConfig(k_max=12))
        assert len(res.support) <= 12
        assert all(b <= a + 1e-12 for a, b in zip(res.residual_norms, res.residual_norms[1:]))
        r = y - A @ res.x
        assert np.max(np.abs(A[:, res.support].conj().T @ r)) <= 1e-8

    def test_noise_level_stop(self):
        rng = np.random.default_rng(4)
        A = gaussian_matrix(rng, 40, 100)
        y = crandn(rng, 40) * 0.1
        res = omp(y, A, SolverConfig(k_max=40), noise_var=0.01 * 2)
        assert res.iterations < 40
        assert res.residual_norms[-1] ** 2 <= 0.02 * 40

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), mag=st.floats(1e-3, 1e3), phase=st.floats(0, 6.28))
    def test_support_scale_equivariant(self, seed, mag, phase):
        rng = np.random.default_rng(seed)
        A = gaussian_matrix(rng, 16, 40)
        y = crandn(rng, 16)
        cfg = SolverConfig(k_max=5)
        base = omp(y, A, cfg).support
        assert omp(mag * np.exp(1j * phase) * y, A, cfg).support == base

    def test_rejects_non_finite(self):
        A = gaussian_matrix(np.random.default_rng(0), 4, 6)
        with pytest.raises(ValueError):
            omp(np.array([np.nan, 0, 0, 0]), A)


class TestSomp:
    def test_single_column_equals_omp(self):
        rng = np.random.default_rng(5)
        A = gaussian_matrix(rng, 20, 60)
        y = crandn(rng, 20)
        cfg = SolverConfig(k_max=6)
        a, b = omp(y, A, cfg), somp(y[:, None], A, cfg)
        assert a.support == b.support
        np.testing.assert_array_equal(a.x, b.x[:, 0])

    def test_common_support_recovered(self):
        rng = np.random.default_rng(6)
        A = gaussian_matrix(rng, 20, 60)
        support = [3, 17, 41, 55]
        X = np.zeros((60, 8), dtype=complex)
        X[support] = crandn(rng, (4, 8))
        res = somp(A @ X, A, SolverConfig(k_max=4))
        assert sorted(res.support) == support
        np.testing.assert_allclose(res.x, X, atol=1e-8)

    def test_drifting_support_hurts_somp(self):
        rng = np.random.default_rng(7)
        M, T, P, k = 120, 24, 8, 3
        somp_err, omp_err = [], []
        for _ in range(10):
            A = gaussian_matrix(rng, T, M)
            X = np.zeros((M, P), dtype=complex)
            for j in range(P):
                # disjoint supports: each column owns its own slice
                X[j * 15 + rng.choice(15, k, replace=False), j] = crandn(rng, k) + 1
            Y = A @ X
            cfg = SolverConfig(k_max=k)
            x_omp = np.stack([omp(Y[:, j], A, cfg).x for j in range(P)], axis=1)
            omp_err.append(nmse_ratio(x_omp, X))
            somp_err.append(nmse_ratio(somp(Y, A, cfg).x, X))
        assert np.mean(somp_err) > np.mean(omp_err)
        assert to_db(np.mean(omp_err)) < -100


class TestBomp:
    def test_block_size_one_is_omp(self):
        rng = np.random.default_rng(8)
        A = gaussian_matrix(rng, 20, 50)
        y = crandn(rng, 20)
        a = omp(y, A, SolverConfig(k_max=5))
        b = bomp(y, A, SolverConfig(k_max=5, block_size=1))
        assert a.support == b.support
        np.testing.assert_allclose(a.x, b.x, atol=1e-12)

    def test_one_block_in_one_iteration(self):
        rng = np.random.default_rng(9)
        A = gaussian_matrix(rng, 32, 64)
        x = np.zeros(64, dtype=complex)
        x[16:24] = crandn(rng, 8)
        res = bomp(A @ x, A, SolverConfig(block_size=8))
        assert res.support == [2] and res.iterations == 1
        np.testing.assert_allclose(res.x, x, atol=1e-8)

    def test_two_blocks_exact(self):
        rng = np.random.default_rng(10)
        A = gaussian_matrix(rng, 32, 64)
        x = np.zeros(64, dtype=complex)
        x[8:16] = crandn(rng, 8)
        x[48:56] = crandn(rng, 8)
        res = bomp(A @ x, A, SolverConfig(block_size=8, k_max=2))
        assert sorted(res.support) == [1, 6]
        np.testing.assert_allclose(res.x, x, atol=1e-8)


# ---------------------------------------------------------------------------
# Bayesian
# ---------------------------------------------------------------------------


def reference_sbl(y, A, a, b, noise_var, iters):
    """Textbook EM-SBL with independent complex Gaussian priors (no coupling)."""
    M = A.shape[1]
    alpha = np.ones(M)
    for _ in range(iters):
        sigma = np.linalg.inv(A.conj().T @ A / noise_var + np.diag(alpha))
        m = sigma @ A.conj().T @ y / noise_var
        alpha = (a + 1) / (b + np.abs(m) ** 2 + np.real(np.diag(sigma)))
    return m, alpha


class TestPcsbl:
    @pytest.mark.parametrize("T", [12, 40])
    def test_uncoupled_matches_reference_sbl(self, T):
        rng = np.random.default_rng(11)
        A = gaussian_matrix(rng, T, 30)
        x = np.zeros(30, dtype=complex)
        x[[2, 9, 20]] = crandn(rng, 3)
        y = A @ x + 0.05 * crandn(rng, T)
        y /= np.sqrt(np.mean(np.abs(y) ** 2))  # unit RMS so the internal rescale is the identity
        cfg = SolverConfig(coupling=0.0, max_iter=25, tol=1e-300)
        res = pcsbl_1d(y, A, cfg, noise_var=0.01)
        m, alpha = reference_sbl(y, A, cfg.a, cfg.b, 0.01, 25)
        assert res.iterations == 25
        np.testing.assert_allclose(res.x, m, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(res.alpha, alpha, rtol=1e-8)

    def test_zero_measurement(self):
        A = gaussian_matrix(np.random.default_rng(0), 8, 20)
        res = pcsbl_1d(np.zeros(8), A)
        assert not np.any(res.x)

    def test_woodbury_and_direct_estep_agree(self):
        rng = np.random.default_rng(12)
        A = gaussian_matrix(rng, 10, 25)
        Y = crandn(rng, (10, 3))
        prec = rng.uniform(0.5, 50, (25, 3))
        noise = np.array([0.1, 0.2, 0.05])
        m1, v1 = _estep(A, Y, prec, noise)
        # pad with zero rows: T >= M forces the direct branch without changing the posterior
        A2 = np.vstack([A, np.zeros((15, 25))])
        Y2 = np.vstack([Y, np.zeros((15, 3))])
        m2, v2 = _estep(A2, Y2, prec, noise)
        np.testing.assert_allclose(m1, m2, atol=1e-10)
        np.testing.assert_allclose(v1, v2, rtol=1e-8)
        for j in range(3):
            mean, sigma = posterior(A, Y[:, j], prec[:, j], noise[j])
            np.testing.assert_allclose(m1[:, j], mean, atol=1e-10)
            np.testing.assert_allclose(v1[:, j], np.real(np.diag(sigma)), rtol=1e-8)

    def test_neighbour_sum(self):
        v = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(neighbour_sum(v, False), [[2, 3], [4, 6], [2, 3]])
        np.testing.assert_array_equal(neighbour_sum(v, True), [[3, 3], [7, 8], [7, 7]])

    def test_2d_with_one_column_follows_1d(self):
        rng = np.random.default_rng(13)
        A = gaussian_matrix(rng, 20, 48)
        X = drifting_blocks(rng, 48, 1, n_blocks=2, block=4)
        y = A @ X[:, 0] + 0.01 * crandn(rng, 20)
        a = pcsbl_1d(y, A, SolverConfig(), 1e-4)
        b = pcsbl_2d(y[:, None], A, SolverConfig(), 1e-4)
        assert a.iterations == b.iterations
        np.testing.assert_allclose(a.history, b.history, rtol=1e-12)
        np.testing.assert_array_equal(a.x, b.x[:, 0])

    def test_uncoupled_2d_single_column_matches_reference(self):
        rng = np.random.default_rng(14)
        A = gaussian_matrix(rng, 15, 30)
        y = crandn(rng, 15)
        y /= np.sqrt(np.mean(np.abs(y) ** 2))
        cfg = SolverConfig(coupling=0.0, max_iter=20, tol=1e-300)
        res = pcsbl_2d(y, A, cfg, noise_var=0.05)
        m, _ = reference_sbl(y, A, cfg.a, cfg.b, 0.05, 20)
        np.testing.assert_allclose(res.x[:, 0], m, rtol=1e-8, atol=1e-10)

    def test_planted_noise_free_recovery(self):
        rng = np.random.default_rng(15)
        M, P = 128, 16
        errs = {"1d": [], "2d": []}
        for _ in range(3):
            A = gaussian_matrix(rng, M // 2, M)
            X = drifting_blocks(rng, M, P, drift_every=2)
            Y = A @ X
            errs["1d"].append(nmse_ratio(pcsbl_1d(Y, A).x, X))
            errs["2d"].append(nmse_ratio(pcsbl_2d(Y, A).x, X))
        assert to_db(np.mean(errs["2d"])) < -40
        assert to_db(np.mean(errs["1d"])) < -40

    def test_2d_coupling_beats_1d_on_drifting_blocks(self):
        rng = np.random.default_rng(16)
        M, T, P = 128, 40, 16
        one, two = [], []
        for _ in range(5):
            A = gaussian_matrix(rng, T, M)
            X = drifting_blocks(rng, M, P, drift_every=1)
            noise_var = 10 ** (-20 / 10) * np.mean(np.abs(A @ X) ** 2)
            Y = A @ X + np.sqrt(noise_var) * crandn(rng, (T, P))
            cfg = SolverConfig(max_iter=100)
            one.append(nmse_ratio(pcsbl_1d(Y, A, cfg, noise_var).x, X))
            two.append(nmse_ratio(pcsbl_2d(Y, A, cfg, noise_var).x, X))
        assert np.mean(two) < np.mean(one)

    def test_positivity_and_posterior_pd_on_desk_instance(self):
        cfg = desk_profile()
        u = unified_dictionary(cfg)
        rng = child_rng(3, "pd", 0)
        H = generate_channel(cfg, rng).H
        C, omega = sensing_matrices(gen_pilots(cfg, 48, rng), u)
        obs = synthesize_observations(H, C, 10.0, rng)
        res = pcsbl_2d(obs.y, omega, SolverConfig(max_iter=30), obs.noise_var)
        assert np.all(res.alpha > 0)
        precision = res.alpha + neighbour_sum(res.alpha, True)
        assert np.all(precision > 0)
        scale2 = np.mean(np.abs(obs.y) ** 2)
        _, sigma = posterior(omega, obs.y[:, 0] / np.sqrt(scale2), precision[:, 0], res.noise_var[0] / scale2)
        np.testing.assert_allclose(sigma, sigma.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(sigma).min() > 0
        assert np.isfinite(np.linalg.norm(obs.y - omega @ res.x))

    def test_em_noise_estimate(self):
        rng = np.random.default_rng(17)
        M, T, P = 64, 48, 8
        A = gaussian_matrix(rng, T, M)
        X = drifting_blocks(rng, M, P, n_blocks=2, block=4)
        noise_var = 0.01 * np.mean(np.abs(A @ X) ** 2)
        Y = A @ X + np.sqrt(noise_var) * crandn(rng, (T, P))
        res = pcsbl_2d(Y, A, SolverConfig(noise_mode="em"), noise_var=1.0)
        assert res.noise_var[0] == pytest.approx(noise_var, rel=0.5)
        assert to_db(nmse_ratio(res.x, X)) < -10

    def test_deterministic(self):
        rng = np.random.default_rng(18)
        A = gaussian_matrix(rng, 20, 40)
        Y = crandn(rng, (20, 4))
        a = pcsbl_2d(Y, A, SolverConfig(max_iter=15), 0.1)
        b = pcsbl_2d(Y, A, SolverConfig(max_iter=15), 0.1)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.alpha, b.alpha)

    def test_rejects_bad_inputs(self):
        A = gaussian_matrix(np.random.default_rng(0), 4, 6)
        with pytest.raises(ValueError):
            pcsbl_1d(np.array([np.inf, 0, 0, 0]), A)
        with pytest.raises(ValueError):
            pcsbl_2d(np.ones((4, 2)), A, noise_var=-1.0)


class TestSolverConfig:
    @pytest.mark.parametrize(
        "bad",
        [dict(k_max=0), dict(coupling=1.5), dict(tol=0.0), dict(noise_mode="guess"), dict(block_size=0)],
    )
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            SolverConfig(**bad)

    def test_round_trip(self):
        cfg = SolverConfig(method="p-omp", k_max=7)
        assert SolverConfig(**cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# named methods on a shared problem
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def problem():
    cfg = desk_profile()
    u = unified_dictionary(cfg)
    rng = child_rng(30, "problem", 0)
    H = generate_channel(cfg, rng).H
    C = gen_pilots(cfg, 64, rng).c_matrix()
    obs = synthesize_observations(H, C, 20.0, rng)
    return Problem(cfg, u, C, obs.y, obs.noise_var, H)


def test_oracle_floor(problem):
    res = run_method("oracle", problem)
    assert res.nmse_db <= -240


@pytest.mark.parametrize("name", ["p-omp", "bomp", "pcsbl", "p-somp", "2d-pcsbl"])
def test_methods_run_and_are_consistent(problem, name):
    res = run_method(name, problem, SolverConfig(method=name, max_iter=40))
    assert isinstance(res, EstimateResult)
    assert res.h_hat.shape == problem.H.shape
    assert np.isfinite(res.nmse_db) and res.nmse_db < 0
    if name in ("bomp", "pcsbl", "2d-pcsbl"):
        np.testing.assert_allclose(res.h_hat, reconstruct(res.x_hat, problem.dictionary), atol=1e-12)
    assert run_method("oracle", problem).nmse_db < res.nmse_db


def test_unknown_method(problem):
    with pytest.raises(ValueError):
        run_method("lasso", problem)
