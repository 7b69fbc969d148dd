import numpy as np
import pytest

from farboot.estimation import (
    FixedRule,
    LogRule,
    PolyRule,
    TruncationError,
    autocov_est,
    cov_est,
    eigensystem,
    estimate_psi,
    fit,
    format_k_rule,
    parse_k_rule,
    projection,
    reg_inverse,
    residuals,
    s_n_operator,
    sample_mean,
    select_k,
)
from farboot.hilbert import HsOp, hs_norm, kron, norm, op_norm, basis_vector, FuncVec
from farboot.process import (
    ExponentialSpectrum,
    FarModel,
    InnovationSpec,
    Sample,
    diagonal_exponential_psi,
    simulate,
    stationary_cov,
)
from farboot.rng import make_rng


def exp_spec(d=5, c=1.0, rho=0.5):
    return InnovationSpec(d, ExponentialSpectrum(c, rho))


def default_model(d=5, gamma=0.9, rho=0.5):
    return FarModel(diagonal_exponential_psi(gamma, rho, d), exp_spec(d))


def manual_sample(rows):
    return Sample(xs=np.array(rows, dtype=float), seed=0, model_tag="manual")


class TestSampleMean:
    def test_constant(self):
        s = manual_sample([[2.0, 1.0]] * 4)
        assert np.allclose(sample_mean(s).coeffs, [2.0, 1.0])

    def test_two_points_excludes_last(self):
        # mean over X_0, X_1 of a length-3 record
        s = manual_sample([[1.0, 0.0], [0.0, 1.0], [9.0, 9.0]])
        assert np.allclose(sample_mean(s).coeffs, [0.5, 0.5])

    def test_clt_scale(self):
        model = default_model()
        gamma, _ = stationary_cov(model)
        s = simulate(model, 100_000, burn_in=500, seed=99)
        assert norm(sample_mean(s)) <= 4 * np.sqrt(np.trace(gamma.mat) / 100_000)


class TestCovarianceEstimators:
    def test_single_pair(self):
        e1 = [1.0, 0.0]
        e2 = [0.0, 1.0]
        s = manual_sample([e1, e2])
        ghat = cov_est(s)
        chat = autocov_est(s)
        assert np.allclose(ghat.mat, kron(basis_vector(0, 2), basis_vector(0, 2)).mat)
        assert np.allclose(chat.mat, kron(basis_vector(0, 2), basis_vector(1, 2)).mat)

    def test_white_noise_lag1_small(self):
        model = FarModel(HsOp(np.zeros((5, 5))), exp_spec())
        s = simulate(model, 100_000, burn_in=10, seed=3)
        assert hs_norm(autocov_est(s)) <= 0.05 * hs_norm(cov_est(s))

    def test_consistency_against_oracle(self):
        model = default_model()
        gamma, _ = stationary_cov(model)
        s = simulate(model, 100_000, burn_in=500, seed=4)
        err = hs_norm(cov_est(s) - gamma)
        assert err <= 10 * hs_norm(gamma) / np.sqrt(100_000)


class TestEigensystem:
    def test_diagonal(self):
        es = eigensystem(HsOp(np.diag([3.0, 2.0, 1.0])))
        assert np.allclose(es.lambdas, [3.0, 2.0, 1.0])
        assert np.allclose(np.abs(es.vectors), np.eye(3))

    def test_rank_one_projection(self):
        y = FuncVec(np.array([0.6, 0.8, 0.0]))
        es = eigensystem(kron(y, y))
        assert np.allclose(es.lambdas, [1.0, 0.0, 0.0], atol=1e-12)

    def test_orthonormality_and_eigen_relation(self):
        rng = make_rng(50)
        a = rng.standard_normal((6, 6))
        g = HsOp(a @ a.T)
        es = eigensystem(g)
        assert np.allclose(es.vectors.T @ es.vectors, np.eye(6), atol=1e-10)
        for j in range(6):
            resid = g.mat @ es.vectors[:, j] - es.lambdas[j] * es.vectors[:, j]
            assert np.linalg.norm(resid) <= 1e-8 * es.lambdas[0]

    def test_sign_convention_deterministic(self):
        rng = make_rng(51)
        a = rng.standard_normal((5, 5))
        g = HsOp(a @ a.T)
        v1 = eigensystem(g).vectors
        v2 = eigensystem(g).vectors
        assert np.array_equal(v1, v2)
        for j in range(5):
            col = v1[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_eigenvalue_perturbation_bound(self):
        # spectral distance of symmetric operators bounds eigenvalue shifts
        model = default_model()
        gamma, _ = stationary_cov(model)
        lam_true = np.sort(np.linalg.eigvalsh(gamma.mat))[::-1]
        for seed in range(5):
            s = simulate(model, 500, burn_in=500, seed=seed)
            ghat = cov_est(s)
            es = eigensystem(ghat)
            gap = op_norm(ghat - gamma)
            assert np.max(np.abs(es.lambdas - lam_true)) <= gap + 1e-10

    def test_gaps(self):
        es = eigensystem(HsOp(np.diag([5.0, 4.0, 1.0])))
        assert np.allclose(es.gaps, [1.0, 1.0, 3.0])

    def test_degenerate_flag(self):
        assert eigensystem(HsOp(np.diag([2.0, 2.0, 0.5]))).degenerate
        assert not eigensystem(HsOp(np.diag([2.0, 1.0, 0.5]))).degenerate


class TestSelectK:
    def test_log_rule_clamps_to_one(self):
        # floor((1/(8 ln 2) - 0.05) ln 1000) = 0, clamped up to 1
        es = eigensystem(HsOp(np.diag([4.0, 2.0, 1.0])))
        assert select_k(es, 1000, LogRule(0.5, 0.05)) == 1

    def test_poly_rule_arithmetic(self):
        # floor(10000^(1/20 - 0.01)) = floor(10^0.16) = 1
        es = eigensystem(HsOp(np.diag([4.0, 2.0, 1.0])))
        assert select_k(es, 10_000, PolyRule(2.0, 0.01)) == 1

    def test_fixed_passthrough(self):
        es = eigensystem(HsOp(np.diag([5.0, 4.0, 3.0, 2.0, 1.0])))
        assert select_k(es, 100, FixedRule(3)) == 3

    def test_fixed_clamped_to_positive_count(self):
        es = eigensystem(HsOp(np.diag([2.0, 1.0, 0.0])))
        assert select_k(es, 100, FixedRule(5)) == 2

    def test_no_positive_eigenvalue(self):
        es = eigensystem(HsOp(np.zeros((3, 3))))
        with pytest.raises(TruncationError):
            select_k(es, 100, FixedRule(1))

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            LogRule(1.5, 0.01)
        with pytest.raises(ValueError):
            LogRule(0.5, 0.5)  # delta above the admissible coefficient
        with pytest.raises(ValueError):
            PolyRule(0.5, 0.01)
        with pytest.raises(ValueError):
            FixedRule(0)

    def test_rule_parsing_round_trip(self):
        for text in ("fixed:3", "log:0.5:0.05", "poly:2.0:0.01"):
            assert format_k_rule(parse_k_rule(text)) == text
        with pytest.raises(ValueError):
            parse_k_rule("banana:1")


class TestRegularizedInverse:
    def test_diagonal_example(self):
        es = eigensystem(HsOp(np.diag([4.0, 1.0])))
        assert np.allclose(reg_inverse(es, 1).mat, np.diag([0.25, 0.0]))
        assert np.allclose(projection(es, 1).mat, np.diag([1.0, 0.0]))

    def test_full_rank_exact_inverse(self):
        rng = make_rng(52)
        a = rng.standard_normal((4, 4))
        g = HsOp(a @ a.T + 0.5 * np.eye(4))
        es = eigensystem(g)
        assert hs_norm(reg_inverse(es, 4) @ g - HsOp(np.eye(4))) <= 1e-10

    def test_projection_identities(self):
        rng = make_rng(53)
        a = rng.standard_normal((5, 5))
        g = HsOp(a @ a.T)
        es = eigensystem(g)
        for k in (1, 2, 4):
            pi = projection(es, k)
            gd = reg_inverse(es, k)
            assert hs_norm(pi - g @ gd) <= 1e-10
            assert hs_norm(pi - gd @ g) <= 1e-10
            assert hs_norm(pi @ pi - pi) <= 1e-10
            assert hs_norm(pi - HsOp(pi.mat.T)) <= 1e-12

    def test_floor_rejection(self):
        es = eigensystem(HsOp(np.diag([1.0, 1e-15])))
        with pytest.raises(TruncationError):
            reg_inverse(es, 2)

    def test_sign_invariance(self):
        # flipping an eigenvector's sign leaves both operators unchanged
        rng = make_rng(54)
        a = rng.standard_normal((4, 4))
        es = eigensystem(HsOp(a @ a.T))
        flipped_vectors = es.vectors.copy()
        flipped_vectors[:, 1] *= -1
        from farboot.estimation import EigenSystem

        es_flipped = EigenSystem(
            lambdas=es.lambdas, vectors=flipped_vectors, gaps=es.gaps, degenerate=es.degenerate
        )
        assert np.allclose(reg_inverse(es, 2).mat, reg_inverse(es_flipped, 2).mat, atol=1e-12)
        assert np.allclose(projection(es, 2).mat, projection(es_flipped, 2).mat, atol=1e-12)


class TestEstimatePsi:
    def test_scalar_reduction(self):
        # one dimension: psi_hat = c_hat / gamma_hat
        s = manual_sample([[1.0], [0.7], [0.55], [0.4]])
        ghat, chat = cov_est(s), autocov_est(s)
        es = eigensystem(ghat)
        psi_hat = estimate_psi(chat, reg_inverse(es, 1))
        assert psi_hat.mat[0, 0] == pytest.approx(chat.mat[0, 0] / ghat.mat[0, 0], abs=1e-12)

    def test_projection_consistency(self):
        model = default_model()
        s = simulate(model, 300, burn_in=500, seed=5)
        f = fit(s, FixedRule(2))
        assert hs_norm(f.psi_hat @ f.pi_hat_k - f.psi_hat) <= 1e-10

    def test_monte_carlo_consistency(self):
        # pilot values at this seed: errors around 0.06, well under the gate
        model = default_model()
        s = simulate(model, 4000, burn_in=500, seed=1234)
        f = fit(s, FixedRule(3))
        assert op_norm(f.psi_hat - model.psi) <= 0.3


class TestResiduals:
    def test_truth_recovers_innovations(self):
        model = default_model()
        s = simulate(model, 200, burn_in=100, seed=6)
        raw, _ = residuals(s, model.psi)
        assert np.max(np.abs(raw - s.eps)) <= 1e-10

    def test_zero_operator_returns_states(self):
        model = default_model()
        s = simulate(model, 50, burn_in=10, seed=7)
        raw, _ = residuals(s, HsOp(np.zeros((5, 5))))
        assert np.array_equal(raw, s.xs[1:])

    def test_centering(self):
        model = default_model()
        s = simulate(model, 100, burn_in=10, seed=8)
        _, centered = residuals(s, model.psi)
        assert np.max(np.abs(centered.sum(axis=0))) <= 1e-10


class TestScoreOperator:
    def test_identities(self):
        model = default_model()
        s = simulate(model, 250, burn_in=100, seed=9)
        f = fit(s, FixedRule(2))
        sn = s_n_operator(s, model.psi, s.eps)
        lhs = sn.mat
        rhs = s.n * (f.c_hat.mat - model.psi.mat @ f.gamma_hat.mat)
        assert np.linalg.norm(lhs - rhs, "fro") <= 1e-9
        err = f.psi_hat.mat - model.psi.mat @ f.pi_hat_k.mat
        assert np.linalg.norm(err - (sn.mat / s.n) @ f.gamma_dagger.mat, "fro") <= 1e-9

    def test_noise_free(self):
        model = default_model(d=2, gamma=0.5, rho=0.5)
        forced = np.zeros((20, 2))
        s = simulate(model, 20, burn_in=0, seed=0, innovations=forced)
        sn = s_n_operator(s, model.psi, s.eps)
        assert np.all(sn.mat == 0)

    def test_shape_mismatch(self):
        model = default_model(d=2, gamma=0.5, rho=0.5)
        s = simulate(model, 20, burn_in=0, seed=0)
        with pytest.raises(ValueError):
            s_n_operator(s, model.psi, s.eps[:-1])


class TestFit:
    def test_deterministic_bit_for_bit(self):
        model = default_model()
        s = simulate(model, 150, burn_in=100, seed=10)
        f1 = fit(s, FixedRule(2))
        f2 = fit(s, FixedRule(2))
        assert np.array_equal(f1.psi_hat.mat, f2.psi_hat.mat)
        assert np.array_equal(f1.centered_residuals, f2.centered_residuals)
        assert np.array_equal(f1.eigen.vectors, f2.eigen.vectors)

    def test_null_model_small_psi_hat(self):
        model = FarModel(HsOp(np.zeros((5, 5))), exp_spec())
        s = simulate(model, 4000, burn_in=500, seed=1234)
        f = fit(s, FixedRule(2))
        assert op_norm(f.psi_hat) <= 0.2

    def test_centered_residuals_sum_to_zero(self):
        model = default_model()
        s = simulate(model, 123, burn_in=100, seed=11)
        f = fit(s, LogRule(0.75, 0.005))
        assert np.max(np.abs(f.centered_residuals.sum(axis=0))) <= 1e-10

    def test_residual_second_moment_identity(self):
        # exact finite-sample expansion, including the two edge terms
        model = default_model()
        for seed in range(4):
            s = simulate(model, 80, burn_in=50, seed=seed)
            f = fit(s, FixedRule(2))
            n = s.n
            e = f.raw_residuals
            lhs = (e.T @ e) / n
            p, g, c = f.psi_hat.mat, f.gamma_hat.mat, f.c_hat.mat
            rhs = (
                g
                - c @ p.T
                - p @ c.T
                + p @ g @ p.T
                + (np.outer(s.xs[-1], s.xs[-1]) - np.outer(s.xs[0], s.xs[0])) / n
            )
            assert np.linalg.norm(lhs - rhs, "fro") <= 1e-9

    def test_needs_two_transitions(self):
        with pytest.raises(ValueError):
            fit(manual_sample([[1.0], [2.0]]), FixedRule(1))

    def test_rank_deficient_sample_clamps_truncation(self):
        # more basis directions than observations: the empirical covariance
        # has rank at most n, and the truncation level must stay inside it
        model = default_model(d=10)
        s = simulate(model, 6, burn_in=50, seed=13)
        f = fit(s, FixedRule(9))
        assert f.k <= 6
        assert hs_norm(f.pi_hat_k - f.gamma_hat @ f.gamma_dagger) <= 1e-9
        assert hs_norm(f.psi_hat @ f.pi_hat_k - f.psi_hat) <= 1e-9


class TestOracleComparisons:
    def test_truncation_eigenvalue_lower_bound(self):
        # whenever the estimation error is at most half the k-th eigenvalue,
        # the k-th empirical eigenvalue keeps at least half its true size
        model = default_model()
        gamma, _ = stationary_cov(model)
        lam_true = np.sort(np.linalg.eigvalsh(gamma.mat))[::-1]
        checked = 0
        for seed in range(20):
            s = simulate(model, 1000, burn_in=500, seed=seed)
            f = fit(s, FixedRule(3))
            gap = op_norm(f.gamma_hat - gamma)
            k = f.k
            if gap <= lam_true[k - 1] / 2:
                checked += 1
                assert f.eigen.lambdas[k - 1] >= lam_true[k - 1] / 2
        assert checked > 0

    def test_sign_aligned_eigenvector_convergence(self):
        # median aligned error for the leading eigenvector shrinks with n
        model = default_model(d=3)
        gamma, _ = stationary_cov(model)
        lam, vec = np.linalg.eigh(gamma.mat)
        v_true = vec[:, np.argsort(lam)[::-1]][:, 0]
        medians = []
        for n in (100, 400, 1600):
            errs = []
            for r in range(50):
                s = simulate(model, n, burn_in=500, seed=1000 * n + r)
                es = eigensystem(cov_est(s))
                v_hat = es.vectors[:, 0]
                c = np.sign(np.dot(v_hat, v_true)) or 1.0
                errs.append(np.linalg.norm(c * v_hat - v_true))
            medians.append(np.median(errs))
        assert medians[1] <= medians[0] and medians[2] <= medians[1]
