import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgeom.core import LGParams, lindley_kernel, logpdf, pdf, sample
from lgeom.errors import DataValidationError, DomainError, SingularInformationError
from lgeom.inference import (
    EMConfig,
    FitMethod,
    e_step,
    fit_direct,
    fit_em,
    lindley_mle,
    log_likelihood,
    lr_test,
    observed_information,
    score,
    wald_ci,
)
from lgeom.numdiff import fd_gradient, fd_hessian


def lindley_data(th, n, rng):
    mix = rng.random(n) < th / (th + 1)
    return rng.gamma(np.where(mix, 1.0, 2.0), 1.0 / th)


def assert_ascent(fit):
    lls = np.array([row[3] for row in fit.trace])
    assert np.all(np.diff(lls) >= -1e-8)


def random_case(rng):
    p = rng.uniform(-3.0, 0.95)
    th = float(np.exp(rng.uniform(np.log(0.2), np.log(5.0))))
    data = sample(LGParams(rng.uniform(-1, 0.9), rng.uniform(0.3, 3.0)), 50, seed=rng)
    return LGParams(p, th), data


class TestLikelihood:
    @settings(max_examples=50, deadline=None)
    @given(st.floats(-5.0, 0.99), st.floats(0.05, 10.0), st.integers(0, 2**31))
    def test_equals_sum_logpdf(self, p, th, seed):
        prm = LGParams(p, th)
        data = sample(LGParams(0.3, 1.0), 40, seed=seed)
        np.testing.assert_allclose(log_likelihood(prm, data), np.sum(logpdf(prm, data.values)), atol=1e-10)

    def test_lindley_reduction(self, rng):
        y = lindley_data(1.3, 200, rng)
        th = 0.9
        ref = np.sum(2 * np.log(th) - np.log1p(th) + np.log1p(y) - th * y)
        np.testing.assert_allclose(log_likelihood(LGParams(0.0, th), y), ref, rtol=1e-13)

    def test_truth_beats_wrong_theta(self):
        data = sample(LGParams(0.5, 1.0), 1000, seed=3)
        assert log_likelihood(LGParams(0.5, 1.0), data) > log_likelihood(LGParams(0.5, 2.0), data)


class TestDerivatives:
    @pytest.mark.parametrize("seed", range(10))
    def test_score_vs_finite_differences(self, seed):
        prm, data = random_case(np.random.default_rng(seed))
        fd = fd_gradient(lambda x: log_likelihood(LGParams(*x), data), [prm.p, prm.theta])
        np.testing.assert_allclose(score(prm, data), fd, rtol=1e-5, atol=1e-6 * data.n)

    @pytest.mark.parametrize("seed", range(10))
    def test_information_vs_finite_differences(self, seed):
        prm, data = random_case(np.random.default_rng(100 + seed))
        fd = -fd_hessian(lambda x: log_likelihood(LGParams(*x), data), [prm.p, prm.theta])
        info = observed_information(prm, data)
        np.testing.assert_allclose(info, fd, rtol=1e-4, atol=1e-4 * np.abs(fd).max())
        assert info[0, 1] == info[1, 0]

    def test_lindley_reductions(self, rng):
        y = lindley_data(0.8, 100, rng)
        n, th = y.size, 0.7
        np.testing.assert_allclose(score(LGParams(0.0, th), y)[1], 2 * n / th - n / (1 + th) - y.sum(), rtol=1e-13)
        np.testing.assert_allclose(observed_information(LGParams(0.0, th), y)[1, 1], 2 * n / th**2 - n / (1 + th) ** 2, rtol=1e-13)


class TestEStep:
    @pytest.mark.parametrize("p,th,y", [(0.5, 1.0, 0.3), (0.9, 2.0, 0.01), (0.2, 0.5, 4.0)])
    def test_minimum_branch_by_summation(self, p, th, y):
        # Z | Y=y has weights proportional to z (p c)^(z-1)
        z = np.arange(1, 10**6 + 1, dtype=float)
        w = p * lindley_kernel(th, y)
        log_g = np.log(z) + (z - 1) * np.log(w)
        g = np.exp(log_g - log_g.max())
        np.testing.assert_allclose(e_step(LGParams(p, th), [y])[0], np.sum(z * g) / np.sum(g), rtol=1e-12)

    @pytest.mark.parametrize("p,th,y", [(-0.5, 1.0, 0.3), (-3.0, 2.0, 1.5), (-0.1, 0.5, 4.0)])
    def test_maximum_branch_by_summation(self, p, th, y):
        # Z ~ Geometric(1/(1-p)); the maximum of z Lindley lifetimes has density z f_L (1-c)^(z-1)
        z = np.arange(1, 10**6 + 1, dtype=float)
        beta = 1.0 / (1.0 - p)
        c = lindley_kernel(th, y)
        f_l = th**2 / (th + 1) * (1 + y) * np.exp(-th * y)
        joint = beta * (1 - beta) ** (z - 1) * z * f_l * (1 - c) ** (z - 1)
        np.testing.assert_allclose(joint.sum(), pdf(LGParams(p, th), y), rtol=1e-12)
        np.testing.assert_allclose(e_step(LGParams(p, th), [y])[0], np.sum(z * joint) / joint.sum(), rtol=1e-12)

    def test_zero_p(self):
        np.testing.assert_array_equal(e_step(LGParams(0.0, 1.0), [0.5, 2.0]), [1.0, 1.0])


class TestEM:
    def test_config_validation(self):
        with pytest.raises(DomainError):
            EMConfig(max_iter=0)
        with pytest.raises(DomainError):
            EMConfig(theta_bracket=(1.0, 0.5))

    def test_needs_two_points(self):
        with pytest.raises(DataValidationError):
            fit_em([1.0])

    def test_recovers_positive_p(self):
        data = sample(LGParams(0.5, 1.0), 5000, seed=21)
        fit = fit_em(data)
        assert fit.converged and fit.method is FitMethod.EM
        assert fit.diagnostics["branch"] == "min"
        assert abs(fit.params.p - 0.5) < 0.05 and abs(fit.params.theta - 1.0) < 0.05
        assert_ascent(fit)

    def test_recovers_negative_p(self):
        data = sample(LGParams(-0.5, 2.0), 5000, seed=22)
        fit = fit_em(data)
        assert fit.diagnostics["branch"] == "max"
        assert abs(fit.params.theta - 2.0) < 3 * fit.std_errors[1]
        assert abs(fit.params.p + 0.5) < 3 * fit.std_errors[0]
        assert_ascent(fit)

    def test_lindley_data(self, rng):
        y = lindley_data(1.0, 3000, rng)
        fit = fit_em(y)
        assert abs(fit.params.p) < 3 * fit.std_errors[0]
        assert abs(fit.params.theta - lindley_mle(y)) < 3 * fit.std_errors[1]
        assert_ascent(fit)

    def test_agrees_with_direct(self):
        for seed, prm in [(1, LGParams(0.7, 0.8)), (2, LGParams(-1.0, 1.5)), (3, LGParams(0.2, 3.0))]:
            data = sample(prm, 800, seed=seed)
            em = fit_em(data, cfg=EMConfig(tol_param=1e-10, tol_loglik=1e-12, max_iter=20000))
            nt = fit_direct(data)
            assert_ascent(em)
            np.testing.assert_allclose(em.values, nt.values, atol=1e-4)
            assert np.max(np.abs(score(em.params, data))) < 1e-4 * data.n

    def test_non_convergence_is_reported(self):
        data = sample(LGParams(0.5, 1.0), 200, seed=5)
        fit = fit_em(data, cfg=EMConfig(max_iter=3))
        assert not fit.converged and fit.iterations == 3 and len(fit.trace) == 4

    def test_explicit_start_branch(self):
        data = sample(LGParams(0.5, 1.0), 500, seed=6)
        fit = fit_em(data, init=LGParams(0.3, 0.5))
        assert fit.diagnostics["branch"] == "min"
        assert_ascent(fit)

    def test_covariance(self):
        fit = fit_em(sample(LGParams(0.5, 1.0), 2000, seed=8))
        np.testing.assert_array_equal(fit.cov, fit.cov.T)
        assert np.all(np.diag(fit.cov) > 0)
        assert fit.neg2loglik == -2 * fit.loglik
        assert np.all(np.linalg.eigvalsh(observed_information(fit.params, sample(LGParams(0.5, 1.0), 2000, seed=8))) > 0)


class TestDirect:
    def test_fixed_point(self):
        data = sample(LGParams(0.4, 1.2), 1000, seed=9)
        fit = fit_direct(data)
        again = fit_direct(data, init=fit.params)
        assert again.iterations <= 1
        np.testing.assert_allclose(again.values, fit.values, atol=1e-9)

    def test_first_order_condition(self):
        data = sample(LGParams(-0.8, 0.6), 1500, seed=10)
        fit = fit_direct(data)
        assert fit.converged
        assert np.max(np.abs(score(fit.params, data))) < 1e-6 * data.n

    def test_boundary_reported(self):
        # heavy point mass near zero pushes p towards 1
        y = np.concatenate([np.full(50, 1e-9), [1.0, 2.0]])
        fit = fit_direct(y, max_iter=500)
        assert fit.params.p < 1.0
        assert fit.diagnostics.get("boundary") == "p->1" and not fit.converged


class TestIntervalsAndTests:
    def test_wald_formula(self):
        fit = fit_direct(sample(LGParams(0.5, 1.0), 1000, seed=12))
        ci = wald_ci(fit, 0.05)
        for nm, v, se in zip(fit.names, fit.values, fit.std_errors):
            np.testing.assert_allclose(ci[nm], (v - 1.959963984540054 * se, v + 1.959963984540054 * se), rtol=1e-12)

    def test_degenerate_interval(self):
        fit = fit_direct(sample(LGParams(0.5, 1.0), 500, seed=13))
        ci = wald_ci(fit, 1 - 1e-12)
        for nm, v in zip(fit.names, fit.values):
            np.testing.assert_allclose(ci[nm], (v, v), atol=1e-10)

    def test_bad_gamma(self):
        fit = fit_direct(sample(LGParams(0.5, 1.0), 500, seed=13))
        with pytest.raises(DomainError):
            wald_ci(fit, 0.0)

    def test_singular(self):
        fit = fit_direct(sample(LGParams(0.5, 1.0), 500, seed=13))
        fit.cov = None
        with pytest.raises(SingularInformationError):
            wald_ci(fit)

    def test_lr_nonnegative(self):
        data = sample(LGParams(0.3, 1.0), 300, seed=14)
        res = lr_test(data, fit_direct(data))
        assert res.statistic >= 0 and 0 <= res.p_value <= 1 and res.df == 1
        assert res.restricted.values[0] == pytest.approx(lindley_mle(data))

    @pytest.mark.slow
    def test_lr_under_lindley(self):
        rng = np.random.default_rng(15)
        pvals = []
        for _ in range(200):
            y = lindley_data(1.0, 150, rng)
            pvals.append(lr_test(y, fit_direct(y)).p_value)
        assert np.mean(np.array(pvals) > 0.01) >= 0.97

    @pytest.mark.slow
    def test_wald_coverage(self):
        hits = np.zeros(2)
        reps = 500
        for i in range(reps):
            data = sample(LGParams(0.5, 1.0), 1000, seed=1000 + i)
            ci = wald_ci(fit_direct(data))
            hits += [ci["p"][0] <= 0.5 <= ci["p"][1], ci["theta"][0] <= 1.0 <= ci["theta"][1]]
        assert np.all((hits / reps >= 0.90) & (hits / reps <= 0.99))

    @pytest.mark.slow
    @pytest.mark.parametrize("truth", [LGParams(0.5, 1.0), LGParams(-0.5, 2.0), LGParams(0.9, 0.5)])
    def test_parameter_recovery(self, truth):
        errs, ses = [], []
        for i in range(100):
            data = sample(truth, 5000, seed=5000 + i)
            fit = fit_direct(data)
            errs.append(np.abs(fit.values - [truth.p, truth.theta]))
            ses.append(fit.std_errors)
        assert np.all(np.median(errs, axis=0) < 2 * np.median(ses, axis=0))


class TestFixtures:
    def test_bank(self, bank):
        em = fit_em(bank)
        nt = fit_direct(bank)
        assert_ascent(em)
        np.testing.assert_allclose(em.values, nt.values, atol=1e-4)
        assert np.all(np.abs(em.values - [-0.2427, 0.2027]) <= [0.02, 0.005])
        assert np.all(np.abs(em.std_errors - [0.5270, 0.0346]) <= [0.01, 0.001])
        lr = lr_test(bank, nt)
        assert lr.statistic == pytest.approx(638.1 - 637.8, abs=0.1)

    def test_vinyl(self, vinyl):
        em = fit_em(vinyl)
        nt = fit_direct(vinyl)
        assert_ascent(em)
        np.testing.assert_allclose(em.values, nt.values, atol=1e-4)
        assert np.all(np.abs(nt.values - [0.6346, 0.5458]) <= [0.02, 0.01])
        assert np.all(np.abs(nt.std_errors - [0.3079, 0.2305]) <= [0.01, 0.01])
