"""End-to-end acceptance checks, one test per criterion.

Each check uses oracles that are independent of the code path under test
(scipy quadrature of the defining integral, closed Lindley forms, finite
differences, Monte Carlo).  ``conftest.py`` prints one PASS/FAIL line per
criterion at the end of the session.
"""
import json
import time
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import BANK, GRID, P_GRID, THETA_GRID
from lgeom.cli import main
from lgeom.core import (
    DensityKind,
    LGParams,
    cdf,
    classify_density,
    classify_hazard,
    density_threshold,
    hazard,
    pdf,
    sample,
    survival,
)
from lgeom.inference import fit_direct, fit_em, observed_information, score, wald_ci
from lgeom.lifetime import bonferroni_curve, partial_mean, residual_moment, scaled_ttt
from lgeom.models import fit_model, gof_statistics
from lgeom.moments import mean, pwm, raw_moment
from lgeom.numdiff import fd_gradient, fd_hessian
from lgeom.orderstats import OrderStatSpec, orderstat_moment, orderstat_moment_series


def oracle_quad(func, lo, hi, theta):
    """scipy quad split at multiples of ``1/theta``; independent of ``lgeom.series``."""
    knots = [lo] + [k / theta for k in (1.0, 5.0, 20.0, 60.0) if lo < k / theta < hi] + [hi]
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        total += integrate.quad(func, a, b, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    return total


def lindley_pdf(th, y):
    return th**2 / (th + 1) * (1 + y) * np.exp(-th * y)


def lindley_cdf(th, y):
    return 1 - (1 + th * y / (th + 1)) * np.exp(-th * y)


def rel_err(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_normalization():
    start = time.perf_counter()
    worst = 0.0
    for p, th in GRID:
        prm = LGParams(p, th)
        total = oracle_quad(lambda y: pdf(prm, y), 0.0, np.inf, th)
        worst = max(worst, abs(total - 1.0))
    elapsed = time.perf_counter() - start
    assert worst < 1e-8, f"max |integral - 1| = {worst:.3e}"
    assert elapsed < 10.0, f"took {elapsed:.1f} s"


def test_criterion_02_lindley_reduction():
    ys = np.array([1e-3, 0.1, 0.7, 2.0, 5.0, 15.0])
    for th in THETA_GRID:
        prm = LGParams(0.0, th)
        f0, big_f = lindley_pdf(th, ys), lindley_cdf(th, ys)
        h0 = th**2 * (1 + ys) / (th + 1 + th * ys)
        np.testing.assert_allclose(pdf(prm, ys), f0, rtol=1e-10)
        np.testing.assert_allclose(cdf(prm, ys), big_f, rtol=1e-10)
        np.testing.assert_allclose(hazard(prm, ys), h0, rtol=1e-10)
        np.testing.assert_allclose(mean(prm).value, (th + 2) / (th * (th + 1)), rtol=1e-10)


def test_criterion_03_hazard_limits():
    for p, th in GRID:
        prm = LGParams(p, th)
        assert abs(hazard(prm, 0.0) - th**2 / ((th + 1) * (1 - p))) < 1e-10, (p, th)
        assert abs(hazard(prm, 50.0 / th) - th) / th < 0.02, (p, th)


def test_criterion_04_series_vs_quadrature():
    tol = 1e-5
    failures = []

    def check(label, got, ref):
        if not rel_err(got, ref) < tol:
            failures.append(f"{label}: series {got!r} vs quadrature {ref!r}")

    for p, th in GRID:
        prm = LGParams(p, th)
        f = lambda y: pdf(prm, y)
        mu = oracle_quad(lambda y: y * f(y), 0.0, np.inf, th)
        for r in range(1, 5):
            check(f"E[Y^{r}] at {p, th}", raw_moment(prm, r).value, oracle_quad(lambda y: y**r * f(y), 0.0, np.inf, th))
        for s, r in ((1, 1), (2, 1), (2, 2)):
            ref = oracle_quad(lambda y: y**s * cdf(prm, y) ** r * f(y), 0.0, np.inf, th)
            check(f"tau_{s},{r} at {p, th}", pwm(prm, s, r).value, ref)
        for t in (0.5 / th, 2.0 / th, 8.0 / th):
            part = oracle_quad(lambda y: y * f(y), 0.0, t, th)
            check(f"I({t}) at {p, th}", partial_mean(prm, t), part)
            check(f"B({t}) at {p, th}", bonferroni_curve(prm, t).value, part / (mu * cdf(prm, t)))
            s_t = survival(prm, t)
            for r in (1, 2):
                ref = oracle_quad(lambda y: (y - t) ** r * f(y), t, np.inf, th) / s_t
                check(f"mu_{r}({t}) at {p, th}", residual_moment(prm, t, r), ref)
            ttt = oracle_quad(lambda y: survival(prm, y), 0.0, t, th) / mu
            check(f"TTT({t}) at {p, th}", scaled_ttt(prm, t).value, ttt)
    assert not failures, "\n".join(failures[:20])


def test_criterion_05_order_statistics(rng):
    for prm in (LGParams(0.5, 1.0), LGParams(-0.5, 2.0), LGParams(0.9, 0.3), LGParams(-2.0, 1.0)):
        mu = mean(prm).value
        for n in (2, 3, 4):
            quad_sum = sum(orderstat_moment(prm, OrderStatSpec(r, n), 1).value for r in range(1, n + 1))
            assert rel_err(quad_sum, n * mu) < 1e-6, (prm, n)
            if abs(prm.p) < 1:
                series_sum = sum(orderstat_moment_series(prm, OrderStatSpec(r, n), 1).value for r in range(1, n + 1))
                assert rel_err(series_sum, n * mu) < 1e-6, (prm, n)
    prm = LGParams(0.5, 1.0)
    pairs = sample(prm, 2_000_000, seed=20240611).original.reshape(-1, 2)
    mins = pairs.min(axis=1)
    se = mins.std(ddof=1) / np.sqrt(mins.size)
    exact = orderstat_moment(prm, OrderStatSpec(1, 2), 1).value
    assert abs(mins.mean() - exact) < 3 * se, (mins.mean(), exact, se)


def test_criterion_06_sampling():
    n = 100_000
    for prm in (LGParams(0.5, 1.0), LGParams(-1.0, 2.0)):
        draws = sample(prm, n, seed=7).values
        d = stats.kstest(draws, lambda y: cdf(prm, y)).statistic
        assert d < 0.01, (prm, d)
    prm = LGParams(0.5, 1.0)
    comp = sample(prm, n, seed=11, method="compound").values
    inv = sample(prm, n, seed=12, method="inverse").values
    assert stats.ks_2samp(comp, inv).statistic < 0.01


def test_criterion_07_inference_calculus():
    rng = np.random.default_rng(77)
    for _ in range(10):
        prm = LGParams(rng.uniform(-3.0, 0.95), float(np.exp(rng.uniform(np.log(0.2), np.log(5.0)))))
        data = sample(LGParams(rng.uniform(-1.0, 0.9), rng.uniform(0.3, 3.0)), 60, seed=rng)
        ll = lambda x: float(np.sum(np.log(pdf(LGParams(x[0], x[1]), data.values))))
        x0 = np.array([prm.p, prm.theta])
        g_fd = fd_gradient(ll, x0)
        g = score(prm, data)
        assert np.all(np.abs(g - g_fd) <= 1e-5 * np.maximum(np.abs(g_fd), 1.0)), (prm, g, g_fd)
        info_fd = -fd_hessian(ll, x0)
        info = observed_information(prm, data)
        scale = np.maximum(np.abs(info_fd), 1e-2 * np.max(np.abs(info_fd)))
        assert np.all(np.abs(info - info_fd) <= 1e-4 * scale), (prm, info, info_fd)
        fit = fit_em(data)
        lls = np.array([row[3] for row in fit.trace])
        assert np.all(np.diff(lls) >= -1e-9 * np.abs(lls[1:])), prm


def test_criterion_08_parameter_recovery():
    truth = np.array([0.5, 1.0])
    errs, ses, hits = [], [], np.zeros(2)
    for i in range(100):
        fit = fit_direct(sample(LGParams(*truth), 5000, seed=8000 + i))
        errs.append(np.abs(fit.values - truth))
        ses.append(fit.std_errors)
        ci = wald_ci(fit, 0.05)
        hits += [ci["p"][0] <= truth[0] <= ci["p"][1], ci["theta"][0] <= truth[1] <= ci["theta"][1]]
    med_err, med_se = np.median(errs, axis=0), np.median(ses, axis=0)
    assert np.all(med_err < 2 * med_se), (med_err, med_se)
    coverage = hits / 100
    assert np.all((coverage >= 0.90) & (coverage <= 0.99)), coverage


def test_criterion_09_table_regression(bank, vinyl):
    start = time.perf_counter()
    lg1 = fit_model("LG", bank)
    assert abs(lg1.params.theta - 0.2027) <= 0.005
    assert abs(lg1.params.p + 0.2427) <= 0.02
    assert abs(lg1.neg2loglik - 637.8) <= 0.3
    assert abs(gof_statistics("LG", lg1, bank).ks - 0.0567) <= 0.003
    lg2 = fit_model("LG", vinyl)
    assert abs(lg2.params.theta - 0.5458) <= 0.01
    assert abs(lg2.params.p - 0.6346) <= 0.02
    assert abs(lg2.neg2loglik - 110.6) <= 0.3
    assert abs(fit_model("Exp", bank).values[0] - 0.1012) <= 0.001
    th_w, gam_w = fit_model("Weibull", bank).values
    assert abs(gam_w - 1.4585) <= 0.005 and abs(th_w - 0.0305) <= 0.002
    assert abs(fit_model("Lindley", vinyl).values[0] - 0.8238) <= 0.005
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.1f} s"


def fd_slope_signs(func, grid, exclude):
    h = 1e-6 * np.maximum(grid, 1e-3)
    d = func(grid + h) - func(np.maximum(grid - h, 0.0))
    keep = np.ones_like(grid, dtype=bool)
    for r in exclude:
        keep &= np.abs(grid - r) > 1e-3 * max(r, 1e-3)
    s = np.sign(d[keep])
    s = s[s != 0]
    out = [int(s[0])] if s.size else []
    for v in s[1:]:
        if v != out[-1]:
            out.append(int(v))
    return tuple(out)


def test_criterion_10_shape_classifiers():
    rng = np.random.default_rng(1010)
    for _ in range(200):
        p = rng.uniform(-3.0, 0.99)
        th = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        prm = LGParams(p, th)
        grid = np.linspace(0.0, 50.0 / th, 3001)[1:]
        dens = classify_density(prm)
        scan = fd_slope_signs(lambda y: pdf(prm, y), grid, [dens.mode or 0.0])
        assert (scan == (-1,)) == (p >= density_threshold(th)), (p, th, scan)
        assert (dens.kind is DensityKind.DECREASING) == (scan == (-1,)), (p, th)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            haz = classify_hazard(prm, warn=False)
        assert fd_slope_signs(lambda y: hazard(prm, y), grid, haz.turning_points) == haz.slope_signs, (p, th)


def test_criterion_11_monotone_in_p():
    rng = np.random.default_rng(1111)
    ps = np.concatenate((-np.logspace(1, -3, 40), [0.0], np.linspace(0.01, 0.99, 40)))
    for _ in range(50):
        th = float(np.exp(rng.uniform(np.log(0.05), np.log(20.0))))
        y = float(rng.exponential(2.0 / th))
        vals = np.array([cdf(LGParams(p, th), y) for p in ps])
        assert np.all(np.diff(vals) >= -1e-15), (th, y)


def _cli(*args):
    import io

    out, err = io.StringIO(), io.StringIO()
    code = main(list(args), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_criterion_12_cli(tmp_path):
    args = ("sample", "--p", "0.5", "--theta", "1", "--n", "5000", "--seed", "42", "--format", "csv")
    first, second = _cli(*args), _cli(*args)
    assert first[0] == 0 and first == second
    path = tmp_path / "draws.csv"
    path.write_text(first[1])
    for method in ("newton", "em"):
        code, out, _ = _cli("fit", "--input", str(path), "--method", method, "--format", "json")
        assert code == 0
        res = json.loads(out)["result"]
        for name, truth in (("p", 0.5), ("theta", 1.0)):
            assert abs(res["estimates"][name] - truth) < 3 * res["std_errors"][name], (method, name)
    if BANK.exists():
        cmp = ("compare", "--input", str(BANK), "--format", "json")
        assert _cli(*cmp) == _cli(*cmp)
