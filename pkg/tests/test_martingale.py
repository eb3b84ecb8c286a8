import math

import numpy as np
import pytest
from scipy import stats

from urnlab.dynamics import simulate, transitions
from urnlab.errors import PoleInGamma, ResonantBeforeStart, SmallEigenvalue
from urnlab.martingale import (
    estimate_limits,
    estimate_xi,
    expected_composition,
    gamma_constant,
    gamma_product,
    gamma_products,
    gamma_schedule,
    martingale_limit,
    needs_xi,
    projection_series,
    resonance_start,
    spectral_expectation,
    stirling_error,
    xi_horizon,
)
from urnlab.model import zoo
from urnlab.spectral import analyze
from urnlab.verify import enumerate_law, law_mean


def direct_product(lam, x0, r, n, start=0):
    out = 1 + 0j
    for j in range(start, n):
        out *= 1 + lam / (r * j + x0)
    return out


def test_gamma_example():
    assert gamma_product(-1, 2, 3, 2) == pytest.approx(0.4)


@pytest.mark.parametrize("lam", [-1, 2.5, 4, 1j, -3 + 2j])
def test_log_space_matches_direct(lam):
    ns = [0, 1, 10, 999, 1000, 1001, 5000]
    got = gamma_products(lam, 3, 2, ns)
    want = [direct_product(lam, 3, 2, n) for n in ns]
    assert np.allclose(got, want, rtol=1e-10, atol=0)


def test_resonance():
    assert resonance_start(-4, 1, 1) == 4
    assert resonance_start(-4.5, 1, 1) is None
    assert resonance_start(-4 + 1j, 1, 1) is None
    assert resonance_start(-5, 2, 3) == 2
    with pytest.raises(ResonantBeforeStart):
        gamma_products(-4, 1, 1, [2])
    assert gamma_product(-4, 1, 1, 10) == pytest.approx(direct_product(-4, 1, 1, 10, 4))
    assert gamma_products(-4, 1, 1, [10], from_zero=True)[0] == 0
    with pytest.raises(PoleInGamma):
        gamma_constant(-4, 1, 1)


def test_stirling_rate():
    for n in [100, 1000, 10**4, 10**5]:
        assert stirling_error(-1, 2, 3, n) <= 10 / n


def test_constant_closed_form():
    # Gamma(2/3) / Gamma(1/3) for lambda = -1, |X0| = 2, r = 3
    c = gamma_constant(-1, 2, 3)
    assert c.real == pytest.approx(math.gamma(2 / 3) / math.gamma(1 / 3), rel=1e-13)


def test_schedule():
    s = gamma_schedule([3, -1, -4], 2, 3, [1, 5, 50])
    assert np.allclose(s.values[:, 0], [direct_product(3, 2, 3, n) for n in [1, 5, 50]])
    # -4 + 2 = -2 -> (lambda + |X0|)/r is not an integer, no resonance
    assert not s.resonant.any()
    s2 = gamma_schedule([-5], 2, 3, [1, 5])
    assert s2.resonant[0] and s2.start[0] == 2 and np.isnan(s2.values[0, 0])
    assert s2.at(7)[0] == pytest.approx(direct_product(-5, 2, 3, 7, 2))


@pytest.mark.parametrize("name", ["friedman(1,2)", "friedman(5,1)", "cyclic(3)", "mary(4)",
                                  "burn(2)"])
def test_one_step_identity(name):
    m = zoo(name)
    _, spec, basis = analyze(m)
    rng = np.random.default_rng(0)
    for n in [0, 3, 11]:
        b = simulate(m, n, 3, seed=int(rng.integers(1000)), checkpoints=[n])
        for counts in b.at(n):
            probs, succ = transitions(m, counts, n)
            cond = probs @ basis.coefficients(succ.astype(float))
            want = (1 + spec.eigenvalues / m.balls_at(n)) * basis.coefficients(
                counts.astype(float))
            assert np.allclose(cond, want, atol=1e-9)


@pytest.mark.parametrize("name", ["friedman(1,2)", "cyclic(3)", "mary(3)", "burn(2)"])
def test_expectation_against_exact_law(name):
    m = zoo(name)
    _, spec, basis = analyze(m)
    sched = gamma_schedule(spec.eigenvalues, m.x0_total, m.r, [6])
    exact = np.array([float(x) for x in law_mean(enumerate_law(m, 6))])
    assert np.allclose(expected_composition(m, 6), exact, rtol=1e-12)
    assert np.allclose(spectral_expectation(basis, sched, m, 6), exact, rtol=1e-10)


def test_spectral_expectation_long():
    m = zoo("friedman(5,1)")
    _, spec, basis = analyze(m)
    sched = gamma_schedule(spec.eigenvalues, m.x0_total, m.r, [20000])
    assert np.allclose(spectral_expectation(basis, sched, m, 20000),
                       expected_composition(m, 20000), rtol=1e-9)


def test_horizon_rules():
    assert xi_horizon(10) == 100
    assert xi_horizon(10**4) == 10**6
    assert xi_horizon(10**7) == 10**7
    assert not needs_xi(analyze(zoo("friedman(1,2)"))[1])
    assert needs_xi(analyze(zoo("friedman(5,1)"))[1])
    assert needs_xi(analyze(zoo("polya"))[1])


@pytest.fixture(scope="module")
def setup():
    # friedman(5,1): r = 6, lambda_2 = 4 is big
    m = zoo("friedman(5,1)")
    _, spec, basis = analyze(m)
    batch = simulate(m, 40000, 2000, seed=21,
                     checkpoints=[100, 400, 1000, 4000, 10000, 40000])
    sched = gamma_schedule(spec.eigenvalues, m.x0_total, m.r, batch.checkpoints)
    return spec, basis, batch, sched


class TestFriedmanBig:

    def test_martingale_mean_zero(self, setup):
        spec, basis, batch, sched = setup
        M = projection_series(basis, batch, sched, 1)
        se = M.std(axis=0) / np.sqrt(batch.replicas)
        assert np.all(np.abs(M.mean(axis=0)) <= 5 * se)

    def test_l2_bounded(self, setup):
        spec, basis, batch, sched = setup
        M = projection_series(basis, batch, sched, 1)
        second = (np.abs(M) ** 2).mean(axis=0)
        assert second.max() <= 2 * second[-1]
        assert second[-1] <= 2 * second[0]

    def test_speed_trend(self, setup):
        spec, basis, batch, sched = setup
        c = sched.constants[1]
        errs = []
        for n in [100, 1000, 10000]:
            xi4 = estimate_xi(basis, batch, sched, 1, 4 * n)
            xi_n = c * martingale_limit(basis, batch, sched, 1, n)
            errs.append(np.sqrt(np.mean(np.abs(xi4 - xi_n) ** 2)))
        assert errs[0] > errs[1] > errs[2]
        # rate n^{1/2 - 4/6} per decade is 10^{-1/6}
        slope = np.polyfit(np.log10([100, 1000, 10000]), np.log10(errs), 1)[0]
        assert -0.35 < slope < -0.05

    def test_small_eigenvalue_rejected(self, setup):
        spec, basis, batch, sched = setup
        small = gamma_schedule([6, 2], 2, 6, batch.checkpoints)
        with pytest.raises(SmallEigenvalue):
            estimate_xi(basis, batch, small, 1, 40000)

    def test_limits_csv(self, setup):
        spec, basis, batch, sched = setup
        est = estimate_limits(spec, basis, batch, sched, 40000)
        assert est.xi.shape == (2000, 2)
        assert np.allclose(est.xi[:, 0], 0, atol=1e-6)
        head = est.to_csv().splitlines()[0]
        assert head == "replica,xi1_re,xi1_im,xi2_re,xi2_im,v1,v2"
        assert est.xi_covariance().shape == (4, 4)


def test_polya_xi_is_uniform():
    # Xi_1 / r + pi_1(X0) / |X0| is the uniform limit share of colour 1
    m = zoo("polya")
    _, spec, basis = analyze(m)
    batch = simulate(m, 10**4, 3000, seed=31, checkpoints=[])
    sched = gamma_schedule(spec.eigenvalues, m.x0_total, m.r, batch.checkpoints)
    xi = estimate_xi(basis, batch, sched, 0, 10**4)
    share = xi.real / m.r + (basis.u(0).conj() @ m.X0).real / m.x0_total
    assert stats.kstest(share, "uniform").pvalue > 0.001
