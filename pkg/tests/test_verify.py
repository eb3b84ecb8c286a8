import json
import math
from fractions import Fraction

import numpy as np
import pytest

from urnlab.dynamics import simulate
from urnlab.errors import SingleDominantColor
from urnlab.model import build_model, zoo
from urnlab.spectral import Regime
from urnlab.verify import (
    compare,
    conditional_bins,
    enumerate_law,
    family_roots,
    jackknife_cov,
    law_mean,
    proportion_test,
    scan_csv,
    scan_matrix_check,
    threshold_scan,
    verify_clt,
    z_scale,
)


class TestJackknife:
    def test_matches_sample_covariance(self):
        X = np.random.default_rng(0).normal(size=(1000, 3))
        cov, se = jackknife_cov(X)
        assert np.allclose(cov, np.cov(X, rowvar=False))
        assert se.shape == (3, 3)

    def test_se_of_variance(self):
        # Var of the sample variance of N(0,1) is about 2 / N
        X = np.random.default_rng(1).normal(size=(20000, 1))
        _, se = jackknife_cov(X)
        assert se[0, 0] == pytest.approx(math.sqrt(2 / 20000), rel=0.25)


def test_compare_rule():
    c = compare("x", [[1.05, 0.0], [0.0, 1.0]], np.zeros((2, 2)), np.eye(2), rel=0.1)
    assert c.passed
    # off-diagonal zero target gets 0.005 * trace / dim of slack
    c = compare("x", [[1.0, 0.006], [0.006, 1.0]], np.zeros((2, 2)), np.eye(2))
    assert not c.passed
    c = compare("x", [[1.0, 0.006], [0.006, 1.0]], np.full((2, 2), 0.003), np.eye(2))
    assert c.passed


def test_conditional_bins():
    rng = np.random.default_rng(2)
    key = rng.uniform(size=5000)
    vals = rng.normal(size=5000) * key
    rows = conditional_bins(vals, key, bins=5)
    assert len(rows) == 5
    for row in rows:
        want = np.mean(key[row["index"]] ** 2)
        assert abs(row["var"] - want) <= 4 * row["se"]


def test_z_scale():
    assert z_scale(100, Regime.NO_HALF_LINE) == pytest.approx(0.1)
    assert z_scale(100, Regime.HALF_LINE) == pytest.approx(1 / math.sqrt(100 * math.log(100)))


class TestScan:
    def test_mary_threshold(self):
        rows = threshold_scan("mary", [26, 27])
        assert rows[0].max_re_over_r < 0.5 < rows[1].max_re_over_r
        assert rows[0].p == 1 and rows[1].p == 3
        assert rows[0].max_re_over_r == pytest.approx(0.4991, abs=1e-4)

    def test_burn_threshold(self):
        rows = threshold_scan("burn", [59, 60])
        assert rows[0].max_re_over_r < 0.5 < rows[1].max_re_over_r

    @pytest.mark.parametrize("family,m", [("mary", 3), ("mary", 12), ("mary", 27),
                                          ("burn", 2), ("burn", 9), ("burn", 20)])
    def test_roots_match_matrix(self, family, m):
        row = threshold_scan(family, [m])[0]
        assert row.max_re_over_r == pytest.approx(scan_matrix_check(family, m), abs=1e-8)

    def test_roots_solve_polynomial(self):
        roots = family_roots("mary", 6)
        vals = [np.prod([z + k for k in range(1, 6)]) for z in roots]
        assert np.allclose(vals, math.factorial(6), rtol=1e-9)
        assert len(roots) == 5

    def test_friedman_exact(self):
        rows = threshold_scan("friedman", [(3, 1), (2, 1), (5, 1)])
        assert [r.regime for r in rows] == ["HalfLine", "NoHalfLine", "NoHalfLine"]
        assert [r.p for r in rows] == [1, 1, 2]
        assert "3/1,0.5,1,HalfLine" in scan_csv(rows)


class TestEnumerate:
    def test_polya_uniform(self):
        law = enumerate_law(zoo("polya"), 7)
        assert sum(law.values()) == 1
        assert all(p == Fraction(1, 8) for p in law.values())
        assert sorted(law) == [(1 + k, 8 - k) for k in range(8)]

    def test_mean(self):
        law = enumerate_law(zoo("friedman(1,2)"), 1)
        assert np.allclose(law_mean(law), [2.5, 2.5])


class TestProportions:
    def test_deterministic(self):
        b = simulate(zoo("friedman(1,2)"), 10**5, 50, seed=1)
        rep = proportion_test(b)
        assert rep.kind == "max-abs" and rep.passed

    def test_polya_uniform_marginal(self):
        b = simulate(zoo("polya"), 10**4, 10**4, seed=5, checkpoints=[])
        rep = proportion_test(b)
        assert rep.kind == "ks-beta" and rep.passed, rep


class TestVerifyCLT:
    def test_friedman_small(self):
        rep = verify_clt(zoo("friedman(1,2)"), n=1000, N=2000, seed=3)
        assert rep.passed, rep.summary()
        assert [c.label for c in rep.checks] == ["Sigma_V", "A_V"]
        assert rep.meta["n_est"] == 1000
        doc = json.loads(rep.to_json())
        assert doc["passed"] and doc["meta"]["regime"] == "NoHalfLine"
        assert rep.to_csv().splitlines()[0].startswith("check,i,j")

    def test_polya_labels(self):
        rep = verify_clt(zoo("polya"), n=100, N=1000, seed=4, horizon_cap=10**4)
        labels = [c.label for c in rep.checks]
        assert labels[:4] == ["Sigma_V conditional", "A_V conditional",
                              "Sigma_V dirichlet", "A_V dirichlet"]
        assert all(not c.required for c in rep.checks[4:])
        assert rep.meta["n_est"] == 10**4 and rep.meta["random_V"]

    def test_single_dominant_colour(self):
        with pytest.raises(SingleDominantColor):
            verify_clt(build_model([[3, 2], [0, 1]], [1, 1]), n=10, N=10)

    def test_reproducible(self):
        a = verify_clt(zoo("cyclic(3)"), n=200, N=300, seed=8, workers=1)
        b = verify_clt(zoo("cyclic(3)"), n=200, N=300, seed=8, workers=4)
        assert a.meta["batch_digest"] == b.meta["batch_digest"]
        assert np.array_equal(a.data["Z"].values, b.data["Z"].values)
