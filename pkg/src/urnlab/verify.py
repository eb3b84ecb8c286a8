"""Monte-Carlo verification of the limit theorems and spectral scans."""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from . import __version__
from .classes import decompose
from .dynamics import ReplicaBatch, simulate
from .errors import RootFindingFailure
from .limitcov import (
    a_v,
    deterministic_proportions,
    dirichlet_moments,
    dirichlet_parameters,
    sigma_v,
)
from .martingale import (
    DEFAULT_CAP,
    GammaSchedule,
    expected_composition,
    gamma_schedule,
    needs_xi,
    xi_horizon,
)
from .model import UrnModel, burn_matrix, mary_matrix
from .spectral import DualBasis, Regime, Spectrum, dual_bases, eigendecompose, split_big_small

JACKKNIFE_GROUPS = 100


# -- Z vectors ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZVector:
    """Scaled, centred projections of ``N`` replicas.

    ``values[:, 2k]`` and ``values[:, 2k + 1]`` are the real and imaginary
    parts for eigenvalue ``k`` (0-based).  For the ``p`` big eigenvalues the
    estimated martingale limit has been subtracted.
    """

    values: np.ndarray
    complex_values: np.ndarray
    n: int
    n_est: int
    regime: Regime
    p: int
    scale: float

    def colour(self, basis: DualBasis) -> np.ndarray:
        """Colour-space residual ``M Z`` per replica, shape ``(N, q)``."""
        return np.real(self.complex_values @ basis.Vr.T)


def z_scale(n: int, regime: Regime) -> float:
    if regime is Regime.HALF_LINE:
        return 1.0 / math.sqrt(n * math.log(n))
    return 1.0 / math.sqrt(n)


def z_vector(model: UrnModel, basis: DualBasis, schedule: GammaSchedule,
             batch: ReplicaBatch, n: int, n_est: int, spectrum: Spectrum,
             regime: Regime | None = None) -> ZVector:
    """Build ``Z_n`` from a batch holding checkpoints ``n`` and ``n_est``."""
    regime = spectrum.regime if regime is None else Regime(regime)
    p = spectrum.p
    y_n = batch.at(n).astype(float) - expected_composition(model, n)
    pi = basis.coefficients(y_n)
    if p and n_est > n:
        y_est = batch.at(n_est).astype(float) - expected_composition(model, n_est)
        m_inf = basis.coefficients(y_est)[:, :p] / schedule.at(n_est)[:p]
        pi[:, :p] -= schedule.at(n)[:p] * m_inf
    for k in range(spectrum.q):
        if spectrum.is_real(k):
            pi[:, k] = pi[:, k].real
    s = z_scale(n, regime)
    pi *= s
    vals = np.empty((pi.shape[0], 2 * pi.shape[1]))
    vals[:, 0::2] = pi.real
    vals[:, 1::2] = pi.imag
    return ZVector(vals, pi, int(n), int(n_est), regime, p, s)


# -- statistics ------------------------------------------------------------

def jackknife_cov(X: np.ndarray, groups: int = JACKKNIFE_GROUPS):
    """Sample covariance and its delete-a-group jackknife standard error.

    Replicas are split into ``groups`` contiguous blocks.
    """
    X = np.asarray(X, float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    G = max(2, min(groups, N // 2))
    edges = np.linspace(0, N, G + 1).astype(int)
    S1 = np.stack([X[a:b].sum(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    S2 = np.stack([X[a:b].T @ X[a:b] for a, b in zip(edges[:-1], edges[1:])])
    cnt = np.diff(edges).astype(float)

    def cov_from(s1, s2, m):
        mu = s1 / m
        return (s2 - m * np.outer(mu, mu)) / (m - 1)

    full = cov_from(S1.sum(0), S2.sum(0), float(N))
    loo = np.stack([cov_from(S1.sum(0) - S1[g], S2.sum(0) - S2[g], N - cnt[g])
                    for g in range(G)])
    se = np.sqrt((G - 1) / G * ((loo - loo.mean(0)) ** 2).sum(0))
    return full, se


@dataclass
class Comparison:
    """Entrywise comparison of an estimate with a target."""

    label: str
    empirical: np.ndarray
    se: np.ndarray
    target: np.ndarray
    rel: float = 0.1
    abs_tol: float = 0.0
    z_crit: float = 3.0
    required: bool = True

    @property
    def tolerance(self) -> np.ndarray:
        return np.maximum(self.rel * np.abs(self.target) + self.abs_tol,
                          self.z_crit * self.se)

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(np.asarray(self.empirical) - self.target)

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.se > 0, (self.empirical - self.target) / self.se, 0.0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.deviation <= self.tolerance))

    def to_dict(self) -> dict:
        return {
            "label": self.label, "passed": self.passed, "required": self.required,
            "rule": {"rel": self.rel, "abs": self.abs_tol, "z_crit": self.z_crit},
            "empirical": np.asarray(self.empirical).tolist(),
            "se": np.asarray(self.se).tolist(),
            "target": np.asarray(self.target).tolist(),
        }


def compare(label, emp, se, target, rel=0.1, abs_frac=0.005, z_crit=3.0,
            required=True) -> Comparison:
    """Apply ``|C - T| <= max(rel |T| + abs_frac trace(T)/dim, z_crit se)``."""
    target = np.asarray(target, float)
    dim = target.shape[0] if target.ndim else 1
    scale = abs(np.trace(np.atleast_2d(target))) / dim
    return Comparison(label, np.asarray(emp, float), np.asarray(se, float), target,
                      rel, abs_frac * scale, z_crit, required)


@dataclass
class VerdictReport:
    """Outcome of a verification run."""

    checks: list
    meta: dict
    data: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def check(self, label: str) -> Comparison:
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)

    def summary(self) -> str:
        lines = [f"verdict: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            tag = "pass" if c.passed else "FAIL"
            opt = "" if c.required else " (informational)"
            worst = float(np.max(c.deviation / np.where(c.tolerance > 0, c.tolerance, 1)))
            lines.append(f"  {tag} {c.label}{opt}: worst deviation/tolerance = {worst:.3f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "meta": self.meta,
                "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "i", "j", "empirical", "se", "target", "tolerance", "pass"])
        for c in self.checks:
            emp = np.atleast_2d(c.empirical)
            se, tgt, tol = (np.atleast_2d(x) for x in (c.se, c.target, c.tolerance))
            for (i, j), e in np.ndenumerate(emp):
                w.writerow([c.label, i + 1, j + 1, repr(float(e)), repr(float(se[i, j])),
                            repr(float(tgt[i, j])), repr(float(tol[i, j])),
                            int(abs(e - tgt[i, j]) <= tol[i, j])])
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


# -- CLT verification ----------------------------------------------------------

def dominant_share(v_hat: np.ndarray, decomposition) -> np.ndarray:
    """Proportion of the first dominant class per replica."""
    cls = list(decomposition.classes[0])
    return v_hat[:, cls].sum(axis=1)


def conditional_bins(values: np.ndarray, key: np.ndarray, bins: int = 10,
                     min_count: int = 100):
    """Variance of ``values`` within quantile bins of ``key``.

    Returns a list of dicts with the bin index, its replica indices, the mean
    key, the variance and its jackknife standard error.  Bins with fewer than
    ``min_count`` replicas are skipped.
    """
    edges = np.quantile(key, np.linspace(0, 1, bins + 1))
    which = np.clip(np.searchsorted(edges, key, side="right") - 1, 0, bins - 1)
    out = []
    for b in range(bins):
        idx = np.flatnonzero(which == b)
        if idx.size < min_count:
            continue
        var, se = jackknife_cov(values[idx], groups=min(JACKKNIFE_GROUPS, idx.size // 10))
        out.append({"bin": b, "index": idx, "key_mean": float(key[idx].mean()),
                    "var": float(var[0, 0]), "se": float(se[0, 0])})
    return out


def verify_clt(model: UrnModel, n: int = 10**4, N: int = 10**4, seed: int = 0, *,
               horizon_cap: int = DEFAULT_CAP, bins: int = 10, workers=None,
               rel: float = 0.1, z_crit: float = 3.0, normality: bool = False,
               V=None) -> VerdictReport:
    """Simulate ``N`` replicas and compare ``Cov(Z_n)`` with the limit law.

    The scaling (sqrt(n) or sqrt(n log n)) follows the spectrum.  For random
    limit proportions the target is the replica average of the conditional
    covariance, together with the Dirichlet mixture (when available, as an
    additional check) and decile-binned conditional checks.
    """
    t0 = time.perf_counter()
    decomposition = decompose(model)
    spectrum = eigendecompose(model, decomposition)
    p, regime = split_big_small(spectrum, strict=True)
    n_est = xi_horizon(n, horizon_cap) if needs_xi(spectrum) else n
    batch = simulate(model, max(n, n_est), N, seed, checkpoints=[n, n_est],
                     workers=workers)
    v_hat = batch.proportions(n_est)
    V_det = None
    basis = None
    if V is None:
        probe = dual_bases(spectrum, decomposition, model, V=v_hat.mean(0))
        V_det = deterministic_proportions(spectrum, probe)
        basis = probe
    else:
        basis = dual_bases(spectrum, decomposition, model, V=V)
    schedule = gamma_schedule(spectrum.eigenvalues, model.x0_total, model.r,
                              sorted({n, n_est}))
    Z = z_vector(model, basis, schedule, batch, n, n_est, spectrum, regime)
    colour = Z.colour(basis)

    checks = []
    random_v = V_det is None and V is None
    if not random_v:
        Vt = V_det if V is None else np.asarray(V, float)
        sig = sigma_v(spectrum, basis, Vt, regime)
        targets = [("", sig, None)]
    else:
        sig = sigma_v(spectrum, basis, v_hat.mean(0), regime,
                      VV=v_hat.T @ v_hat / N)
        targets = [(" conditional", sig, None)]
        moments = dirichlet_moments(model, decomposition, spectrum, basis)
        if moments is not None:
            targets.append((" dirichlet", sigma_v(spectrum, basis, moments[0],
                                                  regime, VV=moments[1]), None))
    emp_s, se_s = jackknife_cov(Z.values)
    emp_a, se_a = jackknife_cov(colour)
    for tag, s, _ in targets:
        _, A = a_v(s, basis)
        checks.append(compare("Sigma_V" + tag, emp_s, se_s, s, rel=rel, z_crit=z_crit))
        checks.append(compare("A_V" + tag, emp_a, se_a, A, rel=rel, z_crit=z_crit))

    bin_rows = []
    if random_v and bins > 0:
        key = dominant_share(v_hat, decomposition)
        j = decomposition.classes[0][0]
        for row in conditional_bins(colour[:, j], key, bins):
            idx = row["index"]
            vb = v_hat[idx]
            sb = sigma_v(spectrum, basis, vb.mean(0), regime, VV=vb.T @ vb / idx.size)
            target = a_v(sb, basis)[1][j, j]
            row["target"] = float(target)
            bin_rows.append(row)
            checks.append(compare(f"A_V[{j + 1},{j + 1}] bin {row['bin'] + 1}",
                                  [[row["var"]]], [[row["se"]]], [[target]],
                                  rel=rel, abs_frac=0.0, z_crit=z_crit, required=False))
    if normality:
        for c in range(Z.values.shape[1]):
            col = Z.values[:, c]
            if col.std() > 0:
                ad = stats.anderson(col)
                checks.append(Comparison(f"normality component {c + 1}",
                                         np.array(ad.statistic), np.array(0.0),
                                         np.array(0.0), 0.0, float(ad.critical_values[2]),
                                         required=False))

    meta = {
        "model": model.to_dict(), "digest": model.digest(), "batch_digest": batch.digest(),
        "version": __version__, "seed": int(seed), "n": int(n), "N": int(N),
        "n_est": int(n_est), "horizon_cap": int(horizon_cap), "regime": regime.value,
        "scaling": regime.scaling, "p": int(p), "random_V": bool(random_v),
        "extended_case": decomposition.c >= 2,
        "tolerance": {"rel": rel, "abs_frac_trace": 0.005, "z_crit": z_crit,
                      "jackknife_groups": JACKKNIFE_GROUPS},
        "runtime_s": round(time.perf_counter() - t0, 3),
    }
    data = {"Z": Z, "colour": colour, "v_hat": v_hat, "basis": basis,
            "spectrum": spectrum, "bins": bin_rows, "batch": batch}
    return VerdictReport(checks, meta, data)


# -- threshold scans -------------------------------------------------------

def _shifted_roots(shifts: np.ndarray, const: float) -> np.ndarray:
    """Roots of ``prod_k (z + k) = const`` over ``k`` in ``shifts``.

    Starting values are the eigenvalues of a cyclic bidiagonal matrix whose
    characteristic polynomial is exactly that difference; Newton steps on the log form polish
    them and the residual ``|prod (z + k) / const - 1|`` is checked.
    """
    d = shifts.shape[0]
    A = np.diag(-shifts.astype(float))
    # spread const evenly over the cycle to keep the matrix balanced
    w = math.exp(math.log(const) / d)
    A[np.arange(1, d), np.arange(d - 1)] = w
    A[0, d - 1] += w
    roots = np.linalg.eigvals(A).astype(complex)
    log_c = math.log(const)
    out = np.empty_like(roots)
    for i, z in enumerate(roots):
        for _ in range(50):
            terms = z + shifts
            ratio = cmath.exp(log_c - np.sum(np.log(terms)))
            step = (1 - ratio) / np.sum(1 / terms)
            z -= step
            if abs(step) <= 1e-15 * max(1.0, abs(z)):
                break
        resid = abs(cmath.exp(np.sum(np.log(z + shifts)) - log_c) - 1)
        if not np.isfinite(resid) or resid > 1e-6:
            raise RootFindingFailure(f"root {z:.6g} has residual {resid:.3g}")
        out[i] = z
    return out


def family_roots(family: str, m: int) -> np.ndarray:
    """Eigenvalues of the search-tree or B-urn matrix as polynomial roots."""
    if family == "mary":
        if m < 2:
            raise ValueError("mary needs m >= 2")
        shifts = np.arange(1, m, dtype=float)
        const = math.factorial(m)
    elif family == "burn":
        if m < 2:
            raise ValueError("burn needs m >= 2")
        shifts = np.arange(m, 2 * m, dtype=float)
        const = math.factorial(2 * m) / math.factorial(m)
    else:
        raise ValueError(f"no polynomial for family {family!r}")
    return _shifted_roots(shifts, float(const))


@dataclass(frozen=True)
class ScanRow:
    param: object
    max_re_over_r: float
    p: int
    regime: str


def threshold_scan(family: str, params) -> list[ScanRow]:
    """Largest non-Perron real part over ``r`` for each parameter.

    ``family`` is ``"mary"`` or ``"burn"`` (``params`` are integers ``m``) or
    ``"friedman"`` (``params`` are ``(alpha, beta)`` pairs, ratio exact).
    """
    rows = []
    for prm in params:
        if family == "friedman":
            alpha, beta = prm
            ratio = Fraction(alpha - beta, alpha + beta)
            half = ratio == Fraction(1, 2)
            rows.append(ScanRow((alpha, beta), float(ratio), 1 + int(ratio > Fraction(1, 2)),
                                "HalfLine" if half else "NoHalfLine"))
            continue
        roots = family_roots(family, int(prm))
        perron = int(np.argmin(np.abs(roots - 1)))
        if abs(roots[perron] - 1) > 1e-8:
            raise RootFindingFailure(f"no Perron root for {family}({prm})")
        rest = np.delete(roots, perron)
        mx = float(rest.real.max()) if rest.size else -math.inf
        big = 1 + int(np.sum(rest.real - 0.5 > 1e-8))
        half = bool(np.any(np.abs(rest.real - 0.5) <= 1e-8))
        rows.append(ScanRow(int(prm), mx, big, "HalfLine" if half else "NoHalfLine"))
    return rows


def scan_matrix_check(family: str, m: int) -> float:
    """Same quantity from the eigenvalues of the zoo matrix (cross-check)."""
    R = mary_matrix(m) if family == "mary" else burn_matrix(m)
    w = np.linalg.eigvals(R.astype(float))
    w = np.delete(w, int(np.argmin(np.abs(w - 1))))
    return float(w.real.max()) if w.size else -math.inf


def scan_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "maxRe_over_r", "p", "regime"])
    for row in rows:
        prm = row.param if not isinstance(row.param, tuple) else "/".join(map(str, row.param))
        w.writerow([prm, repr(row.max_re_over_r), row.p, row.regime])
    return buf.getvalue()


# -- proportions -------------------------------------------------------------

@dataclass
class ProportionReport:
    kind: str
    statistic: float
    threshold: float
    passed: bool
    detail: dict = field(default_factory=dict)


def proportion_test(batch: ReplicaBatch, model: UrnModel | None = None,
                    n_est: int | None = None, tol: float = 0.02,
                    alpha: float = 0.01) -> ProportionReport:
    """Check ``V_hat`` against the limit proportions.

    Deterministic ``V``: maximum absolute error over replicas and colours,
    passing when at most ``tol``.  Random ``V`` with known Dirichlet
    parameters: Kolmogorov-Smirnov test of the first supercolour share
    against its Beta marginal at level ``alpha``.
    """
    model = batch.model if model is None else model
    n_est = batch.horizon if n_est is None else n_est
    v_hat = batch.proportions(n_est)
    decomposition = decompose(model)
    spectrum = eigendecompose(model, decomposition)
    basis = dual_bases(spectrum, decomposition, model, V=v_hat.mean(0))
    V = deterministic_proportions(spectrum, basis)
    if V is not None:
        err = float(np.abs(v_hat - V).max())
        return ProportionReport("max-abs", err, tol, err <= tol, {"V": V.tolist()})
    theta = dirichlet_parameters(model, decomposition)
    if theta is None:
        return ProportionReport("unavailable", math.nan, math.nan, False,
                                {"reason": "no closed-form law for c >= 2"})
    share = dominant_share(v_hat, decomposition)
    a, b = theta[0], theta.sum() - theta[0]
    res = stats.kstest(share, stats.beta(a, b).cdf)
    crit = float(stats.kstwo.ppf(1 - alpha, share.shape[0]))
    return ProportionReport("ks-beta", float(res.statistic), crit,
                            bool(res.statistic < crit),
                            {"theta": theta.tolist(), "pvalue": float(res.pvalue)})


# -- exact law by enumeration -------------------------------------------------

def enumerate_law(model: UrnModel, n: int) -> dict[tuple, Fraction]:
    """Exact distribution of ``X_n`` by exhaustive enumeration of draws."""
    law = {tuple(int(x) for x in model.X0): Fraction(1)}
    R = model.R
    for t in range(n):
        total = model.balls_at(t)
        nxt: dict[tuple, Fraction] = {}
        for state, prob in law.items():
            for i, c in enumerate(state):
                if c == 0:
                    continue
                new = tuple(int(x) for x in np.add(state, R[:, i]))
                nxt[new] = nxt.get(new, Fraction(0)) + prob * Fraction(c, total)
        law = nxt
    return law


def law_mean(law: dict[tuple, Fraction]) -> np.ndarray:
    q = len(next(iter(law)))
    mean = [sum((p * s[i] for s, p in law.items()), Fraction(0)) for i in range(q)]
    return np.array([float(m) for m in mean])
