"""Gamma products, expected composition, projection martingales and limits.

For an eigenvalue ``lambda`` with left vector ``u`` the projection
``pi(X_n) = u^* X_n`` satisfies

    E[pi(X_{n+1}) | F_n] = (1 + lambda / (r n + |X0|)) pi(X_n),

so ``M_n = pi(X_n - E X_n) / gamma_n`` with
``gamma_n = prod_{j<n} (1 + lambda / (r j + |X0|))`` is a mean-zero martingale.
When some factor vanishes (resonance) the product starts after it.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import PoleInGamma, ResonantBeforeStart, SmallEigenvalue
from .gamma import gamma_ratio, is_pole
from .model import UrnModel

DIRECT_LIMIT = 1000
DEFAULT_CAP = 10**6


def resonance_start(lam: complex, x0_total: int, r: int) -> int | None:
    """Start index ``g`` if ``lambda`` is resonant, else ``None``.

    Resonant means ``lambda`` real and ``(lambda + |X0|) / r`` a non-positive
    integer, so that the factor at ``j = g - 1`` vanishes.
    """
    lam = complex(lam)
    if abs(lam.imag) > 1e-9 * max(1.0, abs(lam)):
        return None
    t = (lam.real + x0_total) / r
    if is_pole(t, tol=1e-9):
        return int(round(-t)) + 1
    return None


@nb.njit(cache=True)
def _log_tail(lam, x0, r, start, stops):
    out = np.empty(stops.shape[0], np.complex128)
    acc = 0j
    j = start
    for i in range(stops.shape[0]):
        while j < stops[i]:
            acc += np.log(1.0 + lam / (r * j + x0))
            j += 1
        out[i] = acc
    return out


def gamma_products(lam: complex, x0_total: int, r: int, ns,
                   from_zero: bool = False) -> np.ndarray:
    """``gamma_n`` at every ``n`` in the sorted sequence ``ns``.

    ``from_zero`` ignores resonance and multiplies every factor from ``j = 0``
    (the product then vanishes from the resonant start on).
    """
    lam = complex(lam)
    ns = np.asarray(ns, dtype=np.int64)
    g = None if from_zero else resonance_start(lam, x0_total, r)
    start = 0 if g is None else g
    if ns.size and ns.min() < start:
        raise ResonantBeforeStart(
            f"gamma product for lambda={lam:g} starts at n={start}")
    out = np.empty(ns.shape[0], complex)
    head = min(int(ns.max(initial=0)), max(start, DIRECT_LIMIT))
    prefix = np.ones(head - start + 1, complex)
    for j in range(start, head):
        prefix[j - start + 1] = prefix[j - start] * (1 + lam / (r * j + x0_total))
    low = ns <= head
    out[low] = prefix[ns[low] - start]
    if np.any(~low):
        tail = _log_tail(lam, float(x0_total), float(r), head, ns[~low])
        out[~low] = prefix[-1] * np.exp(tail)
    return out


def gamma_product(lam: complex, x0_total: int, r: int, n: int) -> complex:
    """``prod_{j=g}^{n-1} (1 + lambda / (r j + |X0|))`` with ``g`` the start index.

    Examples
    --------
    >>> gamma_product(-1, 2, 3, 2)
    (0.4+0j)
    """
    return complex(gamma_products(lam, x0_total, r, [n])[0])


def gamma_constant(lam: complex, x0_total: int, r: int) -> complex:
    """``Gamma(|X0|/r) / Gamma((|X0| + lambda)/r)``.

    ``gamma_n ~ c n^{lambda/r}`` with relative error ``O(1/n)``.
    """
    b = (x0_total + complex(lam)) / r
    if is_pole(b, tol=1e-9):
        raise PoleInGamma(f"(|X0| + lambda)/r = {b.real:g} is a pole of Gamma")
    return gamma_ratio(x0_total / r, b)


@dataclass(frozen=True, eq=False)
class GammaSchedule:
    """Per-eigenvalue gamma products at a fixed checkpoint grid.

    ``values[c, k]`` is ``gamma`` at ``checkpoints[c]`` for eigenvalue ``k``
    (``nan`` before a resonant start).  ``constants[k]`` is ``nan`` for
    resonant ``k``.
    """

    eigenvalues: np.ndarray
    x0_total: int
    r: int
    checkpoints: np.ndarray
    start: np.ndarray
    resonant: np.ndarray
    values: np.ndarray
    constants: np.ndarray

    def at(self, n: int) -> np.ndarray:
        hit = np.flatnonzero(self.checkpoints == n)
        if hit.size == 0:
            return np.array([gamma_product(l, self.x0_total, self.r, n)
                             if n >= s else np.nan
                             for l, s in zip(self.eigenvalues, self.start)])
        return self.values[hit[0]]


def gamma_schedule(eigenvalues, x0_total: int, r: int, checkpoints) -> GammaSchedule:
    eigenvalues = np.asarray(eigenvalues, complex)
    cps = np.asarray(checkpoints, dtype=np.int64)
    q = eigenvalues.shape[0]
    values = np.full((cps.shape[0], q), np.nan, complex)
    start = np.zeros(q, np.int64)
    resonant = np.zeros(q, bool)
    constants = np.full(q, np.nan, complex)
    for k, lam in enumerate(eigenvalues):
        g = resonance_start(lam, x0_total, r)
        if g is not None:
            start[k], resonant[k] = g, True
        else:
            constants[k] = gamma_constant(lam, x0_total, r)
        ok = cps >= start[k]
        if np.any(ok):
            values[ok, k] = gamma_products(lam, x0_total, r, cps[ok])
    return GammaSchedule(eigenvalues, int(x0_total), int(r), cps, start,
                         resonant, values, constants)


# -- expectation ------------------------------------------------------------

@nb.njit(cache=True)
def _expected_path(R, X0, r, stops):
    q = X0.shape[0]
    E = X0.astype(np.float64)
    out = np.empty((stops.shape[0], q))
    x0 = X0.sum()
    n = 0
    for i in range(stops.shape[0]):
        while n < stops[i]:
            s = r * n + x0
            E = E + (R @ E) / s
            n += 1
        out[i] = E
    return out


def expected_path(model: UrnModel, checkpoints) -> np.ndarray:
    """``E[X_n]`` for each ``n`` in ``checkpoints`` (sorted), shape ``(C, q)``."""
    cps = np.asarray(checkpoints, dtype=np.int64)
    return _expected_path(model.R.astype(np.float64), model.X0.astype(np.int64),
                          float(model.r), cps)


def expected_composition(model: UrnModel, n: int) -> np.ndarray:
    """``E[X_n]`` from ``E[X_{n+1}] = (I + R / (r n + |X0|)) E[X_n]``."""
    return expected_path(model, [n])[0]


def spectral_expectation(basis, schedule: GammaSchedule, model: UrnModel,
                         n: int) -> np.ndarray:
    """``E[X_n] = sum_k gamma_n^(k) pi_k(X0) v_k``, products taken from ``j = 0``.

    Resonant terms vanish from their start index on.
    """
    coeff = basis.coefficients(model.X0.astype(float))
    gam = np.array([gamma_products(l, model.x0_total, model.r, [n],
                                   from_zero=True)[0]
                    for l in schedule.eigenvalues])
    return np.real(basis.Vr @ (gam * coeff))


# -- martingales and limits ------------------------------------------------

def centered_projections(basis, counts, mean) -> np.ndarray:
    """``pi_k(X_n - E X_n)`` for counts of shape ``(..., q)``."""
    return basis.coefficients(np.asarray(counts, float) - mean)


def projection_series(basis, source, schedule: GammaSchedule, k: int,
                      model: UrnModel | None = None) -> np.ndarray:
    """Martingale values ``M_n^(k)`` at the checkpoints of ``source``.

    ``source`` is a :class:`~urnlab.dynamics.ReplicaBatch` (result shape
    ``(N, C)``) or a :class:`~urnlab.dynamics.Trajectory` (shape ``(C,)``).
    """
    if model is None:
        model = source.model
    cps = source.checkpoints
    mean = expected_path(model, cps)
    proj = basis.coefficients(source.counts.astype(float) - mean)[..., k]
    gam = np.array([schedule.at(int(c))[k] for c in cps])
    with np.errstate(invalid="ignore"):
        return proj / gam


def xi_horizon(n: int, cap: int = DEFAULT_CAP) -> int:
    """Estimation horizon ``min(n^2, cap)``, never below ``n``."""
    return max(int(n), min(int(n) ** 2, int(cap)))


def needs_xi(spectrum) -> bool:
    """Whether any big projection can have a non-zero limit.

    A simple ``r`` (one dominant class, irreducible on it) gives
    ``pi_1(X_n - E X_n) = 0`` identically, so only other big eigenvalues or
    repeated ``r`` require a long horizon.
    """
    big = range(spectrum.p)
    n_r = sum(1 for k in big if spectrum.is_r(k))
    return n_r > 1 or any(not spectrum.is_r(k) for k in big)


def estimate_xi(basis, batch, schedule: GammaSchedule, k: int, n_est: int,
                spectrum=None) -> np.ndarray:
    """``Xi_k`` estimates per replica: ``c_k M_{n_est}^(k)``.

    With this normalization ``pi_k(X_n - E X_n) - n^{lambda_k/r} Xi_k -> 0``.
    """
    lam = schedule.eigenvalues[k]
    if lam.real <= schedule.r / 2 + 1e-8 * schedule.r:
        raise SmallEigenvalue(f"lambda_{k + 1} = {lam:g} is not big")
    m_inf = martingale_limit(basis, batch, schedule, k, n_est)
    return schedule.constants[k] * m_inf


def martingale_limit(basis, batch, schedule, k, n_est) -> np.ndarray:
    """``M_{n_est}^(k)`` per replica (the proxy for ``M_infinity``)."""
    mean = expected_composition(batch.model, n_est)
    proj = basis.coefficients(batch.at(n_est).astype(float) - mean)[:, k]
    return proj / schedule.at(n_est)[k]


def estimate_v(batch, n_est: int) -> np.ndarray:
    """``V_hat = X_{n_est} / (r n_est + |X0|)`` per replica, shape ``(N, q)``."""
    return batch.proportions(n_est)


@dataclass(frozen=True, eq=False)
class LimitEstimates:
    """Per-replica ``Xi_hat_1..Xi_hat_p`` and ``V_hat`` at ``n_est``."""

    xi: np.ndarray
    v: np.ndarray
    n_est: int
    big: tuple[int, ...]

    @property
    def xi_mean(self) -> np.ndarray:
        return self.xi.mean(axis=0)

    @property
    def v_mean(self) -> np.ndarray:
        return self.v.mean(axis=0)

    def xi_covariance(self) -> np.ndarray:
        """Covariance of the stacked real and imaginary parts."""
        stacked = np.empty((self.xi.shape[0], 2 * self.xi.shape[1]))
        stacked[:, 0::2] = self.xi.real
        stacked[:, 1::2] = self.xi.imag
        return np.atleast_2d(np.cov(stacked, rowvar=False))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["replica"]
        for k in self.big:
            head += [f"xi{k + 1}_re", f"xi{k + 1}_im"]
        head += [f"v{j + 1}" for j in range(self.v.shape[1])]
        w.writerow(head)
        for i in range(self.v.shape[0]):
            row = [i]
            for x in self.xi[i]:
                row += [repr(float(x.real)), repr(float(x.imag))]
            row += [repr(float(x)) for x in self.v[i]]
            w.writerow(row)
        return buf.getvalue()


def estimate_limits(spectrum, basis, batch, schedule: GammaSchedule,
                    n_est: int) -> LimitEstimates:
    big = tuple(range(spectrum.p))
    if big:
        xi = np.stack([estimate_xi(basis, batch, schedule, k, n_est)
                       for k in big], axis=1)
    else:
        xi = np.zeros((batch.replicas, 0), complex)
    return LimitEstimates(xi, estimate_v(batch, n_est), int(n_est), big)


def stirling_error(lam: complex, x0_total: int, r: int, n: int) -> float:
    """``|gamma_n / (c n^{lambda/r}) - 1|``."""
    c = gamma_constant(lam, x0_total, r)
    return abs(gamma_product(lam, x0_total, r, n)
               / (c * cmath.exp(complex(lam) / r * math.log(n))) - 1)
