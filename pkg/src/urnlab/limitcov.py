"""Limit covariance of the scaled projections and of the composition.

For eigenvalues ``k, l`` owned by dominant classes write
``S(x, y) = sum_m V_m x_m y_m`` and

    P_kl = lambda_k lambda_l S(conj u_k, conj u_l) / D(lambda_k + lambda_l)
    H_kl = lambda_k conj(lambda_l) S(conj u_k, u_l) / D(lambda_k + conj(lambda_l))

with ``D(z) = 1 - z/r`` for two small eigenvalues and ``z/r - 1`` for two
big ones.  For two ``r`` eigenvalues the products
``pi_k(V) pi_l(V)`` are subtracted inside ``S``.  ``P`` and ``H`` are the
limits of ``E[a b]`` and ``E[a conj(b)]`` for the scaled projections ``a, b``;
the real ``2q x 2q`` matrix ``Sigma_V`` holds the covariances of their real and
imaginary parts at rows ``2k`` (real) and ``2k + 1`` (imaginary), 0-based.

Pairs mixing a big and a small eigenvalue, pairs of ``r`` with another big
eigenvalue, and anything owned by a non-dominant class are zero.

On the half line (some dominant ``Re lambda = r/2``) only those eigenvalues
contribute; the ``log n`` scaling keeps ``P`` when ``Im(lambda_k + lambda_l) = 0``
and ``H`` when ``Im(lambda_k - lambda_l) = 0``, without the denominators.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .classes import ClassDecomposition, decompose
from .errors import RegimeMismatch
from .model import UrnModel
from .spectral import DualBasis, Regime, Spectrum, dual_bases, eigendecompose

SYM_TOL = 1e-9


def _slot_fill(sig, k, l, P, H):
    i, j = 2 * k, 2 * l
    sig[i, j] = (P + H).real / 2
    sig[i + 1, j + 1] = (H - P).real / 2
    sig[i, j + 1] = (P - H).imag / 2
    sig[i + 1, j] = (P + H).imag / 2


def sigma_v(spectrum: Spectrum, basis: DualBasis, V, regime: Regime | None = None,
            VV=None) -> np.ndarray:
    """Limit covariance ``Sigma_V`` of the scaled projection vector.

    Parameters
    ----------
    V : array_like, shape (q,)
        Limit proportions (or their mean when ``VV`` is given).
    regime : Regime, optional
        Expected regime; :class:`RegimeMismatch` if it disagrees with the
        spectrum.
    VV : array_like, shape (q, q), optional
        ``E[V V^T]`` for random ``V``; the result is then the mixture mean.
    """
    if regime is not None and Regime(regime) is not spectrum.regime:
        raise RegimeMismatch(f"spectrum is in the {spectrum.regime.value}"
                             f" regime, not {Regime(regime).value}")
    V = np.asarray(V, float)
    q, r = spectrum.q, spectrum.r
    lam = spectrum.eigenvalues
    U = basis.U
    VV = np.outer(V, V) if VV is None else np.asarray(VV, float)
    sig = np.zeros((2 * q, 2 * q))
    half = spectrum.regime is Regime.HALF_LINE

    def active(k):
        if not spectrum.dominant[k]:
            return False
        return spectrum.is_half(k) if half else True

    idx = [k for k in range(q) if active(k)]
    tol = 1e-9 * max(1.0, r)
    for k in idx:
        for l in idx:
            uk, ul = U[:, k], U[:, l]
            s_pp = np.sum(V * uk.conj() * ul.conj())
            s_ph = np.sum(V * uk.conj() * ul)
            if half:
                P = lam[k] * lam[l] * s_pp if abs((lam[k] + lam[l]).imag) <= tol else 0
                H = (lam[k] * np.conj(lam[l]) * s_ph
                     if abs((lam[k] - lam[l]).imag) <= tol else 0)
                _slot_fill(sig, k, l, complex(P), complex(H))
                continue
            bk, bl = spectrum.is_big(k), spectrum.is_big(l)
            if bk != bl:
                continue
            rk, rl = spectrum.is_r(k), spectrum.is_r(l)
            if bk and rk != rl:
                continue
            if rk and rl:
                s_pp = s_pp - uk.conj() @ VV @ ul.conj()
                s_ph = s_ph - uk.conj() @ VV @ ul
            a_pp = (lam[k] + lam[l]) / r
            a_ph = (lam[k] + np.conj(lam[l])) / r
            sign = -1.0 if bk else 1.0
            P = lam[k] * lam[l] * s_pp / (sign * (1 - a_pp))
            H = lam[k] * np.conj(lam[l]) * s_ph / (sign * (1 - a_ph))
            _slot_fill(sig, k, l, complex(P), complex(H))
    return (sig + sig.T) / 2


def a_v(sigma: np.ndarray, basis: DualBasis) -> tuple[np.ndarray, np.ndarray]:
    """``M`` (columns ``Re v_k, -Im v_k``) and ``A_V = M Sigma_V M^T``."""
    M = basis.M()
    A = M @ sigma @ M.T
    return M, (A + A.T) / 2


# -- limit proportions --------------------------------------------------------

def perron_columns(spectrum: Spectrum, basis: DualBasis) -> list[int]:
    return [k for k in range(spectrum.q) if spectrum.is_r(k)]


def deterministic_proportions(spectrum: Spectrum, basis: DualBasis):
    """``V`` when it is deterministic (one dominant class), else ``None``."""
    ks = perron_columns(spectrum, basis)
    if len(ks) != 1:
        return None
    return np.real(basis.Vr[:, ks[0]])


def dirichlet_parameters(model: UrnModel, decomposition: ClassDecomposition):
    """``theta`` of the Dirichlet law of the supercolour proportions.

    Entries for the type-1 classes, followed (when ``c = 1``) by the lumped
    remainder.  Returns ``None`` when ``c >= 2`` (the law of the type-2 split
    is not available in closed form).
    """
    if decomposition.c > 1:
        return None
    theta = [model.X0[list(cls)].sum() / model.r
             for cls, t in zip(decomposition.classes, decomposition.types) if t == 1]
    if decomposition.c == 1:
        theta.append(model.x0_total / model.r - sum(theta))
    return np.array(theta, float)


def dirichlet_moments(model: UrnModel, decomposition: ClassDecomposition,
                      spectrum: Spectrum, basis: DualBasis):
    """``E[V]`` and ``E[V V^T]`` under the Dirichlet representation.

    Returns ``None`` when the parameters are not available.
    """
    theta = dirichlet_parameters(model, decomposition)
    if theta is None:
        return None
    W = np.real(basis.Vr[:, perron_columns(spectrum, basis)])
    t0 = theta.sum()
    ED = theta / t0
    EDD = (np.outer(theta, theta) + np.diag(theta)) / (t0 * (t0 + 1))
    return W @ ED, W @ EDD @ W.T


# -- packaged law ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LimitLaw:
    """``Sigma_V``, ``M`` and ``A_V`` together with the regime they belong to."""

    sigma: np.ndarray
    M: np.ndarray
    A: np.ndarray
    regime: Regime
    p: int
    V: np.ndarray
    eigenvalues: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def scaling(self) -> str:
        return self.regime.scaling

    def is_psd(self, tol: float = SYM_TOL) -> bool:
        w = np.linalg.eigvalsh(self.A)
        return bool(w.min() >= -tol * max(1.0, np.abs(w).max()))

    def metadata(self) -> dict:
        return {
            "regime": self.regime.value,
            "scaling": self.scaling,
            "p": self.p,
            "V": [float(x) for x in self.V],
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            **self.meta,
        }

    def to_json(self) -> str:
        doc = self.metadata()
        doc["sigma"] = self.sigma.tolist()
        doc["A"] = self.A.tolist()
        doc["M"] = self.M.tolist()
        return json.dumps(doc, indent=2)

    def to_csv(self, which: str = "A") -> str:
        mat = {"A": self.A, "sigma": self.sigma, "M": self.M}[which]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if which == "sigma":
            names = [f"{part}{k + 1}" for k in range(mat.shape[1] // 2)
                     for part in ("re", "im")]
        elif which == "M":
            names = [f"{part}{k + 1}" for k in range(mat.shape[1] // 2)
                     for part in ("re", "im")]
        else:
            names = [f"colour{j + 1}" for j in range(mat.shape[1])]
        w.writerow(["row"] + names)
        for i, row in enumerate(mat):
            w.writerow([i + 1] + [repr(float(x)) for x in row])
        return buf.getvalue()


def limit_law(model: UrnModel, V=None, *, unconditional: bool = False,
              decomposition: ClassDecomposition | None = None,
              spectrum: Spectrum | None = None,
              basis: DualBasis | None = None) -> LimitLaw:
    """Assemble the limit law.

    ``V`` defaults to the deterministic proportions; for random ``V`` either
    pass a realization or set ``unconditional`` to average over the Dirichlet
    law (when available).
    """
    if decomposition is None:
        decomposition = decompose(model)
    if spectrum is None:
        spectrum = eigendecompose(model, decomposition)
    if basis is None:
        basis = dual_bases(spectrum, decomposition, model, V=V)
    meta = {"extended_case": decomposition.c >= 2, "model": model.name,
            "digest": model.digest()}
    VV = None
    if V is None:
        V = deterministic_proportions(spectrum, basis)
        meta["V_source"] = "deterministic"
        if V is None:
            moments = dirichlet_moments(model, decomposition, spectrum, basis)
            if moments is None or not unconditional:
                raise ValueError("V is random; pass a realization or use"
                                 " unconditional=True")
            V, VV = moments
            meta["V_source"] = "dirichlet-mean"
    else:
        meta["V_source"] = "given"
    V = np.asarray(V, float)
    sig = sigma_v(spectrum, basis, V, VV=VV)
    M, A = a_v(sig, basis)
    return LimitLaw(sig, M, A, spectrum.regime, spectrum.p, V,
                    spectrum.eigenvalues, meta)


def friedman_constant(alpha: int, beta: int) -> float:
    """Closed-form variance constant of the Friedman urn.

    ``(a+b)(a-b)^2 / (4(3b-a))`` below the line, ``(a-b)^2/4`` on it, and the
    big-eigenvalue residual constant ``(a+b)(a-b)^2 / (4(a-3b))`` above it.
    """
    s, d = alpha + beta, alpha - beta
    if alpha == 3 * beta:
        return d * d / 4
    if alpha < 3 * beta:
        return s * d * d / (4 * (3 * beta - alpha))
    return s * d * d / (4 * (alpha - 3 * beta))
