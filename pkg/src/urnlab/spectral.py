"""Ordered spectrum of the generating matrix and dual eigenvector bases.

Conventions used throughout the package:

* ``u_k`` are left and ``v_k`` right eigenvectors with ``u_k^* v_l = delta_kl``,
  so ``u_k^* R = lambda_k u_k^*`` and ``pi_k(w) = u_k^* w`` is the coefficient
  of ``v_k`` in ``w = sum_k pi_k(w) v_k``.
* Eigenvalues equal to the balance ``r`` come first (one per dominant class,
  type-1 classes before type-2), the rest by decreasing real part, ties by
  decreasing imaginary part.
* Left eigenvectors for ``r`` are class indicators (type 1) or indicators plus
  a part on the type-3 classes feeding the class (type 2).  Every other left
  eigenvector is scaled so that its first largest-modulus entry equals 1.
* Conjugate eigenvalues carry conjugate vectors; real eigenvalues real ones.

Indices ``k`` are 0-based in the Python API.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .classes import ClassDecomposition, block_slices, decompose, permuted_matrix
from .errors import (
    DegenerateBasis,
    IllConditioned,
    MissingV,
    NotDiagonalizable,
    SingleDominantColor,
)
from .model import UrnModel

COND_LIMIT = 1e8
BIORTH_TOL = 1e-8


class Regime(str, Enum):
    NO_HALF_LINE = "NoHalfLine"     # sqrt(n) scaling
    HALF_LINE = "HalfLine"          # sqrt(n log n) scaling

    @property
    def scaling(self) -> str:
        return "sqrt(n)" if self is Regime.NO_HALF_LINE else "sqrt(n log n)"


def eig_tol(R: np.ndarray) -> float:
    return 1e-9 * max(1.0, float(np.abs(R).sum(axis=1).max()))


def half_tol(r: int) -> float:
    return 1e-8 * r


def same_value(x: complex, y: complex) -> bool:
    return abs(x - y) <= 1e-7 * max(1.0, abs(x))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues of ``R`` in canonical order with class ownership.

    ``right`` holds un-normalized right eigenvectors (columns, original colour
    coordinates) aligned with ``eigenvalues``; :func:`dual_bases` fixes their
    scale.
    """

    eigenvalues: np.ndarray
    owner: tuple[int, ...]
    dominant: np.ndarray
    partner: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    right: np.ndarray
    r: int
    p: int
    regime: Regime
    condition: float
    dominant_colours: int

    @property
    def q(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def ratios(self) -> np.ndarray:
        """``Re(lambda_k) / r``."""
        return self.eigenvalues.real / self.r

    def is_r(self, k: int) -> bool:
        return bool(self.dominant[k]) and self.eigenvalues[k] == self.r

    def is_big(self, k: int) -> bool:
        return self.eigenvalues[k].real - self.r / 2 > half_tol(self.r)

    def is_half(self, k: int) -> bool:
        return abs(self.eigenvalues[k].real - self.r / 2) <= half_tol(self.r)

    def is_real(self, k: int) -> bool:
        return self.eigenvalues[k].imag == 0.0

    def table(self) -> list[dict]:
        rows = []
        for k, lam in enumerate(self.eigenvalues):
            rows.append({
                "k": k + 1,
                "re": float(lam.real), "im": float(lam.imag),
                "re_over_r": float(lam.real / self.r),
                "owner_class": self.owner[k] + 1,
                "dominant": bool(self.dominant[k]),
                "size": "big" if self.is_big(k) else (
                    "half" if self.is_half(k) else "small"),
            })
        return rows


def _phase_real(vec: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(vec)))
    rotated = vec * (abs(vec[j]) / vec[j])
    return rotated.real.astype(complex)


def _block_eigen(block: np.ndarray, r: int | None, tol: float):
    """Eigenpairs of one diagonal block with real/conjugate conventions.

    Eigenvalues within rounding of ``r`` are snapped to it when ``r`` is given
    (dominant blocks only; other blocks have Perron root strictly below ``r``).
    """
    w, vecs = np.linalg.eig(block.astype(float))
    n = w.shape[0]
    w = w.astype(complex)
    for i in range(n):
        if abs(w[i].imag) <= tol:
            w[i] = complex(w[i].real, 0.0)
        if r is not None and same_value(w[i], r):
            w[i] = complex(r, 0.0)
    out_vals = np.empty(n, complex)
    out_vecs = np.empty((n, n), complex)
    used = np.zeros(n, bool)
    slot = 0
    for i in np.argsort(-w.imag, kind="stable"):
        if used[i]:
            continue
        used[i] = True
        if w[i].imag == 0:
            out_vals[slot], out_vecs[:, slot] = w[i], _phase_real(vecs[:, i])
            slot += 1
            continue
        cands = [j for j in range(n) if not used[j] and w[j].imag < 0]
        if not cands:
            raise NotDiagonalizable("unpaired complex eigenvalue"
                                    f" {w[i]:.6g}")
        j = min(cands, key=lambda j: abs(w[j] - np.conj(w[i])))
        used[j] = True
        out_vals[slot], out_vecs[:, slot] = w[i], vecs[:, i]
        out_vals[slot + 1] = np.conj(w[i])
        out_vecs[:, slot + 1] = np.conj(vecs[:, i])
        slot += 2
    return out_vals, out_vecs


def _compare(a, b):
    (lam_a, r_a, cls_a, loc_a), (lam_b, r_b, cls_b, loc_b) = a, b
    if r_a != r_b:
        return -1 if r_a else 1
    if r_a:
        return (cls_a > cls_b) - (cls_a < cls_b)
    scale = 1e-7 * max(1.0, abs(lam_a), abs(lam_b))
    if abs(lam_a.real - lam_b.real) > scale:
        return -1 if lam_a.real > lam_b.real else 1
    if abs(lam_a.imag - lam_b.imag) > scale:
        return -1 if lam_a.imag > lam_b.imag else 1
    if cls_a != cls_b:
        return -1 if cls_a < cls_b else 1
    return (loc_a > loc_b) - (loc_a < loc_b)


def eigendecompose(model: UrnModel,
                   decomposition: ClassDecomposition | None = None) -> Spectrum:
    """Ordered eigenvalues, blockwise, with right eigenvectors.

    Raises
    ------
    NotDiagonalizable
        If the right-eigenvector matrix has condition number above 1e8.
    """
    if decomposition is None:
        decomposition = decompose(model)
    r = model.r
    Rp = permuted_matrix(model, decomposition).astype(float)
    q = model.q
    tol = eig_tol(model.R)
    slices = block_slices(decomposition)

    entries = []
    for pos, (cls, sl) in enumerate(slices):
        dom = decomposition.dominant(cls)
        vals, vecs = _block_eigen(Rp[sl, sl], r if dom else None, tol)
        for loc in range(vals.shape[0]):
            full = _extend(Rp, slices, pos, vals[loc], vecs[:, loc])
            entries.append((vals[loc], dom and vals[loc] == r, cls, loc, full))

    entries.sort(key=functools.cmp_to_key(lambda x, y: _compare(x[:4], y[:4])))
    eigenvalues = np.array([e[0] for e in entries], complex)
    owner = tuple(int(e[2]) for e in entries)
    right = np.zeros((q, q), complex)
    for k, e in enumerate(entries):
        right[decomposition.ordering, k] = e[4]

    cond = float(np.linalg.cond(right))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NotDiagonalizable(
            f"right-eigenvector matrix has condition number {cond:.3g}"
            f" > {COND_LIMIT:.0e}")
    R = model.R.astype(float)
    resid = np.abs(R @ right - right * eigenvalues).max(axis=0)
    scale = np.abs(right).max(axis=0)
    if np.any(resid > 1e3 * tol * scale):
        raise IllConditioned(f"eigen-residual {resid.max():.3g} too large")

    partner = np.arange(q)
    free = set(range(q))
    for k in range(q):
        if eigenvalues[k].imag > 0:
            j = min(j for j in free if owner[j] == owner[k]
                    and eigenvalues[j] == np.conj(eigenvalues[k]))
            partner[k], partner[j] = j, k
            free.discard(j)

    groups: list[list[int]] = []
    for k in range(q):
        for g in groups:
            if same_value(eigenvalues[g[0]], eigenvalues[k]) and owner[g[0]] == owner[k]:
                g.append(k)
                break
        else:
            groups.append([k])

    dominant = np.array([decomposition.dominant(c) for c in owner])
    big = eigenvalues.real - r / 2 > half_tol(r)
    p = int(big.sum())
    if not np.all(big[:p]):
        raise IllConditioned("big eigenvalues are not leading the order")
    half = np.abs(eigenvalues.real - r / 2) <= half_tol(r)
    regime = Regime.HALF_LINE if np.any(half & dominant) else Regime.NO_HALF_LINE
    return Spectrum(
        eigenvalues=eigenvalues,
        owner=owner,
        dominant=dominant,
        partner=partner,
        groups=tuple(tuple(g) for g in groups),
        right=right,
        r=r,
        p=p,
        regime=regime,
        condition=cond,
        dominant_colours=len(decomposition.dominant_colours()),
    )


def _extend(Rp, slices, pos, lam, local):
    """Extend a block eigenvector to ``R`` by forward substitution."""
    q = Rp.shape[0]
    v = np.zeros(q, complex)
    sl = slices[pos][1]
    v[sl] = local
    done = sl.stop
    for _, sj in slices[pos + 1:]:
        rhs = -Rp[sj, :done] @ v[:done]
        if np.abs(rhs).max() > 0:
            A = Rp[sj, sj] - lam * np.eye(sj.stop - sj.start)
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.abs(A @ sol - rhs).max() > 1e-8 * max(1.0, np.abs(rhs).max()):
                raise NotDiagonalizable(
                    f"eigenvalue {lam:.6g} has a Jordan coupling between blocks")
            v[sj] = sol
        done = sj.stop
    return v


def split_big_small(spectrum: Spectrum, strict: bool = True) -> tuple[int, Regime]:
    """Number ``p`` of big eigenvalues and the scaling regime.

    With ``strict`` the sqrt(n) case additionally requires two or more colours
    in the dominant classes; otherwise :class:`SingleDominantColor` is raised.
    """
    if (strict and spectrum.regime is Regime.NO_HALF_LINE
            and spectrum.dominant_colours < 2):
        raise SingleDominantColor(
            "the sqrt(n) limit theorem needs at least two colours in the"
            " dominant classes")
    return spectrum.p, spectrum.regime


# -- dual bases -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DualBasis:
    """Left (``U``) and right (``Vr``) eigenvector matrices, as columns."""

    U: np.ndarray
    Vr: np.ndarray
    eigenvalues: np.ndarray

    @property
    def q(self) -> int:
        return self.U.shape[0]

    def u(self, k: int) -> np.ndarray:
        return self.U[:, k]

    def v(self, k: int) -> np.ndarray:
        return self.Vr[:, k]

    def coefficients(self, w) -> np.ndarray:
        """All projections ``pi_k(w)``; ``w`` may carry leading batch axes."""
        return np.asarray(w) @ self.U.conj()

    def reconstruct(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs) @ self.Vr.T

    def biorthogonality_error(self) -> float:
        return float(np.abs(self.U.conj().T @ self.Vr - np.eye(self.q)).max())

    def M(self) -> np.ndarray:
        """``q x 2q`` real matrix with columns ``Re v_k, -Im v_k``."""
        M = np.empty((self.q, 2 * self.q))
        M[:, 0::2] = self.Vr.real
        M[:, 1::2] = -self.Vr.imag
        return M

    def rescaled(self, k: int, s: complex) -> "DualBasis":
        """Basis with ``v_k -> s v_k`` and ``u_k -> u_k / conj(s)``."""
        U, Vr = self.U.copy(), self.Vr.copy()
        Vr[:, k] *= s
        U[:, k] /= np.conj(s)
        return DualBasis(U, Vr, self.eigenvalues)


def perron_vector(block: np.ndarray) -> tuple[float, np.ndarray]:
    """Dominant eigenvalue and positive right eigenvector (sum 1) of a block."""
    w, vecs = np.linalg.eig(block.astype(float))
    i = int(np.argmax(w.real))
    vec = np.real(_phase_real(vecs[:, i]))
    return float(w[i].real), vec / vec.sum()


def project(basis: DualBasis, k: int, w) -> complex:
    """``pi_k(w) = u_k^* w``."""
    return complex(np.vdot(basis.U[:, k], np.asarray(w, dtype=complex)))


def dual_bases(spectrum: Spectrum, decomposition: ClassDecomposition,
               model: UrnModel, V=None) -> DualBasis:
    """Dual left/right eigenvector bases with the package conventions.

    Parameters
    ----------
    V : array_like, optional
        Positive-on-dominant weight vector for the V-weighted normalization of
        multiple eigenvalues in dominant classes.  Needed only when such an
        eigenvalue exists and the limit proportions are random.
    """
    q = spectrum.q
    r = spectrum.r
    R = model.R.astype(float)
    P = spectrum.right.copy()
    cls_of_r = [k for k in range(q) if spectrum.is_r(k)]

    for k in cls_of_r:
        cls = list(decomposition.classes[spectrum.owner[k]])
        tau, vec = perron_vector(R[np.ix_(cls, cls)])
        if not same_value(tau, r):
            raise DegenerateBasis(f"dominant block Perron root {tau} != r={r}")
        P[:, k] = 0
        P[cls, k] = vec

    try:
        U = np.linalg.inv(P).conj().T
    except np.linalg.LinAlgError:
        raise DegenerateBasis("right eigenvectors are linearly dependent") from None

    type3 = [c for i, cl in enumerate(decomposition.classes)
             if decomposition.types[i] == 3 for c in cl]
    for k in cls_of_r:
        ci = spectrum.owner[k]
        cls = list(decomposition.classes[ci])
        u = np.zeros(q)
        u[cls] = 1.0
        if decomposition.types[ci] == 2 and type3:
            A = (R[np.ix_(type3, type3)] - r * np.eye(len(type3))).T
            rhs = -R[np.ix_(cls, type3)].T @ np.ones(len(cls))
            u[type3] = np.linalg.solve(A, rhs)
        if np.abs(u - U[:, k]).max() > 1e-6 * max(1.0, np.abs(u).max()):
            raise DegenerateBasis(f"analytic left r-eigenvector of class {ci + 1}"
                                  " disagrees with the numerical dual")
        U[:, k] = u

    for k in range(q):
        if spectrum.is_r(k):
            continue
        col = U[:, k]
        mag = np.abs(col)
        j = int(np.flatnonzero(mag >= (1 - 1e-9) * mag.max())[0])
        t = col[j]
        U[:, k] = col / t
        P[:, k] = P[:, k] * np.conj(t)
        if spectrum.is_real(k):
            U[:, k] = U[:, k].real
            P[:, k] = P[:, k].real

    needs_v = [g for g in spectrum.groups
               if len(g) > 1 and not spectrum.is_r(g[0]) and spectrum.dominant[g[0]]]
    if needs_v:
        if V is None:
            V = deterministic_v(spectrum, decomposition, P)
            if V is None:
                raise MissingV("a dominant class has a multiple eigenvalue; pass"
                               " the proportion vector V")
        V = np.asarray(V, float)
        for g in needs_v:
            if np.imag(spectrum.eigenvalues[g[0]]) < 0:
                continue
            _v_orthogonalize(U, P, list(g), V)
            partners = [int(spectrum.partner[k]) for k in g]
            if partners != list(g):
                U[:, partners] = U[:, list(g)].conj()
                P[:, partners] = P[:, list(g)].conj()

    basis = DualBasis(U, P, spectrum.eigenvalues)
    err = basis.biorthogonality_error()
    if err > BIORTH_TOL:
        raise DegenerateBasis(f"biorthogonality error {err:.3g}")
    return basis


def deterministic_v(spectrum: Spectrum, decomposition: ClassDecomposition,
                    right: np.ndarray | None = None):
    """Limit proportions when they are deterministic (single dominant class)."""
    rs = [k for k in range(spectrum.q) if spectrum.is_r(k)]
    if len(rs) != 1:
        return None
    k = rs[0]
    if right is None:
        right = spectrum.right
    vec = np.real(right[:, k])
    return vec / vec.sum()


def _v_orthogonalize(U, P, idx, V):
    """Gram-Schmidt of left vectors under <x, y>_V = sum V x conj(y).

    The right vectors are transformed by the inverse adjoint so duality holds.
    """
    G = U[:, idx]
    gram = lambda x, y: np.sum(V * x * np.conj(y))
    m = len(idx)
    T = np.eye(m, dtype=complex)
    for i in range(m):
        for j in range(i):
            coef = gram(G[:, i], G[:, j]) / gram(G[:, j], G[:, j])
            G[:, i] = G[:, i] - coef * G[:, j]
            T[:, i] -= coef * T[:, j]
    U[:, idx] = G
    P[:, idx] = P[:, idx] @ np.linalg.inv(T).conj().T
    if np.all(np.isreal(G)):
        U[:, idx] = U[:, idx].real
        P[:, idx] = P[:, idx].real


def analyze(model: UrnModel, V=None):
    """Convenience: decomposition, spectrum and dual basis in one call."""
    decomposition = decompose(model)
    spectrum = eigendecompose(model, decomposition)
    basis = dual_bases(spectrum, decomposition, model, V=V)
    return decomposition, spectrum, basis
