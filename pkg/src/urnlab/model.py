"""Urn models: construction, assumption checks and the model zoo.

A model is the pair ``(R, X0)``. Column ``j`` of the generating matrix ``R``
is the increment added to the urn when a ball of colour ``j`` is drawn, so
``R`` is stored exactly as printed (not the replacement matrix, which is its
transpose).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    BadFamilyParameter,
    ConfigError,
    DivisibilityViolation,
    EmptyUrn,
    ModelError,
    NegativeOffDiagonal,
    NonConstantColumnSum,
)

INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True, eq=False)
class UrnModel:
    """A balanced generalized Polya urn.

    Construct through :func:`build_model` or :func:`zoo`; the constructor
    itself re-checks the structural invariants (balance, sign pattern and
    divisibility) so that no invalid instance can exist.
    """

    name: str
    R: np.ndarray
    X0: np.ndarray
    r: int = field(init=False)

    def __post_init__(self):
        R = _as_int_matrix(self.R)
        X0 = _as_int_vector(self.X0)
        if R.shape[0] != R.shape[1]:
            raise ModelError(f"R must be square, got shape {R.shape}")
        if R.shape[0] < 2:
            raise ModelError("an urn needs at least two colours")
        if X0.shape != (R.shape[0],):
            raise ModelError(
                f"X0 has length {X0.shape[0]} but R has {R.shape[0]} colours")
        if np.any(X0 < 0):
            raise ModelError("initial composition must be non-negative")
        if X0.sum() < 1:
            raise EmptyUrn("the initial urn must contain at least one ball")

        sums = R.sum(axis=0)
        if np.any(sums != sums[0]):
            raise NonConstantColumnSum(
                f"column sums differ: {sums.tolist()}")
        r = int(sums[0])
        if r <= 0:
            raise NonConstantColumnSum(
                f"balance constant must be positive, got r={r}")

        off = R - np.diag(np.diag(R))
        if np.any(off < 0):
            i, j = np.argwhere(off < 0)[0]
            raise NegativeOffDiagonal(
                f"R[{i},{j}] = {R[i, j]} is a negative off-diagonal entry")
        for i in np.flatnonzero(np.diag(R) < 0):
            d = -int(R[i, i])
            if X0[i] % d:
                raise DivisibilityViolation(
                    f"|R[{i},{i}]| = {d} does not divide X0[{i}] = {X0[i]}")
            bad = [j for j in range(R.shape[0]) if R[i, j] % d]
            if bad:
                raise DivisibilityViolation(
                    f"|R[{i},{i}]| = {d} does not divide R[{i},{bad[0]}]"
                    f" = {R[i, bad[0]]}")

        R.setflags(write=False)
        X0.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "X0", X0)
        object.__setattr__(self, "r", r)

    @property
    def q(self) -> int:
        return self.R.shape[0]

    @property
    def x0_total(self) -> int:
        return int(self.X0.sum())

    def increment(self, colour: int) -> np.ndarray:
        return self.R[:, colour]

    def balls_at(self, n: int) -> int:
        """Total number of balls after ``n`` draws."""
        return self.r * n + self.x0_total

    def max_horizon(self) -> int:
        """Largest ``n`` for which ``r*n + |X0|`` fits in a signed 64-bit int."""
        return (INT64_MAX - self.x0_total) // self.r

    def to_dict(self) -> dict:
        return {"name": self.name, "R": self.R.tolist(), "X0": self.X0.tolist()}

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True,
                             separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def with_initial(self, X0: Sequence[int]) -> "UrnModel":
        return UrnModel(self.name, self.R.copy(), np.asarray(X0))

    def __repr__(self):
        return (f"UrnModel(name={self.name!r}, q={self.q}, r={self.r}, "
                f"X0={self.X0.tolist()})")


def _as_int_matrix(R) -> np.ndarray:
    arr = np.array(R, dtype=object)
    if arr.ndim != 2:
        raise ModelError("R must be a 2-d integer matrix")
    return _to_int64(arr).reshape(arr.shape)


def _as_int_vector(x) -> np.ndarray:
    arr = np.array(x, dtype=object)
    if arr.ndim != 1:
        raise ModelError("X0 must be a 1-d integer vector")
    return _to_int64(arr)


def _to_int64(arr: np.ndarray) -> np.ndarray:
    out = np.empty(arr.size, dtype=np.int64)
    for idx, v in enumerate(arr.ravel()):
        if isinstance(v, (bool, np.bool_)):
            raise ModelError(f"entry {v!r} is a boolean, not an integer")
        if isinstance(v, (int, np.integer)):
            iv = int(v)
        elif isinstance(v, (float, np.floating)) and float(v).is_integer():
            iv = int(v)
        else:
            raise ModelError(f"entry {v!r} is not an integer")
        if abs(iv) > INT64_MAX:
            raise ModelError(f"entry {iv} exceeds the 64-bit range")
        out[idx] = iv
    return out


def build_model(R, X0, name: str = "urn") -> UrnModel:
    """Build an urn model from its generating matrix and initial composition.

    Parameters
    ----------
    R : array_like of int, shape (q, q)
        Generating matrix; column ``j`` is the increment for drawing ``j``.
    X0 : array_like of int, shape (q,)
        Initial ball counts.
    name : str
        Free-form label.

    Raises
    ------
    NonConstantColumnSum, NegativeOffDiagonal, DivisibilityViolation, EmptyUrn
    """
    return UrnModel(name, R, X0)


# -- assumption checks ------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    passed: bool
    reason: str


@dataclass(frozen=True)
class ValidationReport:
    A1: Verdict
    A2: Verdict
    A3: Verdict
    A4: Verdict
    A5: Verdict

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts().values())

    def verdicts(self) -> dict[str, Verdict]:
        return {k: getattr(self, k) for k in ("A1", "A2", "A3", "A4", "A5")}

    def failures(self) -> list[str]:
        return [k for k, v in self.verdicts().items() if not v.passed]

    def __str__(self):
        lines = [f"{k}: {'ok ' if v.passed else 'FAIL'} {v.reason}"
                 for k, v in self.verdicts().items()]
        return "\n".join(lines)


def support_closure(R: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of the colour graph.

    ``reach[i, j]`` is True iff colour ``i`` leads to colour ``j``, i.e.
    ``(R^n)[j, i] > 0`` for some ``n >= 0``.
    """
    q = R.shape[0]
    adj = (np.asarray(R).T > 0) | np.eye(q, dtype=bool)
    reach = adj.copy()
    while True:
        nxt = (reach.astype(np.int64) @ adj.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def _check_a2(model: UrnModel) -> Verdict:
    sums = model.R.sum(axis=0)
    if np.all(sums == sums[0]) and sums[0] > 0:
        return Verdict(True, f"all column sums equal r={int(sums[0])}")
    return Verdict(False, f"column sums {sums.tolist()}")


def _check_a3(model: UrnModel) -> Verdict:
    R, X0 = model.R, model.X0
    off = R - np.diag(np.diag(R))
    if np.any(off < 0):
        return Verdict(False, "negative off-diagonal entry")
    for i in np.flatnonzero(np.diag(R) < 0):
        d = -int(R[i, i])
        if X0[i] % d or np.any(R[i] % d):
            return Verdict(False, f"|R[{i},{i}]|={d} fails the divisibility"
                                  " condition")
    return Verdict(True, "Metzler-Leontief with valid removals")


def _check_a4(model: UrnModel, decomposition) -> Verdict:
    for cls, kind in zip(decomposition.classes, decomposition.types):
        if kind == 3:
            continue
        block = model.R[np.ix_(cls, cls)]
        cols = {tuple(block[:, j]) for j in range(block.shape[1])}
        if len(cols) < block.shape[1]:
            return Verdict(False, f"dominant block on colours {list(cls)} has"
                                  " two identical columns")
    return Verdict(True, "dominant blocks have pairwise distinct columns")


def _check_a5(model: UrnModel) -> Verdict:
    reach = support_closure(model.R)
    seeded = model.X0 > 0
    reachable = reach[seeded].any(axis=0)
    missing = np.flatnonzero(~reachable)
    if missing.size:
        return Verdict(False, f"colours {missing.tolist()} can never appear")
    return Verdict(True, "every colour is reachable from the initial urn")


def validate(model: UrnModel) -> ValidationReport:
    """Check assumptions A1-A5; failures are recorded, never raised."""
    from .classes import decompose
    from .spectral import COND_LIMIT, eigendecompose
    from .errors import SpectralError

    decomposition = decompose(model)
    try:
        spec = eigendecompose(model, decomposition)
        a1 = Verdict(True, f"cond(right eigenvectors) = {spec.condition:.3g}"
                           f" <= {COND_LIMIT:.0e}")
    except SpectralError as exc:
        a1 = Verdict(False, str(exc))
    return ValidationReport(
        A1=a1,
        A2=_check_a2(model),
        A3=_check_a3(model),
        A4=_check_a4(model, decomposition),
        A5=_check_a5(model),
    )


# -- zoo ----------------------------------------------------------------------

def polya_matrix(q: int = 2) -> np.ndarray:
    return np.eye(q, dtype=np.int64)


def friedman_matrix(alpha: int, beta: int) -> np.ndarray:
    return np.array([[alpha, beta], [beta, alpha]], dtype=np.int64)


def cyclic_matrix(q: int) -> np.ndarray:
    R = np.zeros((q, q), dtype=np.int64)
    for j in range(q):
        R[(j + 1) % q, j] = 1
    return R


def mary_matrix(m: int) -> np.ndarray:
    """Node-occupancy urn of the m-ary search tree (``m - 1`` colours)."""
    q = m - 1
    R = np.zeros((q, q), dtype=np.int64)
    for i in range(q):
        R[i, i] = -(i + 1)
    for i in range(1, q):
        R[i, i - 1] = i + 1
    R[0, q - 1] += m
    return R


def burn_matrix(m: int) -> np.ndarray:
    """Gap-process urn of a B-tree with parameter ``m`` (``m`` colours)."""
    q = m
    R = np.zeros((q, q), dtype=np.int64)
    for i in range(q):
        R[i, i] = -(m + i)
    for i in range(1, q):
        R[i, i - 1] = m + i
    R[0, q - 1] += 2 * m
    return R


_FAMILY_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(([^)]*)\))?\s*$")
_PARAM_NAMES = {
    "polya": ("q",),
    "friedman": ("alpha", "beta"),
    "cyclic": ("q",),
    "mary": ("m",),
    "burn": ("m",),
}


def parse_family(spec: str) -> tuple[str, dict]:
    """Parse ``"friedman(1,2)"``-style descriptors into (family, params)."""
    match = _FAMILY_RE.match(spec.lower())
    if not match:
        raise BadFamilyParameter(f"cannot parse family descriptor {spec!r}")
    family, args = match.group(1), match.group(2)
    if family not in _PARAM_NAMES:
        raise BadFamilyParameter(f"unknown family {family!r}")
    values = [a.strip() for a in args.split(",")] if args else []
    names = _PARAM_NAMES[family]
    if len(values) > len(names):
        raise BadFamilyParameter(f"{family} takes at most {len(names)}"
                                 f" parameters")
    try:
        params = {n: int(v) for n, v in zip(names, values)}
    except ValueError as exc:
        raise BadFamilyParameter(str(exc)) from None
    return family, params


def zoo(spec: str | Mapping[str, Any], X0: Sequence[int] | None = None,
        **params) -> UrnModel:
    """Return one of the standard urn families.

    ``spec`` is a family name (``polya``, ``friedman``, ``cyclic``, ``mary``,
    ``burn``) with parameters as keywords, a descriptor string such as
    ``"mary(27)"``, or a mapping with a ``"family"`` key.

    Examples
    --------
    >>> zoo("friedman", alpha=1, beta=2).r
    3
    >>> zoo("burn(2)").R.tolist()
    [[-2, 4], [3, -3]]
    """
    if isinstance(spec, Mapping):
        params = {**{k: v for k, v in spec.items() if k not in ("family", "X0")},
                  **params}
        if X0 is None:
            X0 = spec.get("X0")
        family = spec["family"]
    else:
        family, parsed = parse_family(spec)
        params = {**parsed, **params}
    family = family.lower()
    allowed = _PARAM_NAMES.get(family)
    if allowed is None:
        raise BadFamilyParameter(f"unknown family {family!r}")
    extra = set(params) - set(allowed)
    if extra:
        raise BadFamilyParameter(f"unexpected parameters {sorted(extra)} for"
                                 f" {family}")
    for key, val in params.items():
        if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
            raise BadFamilyParameter(f"{key} must be an integer, got {val!r}")

    if family == "polya":
        q = int(params.get("q", 2))
        if q < 2:
            raise BadFamilyParameter("polya needs q >= 2")
        R, default, name = polya_matrix(q), np.ones(q), f"polya({q})"
    elif family == "friedman":
        try:
            alpha, beta = int(params["alpha"]), int(params["beta"])
        except KeyError as exc:
            raise BadFamilyParameter(f"friedman needs {exc.args[0]}") from None
        if alpha < -1 or beta < 0 or alpha + beta <= 0:
            raise BadFamilyParameter(
                "friedman needs alpha >= -1, beta >= 0 and alpha + beta > 0")
        R, default = friedman_matrix(alpha, beta), np.ones(2)
        name = f"friedman({alpha},{beta})"
    elif family == "cyclic":
        q = _required(params, "q", family)
        if q < 2:
            raise BadFamilyParameter("cyclic needs q >= 2")
        R, default, name = cyclic_matrix(q), np.eye(q)[0], f"cyclic({q})"
    elif family == "mary":
        m = _required(params, "m", family)
        if m < 3:
            raise BadFamilyParameter(
                "mary(m) has m - 1 colours; an urn model needs m >= 3")
        R, default, name = mary_matrix(m), np.eye(m - 1)[0], f"mary({m})"
    else:
        m = _required(params, "m", family)
        if m < 2:
            raise BadFamilyParameter("burn needs m >= 2")
        # one leaf node holding m gaps of the first type
        R, default, name = burn_matrix(m), m * np.eye(m)[0], f"burn({m})"

    x0 = default.astype(np.int64) if X0 is None else X0
    return UrnModel(name, R, x0)


def _required(params: dict, key: str, family: str) -> int:
    if key not in params:
        raise BadFamilyParameter(f"{family} needs parameter {key!r}")
    return int(params[key])


# -- config files -------------------------------------------------------------

def model_from_dict(doc: Mapping[str, Any]) -> UrnModel:
    if not isinstance(doc, Mapping):
        raise ConfigError("model config must be a JSON object")
    missing = {"R", "X0"} - set(doc)
    if missing:
        raise ConfigError(f"model config lacks {sorted(missing)}")
    R, X0 = doc["R"], doc["X0"]
    if not (isinstance(R, list) and R and all(isinstance(row, list) for row in R)):
        raise ConfigError("R must be a non-empty list of rows")
    if len({len(row) for row in R}) != 1 or len(R) != len(R[0]):
        raise ConfigError("R must be square")
    if not isinstance(X0, list) or len(X0) != len(R):
        raise ConfigError("X0 must be a list with one entry per colour")
    for v in [v for row in R for v in row] + list(X0):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"non-integer entry {v!r} in model config")
    try:
        return build_model(R, X0, str(doc.get("name", "urn")))
    except ModelError as exc:
        raise type(exc)(str(exc)) from None


def load_model(path: str | Path) -> UrnModel:
    """Read a JSON model config (``R`` given row-major, as printed)."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return model_from_dict(doc)


def save_model(model: UrnModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")
