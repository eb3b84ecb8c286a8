"""Exact integer simulation of the urn process.

A replica draws, at step ``n``, colour ``i`` with probability
``X_n[i] / (r n + |X0|)`` and adds column ``i`` of ``R``.  Randomness comes from
:class:`~urnlab.rng.CounterRNG`, so a batch is bit-identical for a given seed
whatever the number of worker threads.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import MissingCheckpoint, NegativeCount, Overflow
from .model import UrnModel
from .rng import CounterRNG, mulhi, philox


@dataclass(frozen=True)
class UrnState:
    n: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def initial_state(model: UrnModel) -> UrnState:
    return UrnState(0, model.X0.copy())


def choose_colour(counts: np.ndarray, pick: int) -> int:
    """Colour whose cumulative-count interval contains ``pick``."""
    return int(np.searchsorted(np.cumsum(counts)[:-1], pick, side="right"))


def step(model: UrnModel, state: UrnState, rng) -> UrnState:
    """One draw.

    ``rng`` is either a :class:`CounterRNG` (the draw is addressed by
    ``state.n``, reproducing :func:`simulate` exactly) or a
    ``numpy.random.Generator``.
    """
    total = model.balls_at(state.n)
    if state.total != total:
        raise NegativeCount(f"state holds {state.total} balls, expected {total}")
    if isinstance(rng, CounterRNG):
        pick = rng.index(state.n, total)
    else:
        pick = int(rng.integers(total))
    col = choose_colour(state.counts, pick)
    counts = state.counts + model.R[:, col]
    if np.any(counts < 0):
        raise NegativeCount(f"colour {col} count went negative at n={state.n}")
    return UrnState(state.n + 1, counts)


def transitions(model: UrnModel, counts, n: int):
    """All one-step successors of ``counts`` at time ``n``.

    Returns
    -------
    probs : ndarray, shape (q,)
        Probability of drawing each colour.
    successors : ndarray, shape (q, q)
        Row ``i`` is the composition after drawing colour ``i``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    probs = counts / model.balls_at(n)
    return probs, counts[None, :] + model.R.T


# -- batch simulation -----------------------------------------------------

@nb.njit(nogil=True, cache=True)
def _run_chunk(R, X0, checkpoints, seed, rep0, out, audit):
    q = X0.shape[0]
    r = R[:, 0].sum()
    n = checkpoints[-1]
    m = np.uint64(0xFFFFFFFF)
    s = np.uint64(32)
    k0 = np.uint64(seed) & m
    k1 = np.uint64(seed) >> s
    c = np.empty(q, np.int64)
    for i in range(out.shape[0]):
        rep = np.uint64(rep0 + i)
        c[:] = X0
        tot = X0.sum()
        ci = 0
        while ci < checkpoints.shape[0] and checkpoints[ci] == 0:
            out[i, ci, :] = c
            ci += 1
        for b in range((n + 1) // 2):
            bb = np.uint64(b)
            a0, a1, a2, a3 = philox(bb & m, bb >> s, rep & m, rep >> s, k0, k1)
            for h in range(2):
                t = 2 * b + h
                if t >= n:
                    break
                x = ((a0 << s) | a1) if h == 0 else ((a2 << s) | a3)
                pick = np.int64(mulhi(x, np.uint64(tot)))
                acc = 0
                col = 0
                for j in range(q - 1):
                    acc += c[j]
                    col += pick >= acc
                for j in range(q):
                    c[j] += R[j, col]
                tot += r
                if c[col] < 0:
                    return -(i + 1)
                if audit:
                    if c.sum() != tot or c.min() < 0:
                        return -(i + 1)
                if t + 1 == checkpoints[ci]:
                    out[i, ci, :] = c
                    ci += 1
    return 0


def default_checkpoints(n: int, extra=()) -> np.ndarray:
    """Geometric grid ``floor(n 2^-j)``, together with ``n`` and ``extra``."""
    pts = {int(n)}
    j = 1
    while n >> j:
        pts.add(int(n >> j))
        j += 1
    pts.update(int(e) for e in extra)
    return np.array(sorted(pts), dtype=np.int64)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get("URNLAB_THREADS", os.cpu_count() or 1))
    return max(1, int(workers))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One replica at its checkpoints; ``projections[c, k] = pi_k(X_n)``."""

    seed: int
    replica: int
    checkpoints: np.ndarray
    counts: np.ndarray
    projections: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class ReplicaBatch:
    """Compositions of ``N`` replicas at common checkpoints.

    ``counts`` has shape ``(N, C, q)`` with ``C = len(checkpoints)``.
    """

    model: UrnModel
    seed: int
    checkpoints: np.ndarray
    counts: np.ndarray

    @property
    def replicas(self) -> int:
        return self.counts.shape[0]

    @property
    def horizon(self) -> int:
        return int(self.checkpoints[-1])

    def index(self, n: int) -> int:
        hit = np.flatnonzero(self.checkpoints == n)
        if hit.size == 0:
            raise MissingCheckpoint(f"no checkpoint at n={n}")
        return int(hit[0])

    def at(self, n: int) -> np.ndarray:
        """Counts at draw ``n``, shape ``(N, q)``."""
        return self.counts[:, self.index(n), :]

    def proportions(self, n: int) -> np.ndarray:
        return self.at(n) / self.model.balls_at(n)

    def projections(self, basis, n: int | None = None) -> np.ndarray:
        """``pi_k`` of the counts; shape ``(N, C, q)``, or ``(N, q)`` at ``n``."""
        x = self.counts if n is None else self.at(n)
        return basis.coefficients(x.astype(float))

    def trajectory(self, i: int, basis=None) -> Trajectory:
        counts = self.counts[i]
        proj = None if basis is None else basis.coefficients(counts.astype(float))
        return Trajectory(self.seed, i, self.checkpoints, counts, proj)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.model.digest().encode())
        h.update(np.int64(self.seed).tobytes())
        h.update(np.ascontiguousarray(self.checkpoints).tobytes())
        h.update(np.ascontiguousarray(self.counts).tobytes())
        return h.hexdigest()[:16]


def simulate(model: UrnModel, n: int, N: int, seed: int = 0,
             checkpoints=None, workers: int | None = None,
             audit: bool = False) -> ReplicaBatch:
    """Simulate ``N`` independent replicas to horizon ``n``.

    Parameters
    ----------
    checkpoints : sequence of int, optional
        Draw counts at which compositions are stored; ``n`` is always added.
        Defaults to :func:`default_checkpoints`.
    workers : int, optional
        Thread count (default from ``URNLAB_THREADS``).  Does not affect
        results.
    audit : bool
        Check conservation and non-negativity after every draw.
    """
    n = int(n)
    N = int(N)
    if n < 0 or N < 1:
        raise ValueError("need n >= 0 and N >= 1")
    if n > model.max_horizon():
        raise Overflow(f"r*n + |X0| exceeds the 64-bit range for n={n}")
    if checkpoints is None:
        cps = default_checkpoints(n)
    else:
        cps = np.array(sorted({int(c) for c in checkpoints} | {n}), dtype=np.int64)
        if cps[0] < 0 or cps[-1] > n:
            raise ValueError("checkpoints must lie in [0, n]")
    R = np.ascontiguousarray(model.R, dtype=np.int64)
    X0 = np.ascontiguousarray(model.X0, dtype=np.int64)
    out = np.empty((N, cps.shape[0], model.q), dtype=np.int64)

    workers = worker_count(workers)
    chunks = np.array_split(np.arange(N), min(N, 4 * workers))
    chunks = [c for c in chunks if c.size]

    def run(idx):
        return _run_chunk(R, X0, cps, np.uint64(seed), int(idx[0]),
                          out[idx[0]:idx[-1] + 1], audit)

    if workers == 1:
        codes = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            codes = list(pool.map(run, chunks))
    for c, code in zip(chunks, codes):
        if code < 0:
            raise NegativeCount(f"replica {int(c[0]) - code - 1} violated"
                                " conservation or non-negativity")
    return ReplicaBatch(model, int(seed), cps, out)


def replay(model: UrnModel, n: int, seed: int, replica: int) -> UrnState:
    """Re-run one replica step by step through :func:`step`."""
    rng = CounterRNG(seed, replica)
    state = initial_state(model)
    for _ in range(n):
        state = step(model, state, rng)
    return state
