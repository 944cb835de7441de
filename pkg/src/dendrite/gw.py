"""Galton-Watson trees conditioned on their total progeny.

Offspring laws all have mean one.  A conditioned tree is drawn exactly: an
i.i.d. offspring vector of length ``n`` is resampled until it sums to
``n - 1`` and the cycle lemma then picks the unique rotation that is a valid
Lukasiewicz path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gamma, gammaln, zeta

from .exceptions import DomainError, RetryExhaustedError
from .streams import as_generator
from .trees import OrderedTree

KINDS = ("geometric-half", "poisson-1", "stable-tail")
# rejection cost per batch, in offspring draws
_BATCH_DRAWS = 2_000_000


@dataclass(frozen=True)
class OffspringDistribution:
    """Critical offspring law.

    ``stable-tail`` uses ``p_k = c k^(-1-alpha)`` for ``k >= k0``, zero mass on
    ``2..k0-1``, and ``p_1``, ``p_0`` solved for mean one and total mass one.
    """
    kind: str
    alpha: float = 1.5
    c: float = 0.5
    k0: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown offspring kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "stable-tail":
            if not 1.0 < self.alpha < 2.0:
                raise DomainError("stable-tail index alpha must lie in (1, 2)")
            if not self.c > 0:
                raise DomainError("tail constant c must be positive")
            if int(self.k0) != self.k0 or self.k0 < 2:
                raise DomainError("k0 must be an integer >= 2")
            if self._t1 > 1.0:
                raise DomainError("tail too heavy: c * sum_{k>=k0} k^-alpha exceeds one")

    @classmethod
    def from_config(cls, doc: dict) -> "OffspringDistribution":
        kind = doc.get("offspring")
        if kind == "stable-tail":
            return cls(kind, float(doc.get("alpha", 1.5)), float(doc.get("tail-c", 0.5)),
                       int(doc.get("k0", 2)))
        return cls(kind)

    # tail sums sum_{k>=k0} c k^(-alpha) and sum_{k>=k0} c k^(-1-alpha)
    @property
    def _t1(self) -> float:
        return float(self.c * zeta(self.alpha, self.k0))

    @property
    def _t0(self) -> float:
        return float(self.c * zeta(1.0 + self.alpha, self.k0))

    @property
    def p0(self) -> float:
        if self.kind == "geometric-half":
            return 0.5
        if self.kind == "poisson-1":
            return math.exp(-1.0)
        return self._t1 - self._t0

    @property
    def p1(self) -> float:
        if self.kind == "geometric-half":
            return 0.25
        if self.kind == "poisson-1":
            return math.exp(-1.0)
        return 1.0 - self._t1

    def pmf(self, k):
        """``P(xi = k)``, vectorised over integer ``k``."""
        k = np.asarray(k)
        kf = k.astype(float)
        if self.kind == "geometric-half":
            out = 0.5 ** (kf + 1.0)
        elif self.kind == "poisson-1":
            out = np.exp(-1.0 - gammaln(kf + 1.0))
        else:
            out = np.where(k >= self.k0, self.c * np.power(np.maximum(kf, 1.0), -1.0 - self.alpha), 0.0)
            out = np.where(k == 0, self.p0, np.where(k == 1, self.p1, out))
        return np.where(k < 0, 0.0, out)

    @property
    def mean(self) -> float:
        if self.kind == "stable-tail":
            return self.p1 + self._t1
        return 1.0

    @property
    def total_mass(self) -> float:
        if self.kind == "stable-tail":
            return self.p0 + self.p1 + self._t0
        return 1.0

    @property
    def variance(self) -> float:
        return {"geometric-half": 2.0, "poisson-1": 1.0}.get(self.kind, math.inf)

    @property
    def tail_index(self) -> float:
        return self.alpha if self.kind == "stable-tail" else 2.0

    def describe(self) -> dict:
        out = {"offspring": self.kind, "p0": self.p0, "p1": self.p1, "mean": self.mean}
        if self.kind == "stable-tail":
            out.update({"alpha": self.alpha, "tail-c": self.c, "k0": int(self.k0)})
        return out

    def sample(self, rng, size) -> np.ndarray:
        """Independent offspring counts as an int64 array of the given shape."""
        rng = as_generator(rng)
        if self.kind == "geometric-half":
            return rng.geometric(0.5, size=size).astype(np.int64) - 1
        if self.kind == "poisson-1":
            return rng.poisson(1.0, size=size).astype(np.int64)
        u = rng.random(size)
        out = np.where(u < self.p0, 0, 1).astype(np.int64)
        tail = u >= self.p0 + self.p1
        out[tail] = self._sample_tail(rng, int(tail.sum()))
        return out

    def _sample_tail(self, rng, m: int) -> np.ndarray:
        """Exact draws from ``P(k) ~ k^(-1-alpha)`` on ``k >= k0``.

        Proposal: integer part of a Pareto(alpha) variable with scale ``k0``,
        whose mass at ``k`` is proportional to ``k^-alpha - (k+1)^-alpha``.
        The likelihood ratio ``r(k)`` is decreasing, so acceptance uses
        ``r(k) / r(k0)``.
        """
        a, k0 = self.alpha, float(self.k0)

        def r(k):
            # k^-a - (k+1)^-a written without cancellation at large k
            return 1.0 / (k * -np.expm1(-a * np.log1p(1.0 / k)))

        rmax = r(k0)
        out = np.empty(m, dtype=np.int64)
        filled = 0
        while filled < m:
            need = m - filled
            batch = need + need // 4 + 8
            k = np.floor(k0 * rng.random(batch) ** (-1.0 / a))
            keep = k[rng.random(batch) * rmax < r(k)][:need]
            out[filled:filled + keep.size] = keep.astype(np.int64)
            filled += keep.size
        return out


class ScalingSequence(NamedTuple):
    a_n: float
    alpha_n: float
    constant: float


def scaling_sequence(dist: OffspringDistribution, n: int) -> ScalingSequence:
    """Normalising sequences ``a_n`` and ``alpha_n = n / a_n``.

    Finite variance uses ``alpha_n = sqrt(n)``.  Stable tails use the pure
    power ``a_n = n^(1/alpha)``.  ``constant`` is the multiplicative factor
    that the exact domain-of-attraction normalisation would add (``sigma``
    or ``(c |Gamma(-alpha)|)^(1/alpha)``); it is reported, not applied.
    """
    if n < 1:
        raise DomainError("n must be positive")
    if dist.kind == "stable-tail":
        a_n = float(n) ** (1.0 / dist.alpha)
        const = float((dist.c * abs(gamma(-dist.alpha))) ** (1.0 / dist.alpha))
        return ScalingSequence(a_n, n / a_n, const)
    a_n = math.sqrt(n)
    return ScalingSequence(a_n, n / a_n, math.sqrt(dist.variance))


# --------------------------------------------------------------------------
# Lukasiewicz paths
# --------------------------------------------------------------------------

def lukasiewicz(t: OrderedTree) -> np.ndarray:
    """Increments ``offspring - 1`` in depth-first order."""
    return t.offspring - 1


def is_lukasiewicz(increments) -> bool:
    x = np.asarray(increments, dtype=np.int64)
    if x.size == 0 or np.any(x < -1):
        return False
    s = np.cumsum(x)
    return bool(s[-1] == -1 and np.all(s[:-1] >= 0))


def decode_lukasiewicz(increments) -> OrderedTree:
    """Ordered tree whose preorder child counts are ``increments + 1``."""
    x = np.asarray(increments, dtype=np.int64)
    if not is_lukasiewicz(x):
        raise DomainError("not a Lukasiewicz path: partial sums must stay >= 0 and end at -1")
    return _decode_offspring(x + 1)


def _decode_offspring(c) -> OrderedTree:
    n = len(c)
    children = [[] for _ in range(n)]
    stack, remaining = [], []
    for v in range(n):
        if stack:
            p = stack[-1]
            children[p].append(v)
            remaining[-1] -= 1
            if remaining[-1] == 0:
                stack.pop()
                remaining.pop()
        if c[v] > 0:
            stack.append(v)
            remaining.append(int(c[v]))
    return OrderedTree(children, 0)


def cycle_lemma_rotation(increments) -> int:
    """Start index of the unique rotation that is a Lukasiewicz path.

    Requires increments >= -1 summing to -1.  The rotation starts just after
    the first index where the partial sums reach their minimum.
    """
    x = np.asarray(increments, dtype=np.int64)
    if x.size == 0 or x.sum() != -1 or np.any(x < -1):
        raise DomainError("increments must be >= -1 and sum to -1")
    return int((np.argmin(np.cumsum(x)) + 1) % x.size)


def _rotate_rows(xi: np.ndarray) -> np.ndarray:
    n = xi.shape[1]
    start = (np.argmin(np.cumsum(xi - 1, axis=1), axis=1) + 1) % n
    idx = (start[:, None] + np.arange(n)[None, :]) % n
    return np.take_along_axis(xi, idx, axis=1)


# --------------------------------------------------------------------------
# conditioned sampling
# --------------------------------------------------------------------------

def sample_conditioned_offspring(dist: OffspringDistribution, n: int, size: int, rng,
                                 max_tries: int = 10_000_000) -> np.ndarray:
    """``size`` preorder offspring sequences of GW trees conditioned on ``n`` vertices.

    Returns an int64 array of shape ``(size, n)``.  ``max_tries`` bounds the
    number of length-``n`` vectors drawn.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    n = int(n)
    rng = as_generator(rng)
    if n == 1:
        return np.zeros((size, 1), dtype=np.int64)
    cap = max(1, min(65536, _BATCH_DRAWS // n))
    # batches double up to the cap so single small draws stay cheap
    rows = min(cap, max(64, size))
    found, tries, got = [], 0, 0
    while got < size:
        if tries >= max_tries:
            raise RetryExhaustedError(tries)
        take = min(rows, max_tries - tries)
        rows = min(cap, 2 * rows)
        xi = dist.sample(rng, (take, n))
        tries += take
        hit = xi[xi.sum(axis=1) == n - 1]
        if hit.shape[0]:
            hit = hit[:size - got]
            found.append(hit)
            got += hit.shape[0]
    return _rotate_rows(np.concatenate(found, axis=0))


def sample_conditioned_tree(dist: OffspringDistribution, n: int, rng,
                            max_tries: int = 10_000_000) -> OrderedTree:
    """Exact draw of a GW tree conditioned on ``n`` vertices, labelled in preorder."""
    c = sample_conditioned_offspring(dist, n, 1, rng, max_tries)[0]
    return _decode_offspring(c)


# --------------------------------------------------------------------------
# enumeration oracle
# --------------------------------------------------------------------------

def enumerate_offspring(n: int) -> list[tuple]:
    """All preorder child-count sequences of ordered trees on ``n`` vertices."""
    if n < 1:
        raise DomainError("n must be positive")
    out = []

    def rec(prefix, open_slots):
        i = len(prefix)
        if i == n - 1:
            if open_slots == 1:
                out.append(tuple(prefix) + (0,))
            return
        # after this vertex, open_slots - 1 + c slots remain; at least one is needed
        remaining = n - 1 - i
        for c in range(0, remaining + 1):
            slots = open_slots - 1 + c
            if 1 <= slots <= remaining:
                rec(prefix + [c], slots)

    if n == 1:
        return [(0,)]
    rec([], 1)
    return out


def enumerate_trees(n: int) -> list[OrderedTree]:
    return [_decode_offspring(c) for c in enumerate_offspring(n)]


def shape_probabilities(dist: OffspringDistribution, n: int) -> dict:
    """Conditioned law of the shape: ``P(tree) ~ prod_v p_{c(v)}``, keyed by offspring sequence."""
    shapes = enumerate_offspring(n)
    w = np.array([np.prod(dist.pmf(np.array(s))) for s in shapes])
    w = w / w.sum()
    return dict(zip(shapes, w.tolist()))
