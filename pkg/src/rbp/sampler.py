"""Forward sampling and log-densities of the rectangular bounding process."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .partition import BoundingBox, ContractError, Domain, Partition, clip_intervals


@dataclass(frozen=True)
class RbpParams:
    tau: float
    lam: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ContractError(f"tau must be positive, got {self.tau}")
        if not self.lam >= 0:
            raise ContractError(f"lambda must be non-negative, got {self.lam}")


def box_count_rate(params: RbpParams, domain: Domain) -> float:
    """Poisson rate of the number of boxes, ``tau * prod(1 + lam * L)``."""
    return params.tau * float(np.prod([1.0 + params.lam * L for L in domain.lengths]))


def coverage_probability(params: RbpParams, domain: Domain) -> float:
    """Probability that a single box covers any fixed point of the domain."""
    return float(np.prod([1.0 / (1.0 + params.lam * L) for L in domain.lengths]))


def sample_dims(lam: float, L: float, size, rng):
    """Vectorised draw of ``size`` intervals on ``[0, L]``.

    Returns ``(s, l, start_atom, end_atom)`` arrays. The start is the atom
    at 0 with probability ``1 / (1 + lam L)``, otherwise ``L * u`` with u
    on (0, 1]. The length is the atom ``L - s`` with probability
    ``exp(-lam (L - s))``, otherwise a truncated exponential drawn by
    inverse CDF.
    """
    if lam == 0:
        return (np.zeros(size), np.full(size, float(L)),
                np.ones(size, dtype=bool), np.ones(size, dtype=bool))
    u_atom = rng.random(size)
    u_pos = rng.random(size)
    u_end = rng.random(size)
    u_len = rng.random(size)

    start_atom = u_atom < 1.0 / (1.0 + lam * L)
    s = np.where(start_atom, 0.0, L * (1.0 - u_pos))
    room = np.where(start_atom, float(L), L - s)
    end_atom = u_end < np.exp(-lam * room)
    l_trunc = -np.log1p(u_len * np.expm1(-lam * room)) / lam
    l = np.where(end_atom, room, np.minimum(l_trunc, room))
    return s, l, start_atom, end_atom


def sample_dim(lam: float, L: float, rng) -> tuple[float, float, bool, bool]:
    s, l, a, b = sample_dims(lam, L, 1, rng)
    return float(s[0]), float(l[0]), bool(a[0]), bool(b[0])


def sample_box(params: RbpParams, domain: Domain, rng) -> BoundingBox:
    draws = [sample_dim(params.lam, L, rng) for L in domain.lengths]
    s, l, a, b = zip(*draws)
    return BoundingBox(s, l, a, b)


@dataclass
class PartitionBatch:
    """Many partitions in flat arrays; boxes of partition i are ``offsets[i]:offsets[i+1]``."""

    domain: Domain
    params: RbpParams
    counts: np.ndarray
    starts: np.ndarray
    lens: np.ndarray
    start_atom: np.ndarray
    end_atom: np.ndarray
    times: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    @property
    def owner(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts)), self.counts)

    @property
    def ends(self) -> np.ndarray:
        return np.where(self.end_atom, np.asarray(self.domain.lengths), self.starts + self.lens)

    def gaps(self) -> np.ndarray:
        """Costs ``t_k - t_{k-1}`` for every box, with ``t_0 = 0`` per partition."""
        prev = np.concatenate([[0.0], self.times[:-1]])
        first = np.zeros(len(self.times), dtype=bool)
        first[self.offsets[:-1][self.counts > 0]] = True
        prev[first] = 0.0
        return self.times - prev

    def volumes(self) -> np.ndarray:
        """Total box volume of each partition."""
        return np.bincount(self.owner, weights=np.prod(self.lens, axis=1), minlength=len(self.counts))

    def partition(self, i: int) -> Partition:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        boxes = [BoundingBox(self.starts[k], self.lens[k], self.start_atom[k], self.end_atom[k])
                 for k in range(lo, hi)]
        t = self.times[lo:hi]
        costs = np.diff(np.concatenate([[0.0], t]))
        return Partition(self.domain, self.params.tau, self.params.lam, boxes, costs)

    def restrict(self, sub: Domain) -> "PartitionBatch":
        if not self.domain.contains(sub):
            raise ContractError("sub-domain is not contained in the batch domain")
        lo = np.asarray(sub.origin) - np.asarray(self.domain.origin)
        hi = lo + np.asarray(sub.lengths)
        keep, s, l, sa, ea = clip_intervals(self.starts, self.lens, self.ends, lo, hi)
        counts = np.bincount(self.owner[keep], minlength=len(self.counts))
        return PartitionBatch(sub, self.params, counts, s[keep], l[keep], sa[keep], ea[keep], self.times[keep])


def sample_partitions(params: RbpParams, domain: Domain, n: int, rng) -> PartitionBatch:
    """Draw ``n`` independent partitions at once."""
    counts = rng.poisson(box_count_rate(params, domain), size=n)
    M = int(counts.sum())
    cols = [sample_dims(params.lam, L, M, rng) for L in domain.lengths]
    starts, lens, sa, ea = (np.column_stack([c[j] for c in cols]).reshape(M, domain.dim) for j in range(4))
    # arrival times uniform on (0, tau], sorted within each partition
    t = params.tau * (1.0 - rng.random(M))
    owner = np.repeat(np.arange(n), counts)
    t = t[np.lexsort((t, owner))]
    return PartitionBatch(domain, params, counts, starts, lens, sa.astype(bool), ea.astype(bool), t)


def sample_partition(params: RbpParams, domain: Domain, rng) -> Partition:
    return sample_partitions(params, domain, 1, rng).partition(0)


def log_density_dim(s: float, l: float, start_atom: bool, end_atom: bool, lam: float, L: float) -> float:
    """Log of the mixed density of one interval.

    Atomic endpoints contribute probability mass, the others density
    w.r.t. Lebesgue measure, so each non-atomic endpoint adds ``log lam``.
    Returns ``-inf`` for configurations with zero probability under
    ``lam = 0``.
    """
    n_cont = (not start_atom) + (not end_atom)
    if lam == 0:
        return 0.0 if n_cont == 0 else -math.inf
    return -lam * l - math.log1p(lam * L) + n_cont * math.log(lam)


def log_density_box(box: BoundingBox, params: RbpParams, domain: Domain) -> float:
    return sum(
        log_density_dim(box.starts[d], box.lens[d], box.start_atom[d], box.end_atom[d],
                        params.lam, domain.lengths[d])
        for d in range(domain.dim)
    )


def log_density_partition(partition: Partition, params: RbpParams | None = None) -> float:
    """Log-density of a partition with its boxes listed in time order.

    Poisson count, sorted arrival times (density ``K! / tau^K``) and
    i.i.d. boxes combine to ``-rate + K log(rate / tau) + sum log p(box)``.
    """
    if params is None:
        params = RbpParams(partition.tau, partition.lam)
    rate = box_count_rate(params, partition.domain)
    K = partition.K
    out = -rate + K * math.log(rate / params.tau)
    return out + sum(log_density_box(b, params, partition.domain) for b in partition.boxes)
