"""Domains, bounding boxes and partitions, plus restriction to sub-domains."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

# Slack for float round-off when checking that boxes sit inside their domain.
_TOL = 1e-9


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned hypercube ``[origin, origin + lengths]``."""

    lengths: tuple[float, ...]
    origin: tuple[float, ...] = None

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        if len(lengths) == 0:
            raise ContractError("domain needs at least one dimension")
        if not all(v > 0 and np.isfinite(v) for v in lengths):
            raise ContractError(f"domain lengths must be positive, got {lengths}")
        origin = (0.0,) * len(lengths) if self.origin is None else tuple(float(v) for v in self.origin)
        if len(origin) != len(lengths):
            raise ContractError("origin and lengths differ in dimension")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def to_local(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) - np.asarray(self.origin)

    def contains(self, sub: "Domain") -> bool:
        if sub.dim != self.dim:
            return False
        lo = np.asarray(sub.origin) - np.asarray(self.origin)
        hi = lo + np.asarray(sub.lengths)
        return bool(np.all(lo >= -_TOL) and np.all(hi <= np.asarray(self.lengths) + _TOL))

    def to_dict(self) -> dict:
        return {"lengths": list(self.lengths), "origin": list(self.origin)}


@dataclass(frozen=True)
class BoundingBox:
    """Outer product of closed intervals ``[start, start + len]``.

    ``start_atom[d]`` marks a start drawn as the point mass at 0 and
    ``end_atom[d]`` an end drawn as the point mass at the domain's far edge.
    The flags, not float comparisons, decide which part of the measure a
    coordinate belongs to.
    """

    starts: tuple[float, ...]
    lens: tuple[float, ...]
    start_atom: tuple[bool, ...]
    end_atom: tuple[bool, ...]

    def __post_init__(self):
        starts = tuple(float(v) for v in self.starts)
        lens = tuple(float(v) for v in self.lens)
        sa = tuple(bool(v) for v in self.start_atom)
        ea = tuple(bool(v) for v in self.end_atom)
        if not (len(starts) == len(lens) == len(sa) == len(ea)):
            raise ContractError("box fields differ in dimension")
        if any(v < 0 for v in lens):
            raise ContractError(f"negative box length {lens}")
        for s, a in zip(starts, sa):
            if a and s != 0.0:
                raise ContractError("start_atom set but start is not 0")
            if not a and s <= 0.0:
                raise ContractError("start at 0 must be flagged as the atom")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "lens", lens)
        object.__setattr__(self, "start_atom", sa)
        object.__setattr__(self, "end_atom", ea)

    @property
    def dim(self) -> int:
        return len(self.starts)

    @classmethod
    def full(cls, domain: Domain) -> "BoundingBox":
        d = domain.dim
        return cls((0.0,) * d, domain.lengths, (True,) * d, (True,) * d)

    def replace_dim(self, d: int, s: float, l: float, start_atom: bool, end_atom: bool) -> "BoundingBox":
        def put(seq, v):
            return seq[:d] + (v,) + seq[d + 1:]

        return BoundingBox(put(self.starts, s), put(self.lens, l),
                           put(self.start_atom, start_atom), put(self.end_atom, end_atom))


def covers(box: BoundingBox, x) -> bool:
    """True iff ``start <= x <= start + len`` on every dimension.

    An end atom reaches the domain edge exactly, so it bounds nothing for
    points inside the domain.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != box.dim:
        raise ContractError(f"point has {x.size} dims, box has {box.dim}")
    for s, l, end_atom, xi in zip(box.starts, box.lens, box.end_atom, x):
        if xi < s or (not end_atom and xi > s + l):
            return False
    return True


def volume(box: BoundingBox) -> float:
    return float(np.prod(box.lens))


@dataclass(frozen=True)
class Partition:
    """A draw from the process: boxes in time order, with their costs."""

    domain: Domain
    tau: float
    lam: float
    boxes: tuple[BoundingBox, ...] = ()
    costs: tuple[float, ...] = ()

    def __post_init__(self):
        boxes = tuple(self.boxes)
        costs = tuple(float(c) for c in self.costs)
        if not self.tau > 0:
            raise ContractError(f"tau must be positive, got {self.tau}")
        if not self.lam >= 0:
            raise ContractError(f"lambda must be non-negative, got {self.lam}")
        if len(boxes) != len(costs):
            raise ContractError("boxes and costs differ in length")
        if any(c < 0 for c in costs) or sum(costs) > self.tau * (1 + _TOL):
            raise ContractError("costs must be non-negative gaps summing to at most tau")
        L = self.domain.lengths
        for b in boxes:
            if b.dim != self.domain.dim:
                raise ContractError("box dimension differs from domain")
            for d in range(b.dim):
                if b.starts[d] + b.lens[d] > L[d] * (1 + _TOL) + _TOL:
                    raise ContractError(f"box leaves the domain on dimension {d}")
                if b.end_atom[d] and abs(b.starts[d] + b.lens[d] - L[d]) > _TOL * max(1.0, L[d]):
                    raise ContractError("end_atom set but box does not reach the domain edge")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "lam", float(self.lam))

    def __len__(self):
        return len(self.boxes)

    @property
    def K(self) -> int:
        return len(self.boxes)

    @cached_property
    def starts(self) -> np.ndarray:
        a = np.array([b.starts for b in self.boxes], dtype=float).reshape(self.K, self.domain.dim)
        a.flags.writeable = False
        return a

    @cached_property
    def lens(self) -> np.ndarray:
        a = np.array([b.lens for b in self.boxes], dtype=float).reshape(self.K, self.domain.dim)
        a.flags.writeable = False
        return a

    @cached_property
    def ends(self) -> np.ndarray:
        # end atoms sit exactly on the domain edge, whatever s + l rounds to
        flags = np.array([b.end_atom for b in self.boxes], dtype=bool).reshape(self.K, self.domain.dim)
        a = np.where(flags, np.asarray(self.domain.lengths), self.starts + self.lens)
        a.flags.writeable = False
        return a

    @property
    def times(self) -> np.ndarray:
        return np.cumsum(self.costs)

    def volumes(self) -> np.ndarray:
        return np.prod(self.lens, axis=1)

    def coverage(self, X) -> np.ndarray:
        """Boolean ``(N, K)`` matrix: point n lies in box k."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        inside = (X[:, None, :] >= self.starts[None]) & (X[:, None, :] <= self.ends[None])
        return inside.all(axis=2)

    def with_box(self, k: int, box: BoundingBox) -> "Partition":
        boxes = self.boxes[:k] + (box,) + self.boxes[k + 1:]
        return Partition(self.domain, self.tau, self.lam, boxes, self.costs)

    def insert(self, box: BoundingBox, t: float) -> tuple["Partition", int]:
        """Add ``box`` born at time ``t``; returns the new partition and its index."""
        times = self.times
        k = int(np.searchsorted(times, t))
        prev = times[k - 1] if k > 0 else 0.0
        costs = list(self.costs)
        if k < len(costs):
            costs[k] = times[k] - t
        costs.insert(k, t - prev)
        boxes = self.boxes[:k] + (box,) + self.boxes[k:]
        return Partition(self.domain, self.tau, self.lam, boxes, costs), k

    def remove(self, k: int) -> "Partition":
        costs = list(self.costs)
        gap = costs.pop(k)
        if k < len(costs):
            costs[k] += gap
        return Partition(self.domain, self.tau, self.lam, self.boxes[:k] + self.boxes[k + 1:], costs)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "lambda": self.lam,
            "domain": self.domain.to_dict(),
            "boxes": [
                {"start": list(b.starts), "len": list(b.lens), "cost": c,
                 "start_atom": list(b.start_atom), "end_atom": list(b.end_atom)}
                for b, c in zip(self.boxes, self.costs)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        dom = Domain(d["domain"]["lengths"], d["domain"]["origin"])
        boxes = [BoundingBox(b["start"], b["len"], b["start_atom"], b["end_atom"]) for b in d["boxes"]]
        return cls(dom, d["tau"], d["lambda"], boxes, [b["cost"] for b in d["boxes"]])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "Partition":
        return cls.from_dict(json.loads(s))


def clip_intervals(starts, lens, ends, lo, hi):
    """Intersect intervals ``[s, e]`` (per dimension) with the window ``[lo, hi]``.

    Works on ``(M, D)`` arrays so the batch samplers can share it. ``ends``
    must already be exact for end atoms (see ``Partition.ends``). Returns
    ``keep`` (boxes meeting the window on every dimension) and the clipped
    starts, lengths and boundary flags in window coordinates. Intervals
    that are not clipped keep their length bit-for-bit.
    """
    starts = np.asarray(starts, dtype=float)
    lens = np.asarray(lens, dtype=float)
    ends = np.asarray(ends, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    keep = np.all((starts <= hi) & (ends >= lo), axis=1)

    new_sa = starts <= lo
    new_ea = ends >= hi
    new_s = np.where(new_sa, 0.0, starts - lo)
    new_l = np.where(new_sa, ends - lo, lens)
    new_l = np.where(new_ea, (hi - lo) - new_s, new_l)
    new_l = np.maximum(new_l, 0.0)
    return keep, new_s, new_l, new_sa, new_ea


def _merge_gaps(costs, keep):
    """Gaps between surviving time points: dropped gaps fold into the next survivor."""
    out = []
    carry = 0.0
    for c, k in zip(costs, keep):
        if k:
            out.append(c + carry if carry else c)
            carry = 0.0
        else:
            carry += c
    return out


def restrict(partition: Partition, sub: Domain) -> Partition:
    """Restrict a partition to ``sub`` (given in the same absolute frame)."""
    dom = partition.domain
    if not dom.contains(sub):
        raise ContractError("sub-domain is not contained in the partition's domain")
    lo = np.asarray(sub.origin) - np.asarray(dom.origin)
    hi = lo + np.asarray(sub.lengths)
    if partition.K == 0:
        return Partition(sub, partition.tau, partition.lam)
    keep, s, l, nsa, nea = clip_intervals(partition.starts, partition.lens, partition.ends, lo, hi)
    boxes = [
        BoundingBox(s[k], l[k], nsa[k], nea[k])
        for k in range(partition.K) if keep[k]
    ]
    costs = _merge_gaps(partition.costs, keep)
    return Partition(sub, partition.tau, partition.lam, boxes, costs)


def domain_from_points(points: Sequence, margin: float = 0.0) -> Domain:
    """Minimum bounding box of ``points``, widened by ``margin`` times each side.

    A dimension with zero spread gets unit length so the domain stays valid.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    lo = P.min(axis=0)
    span = P.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    return Domain(tuple(span * (1 + 2 * margin)), tuple(lo - margin * span))
