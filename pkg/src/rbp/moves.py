"""Proposal mechanics shared by the regression and relational samplers."""

from __future__ import annotations

import math

from .partition import Partition
from .sampler import RbpParams, box_count_rate, sample_box, sample_dim


def params_of(partition: Partition) -> RbpParams:
    return RbpParams(partition.tau, partition.lam)


def propose_birth(partition: Partition, rng) -> tuple[Partition, int]:
    """New prior box born at a uniform time on (0, tau]; returns it with its index."""
    box = sample_box(params_of(partition), partition.domain, rng)
    t = partition.tau * (1.0 - rng.random())
    return partition.insert(box, t)


def log_add_ratio(partition: Partition, p0: float) -> float:
    """Prior and proposal part of the add acceptance ratio from K to K + 1 boxes."""
    rate = box_count_rate(params_of(partition), partition.domain)
    return math.log(rate) + math.log1p(-p0) - math.log(partition.K + 1) - math.log(p0)


def log_delete_ratio(partition: Partition, p0: float) -> float:
    """Prior and proposal part of the delete ratio from K to K - 1 boxes."""
    rate = box_count_rate(params_of(partition), partition.domain)
    return math.log(partition.K) + math.log(p0) - math.log(rate) - math.log1p(-p0)


def propose_geometry(partition: Partition, k: int, d: int, rng) -> Partition:
    """Redraw dimension ``d`` of box ``k`` from the prior."""
    s, l, a, b = sample_dim(partition.lam, partition.domain.lengths[d], rng)
    return partition.with_box(k, partition.boxes[k].replace_dim(d, s, l, a, b))


def accept(log_alpha: float, rng) -> bool:
    """Metropolis test ``u < min(1, exp(log_alpha))``; always draws one uniform."""
    u = rng.random()
    return log_alpha >= 0 or u < math.exp(log_alpha)
