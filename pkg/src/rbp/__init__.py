"""Rectangular bounding process: sampling, densities, restriction and MCMC models."""

from .partition import BoundingBox, ContractError, Domain, Partition, covers, restrict, volume
from .sampler import (
    RbpParams,
    box_count_rate,
    coverage_probability,
    log_density_box,
    log_density_dim,
    log_density_partition,
    sample_dim,
    sample_partition,
    sample_partitions,
)

__all__ = [
    "BoundingBox", "ContractError", "Domain", "Partition", "covers", "restrict", "volume",
    "RbpParams", "box_count_rate", "coverage_probability", "log_density_box", "log_density_dim",
    "log_density_partition", "sample_dim", "sample_partition", "sample_partitions",
]
