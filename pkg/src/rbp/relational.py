"""Bernoulli-logistic relational model on [0, 1]^2 and its posterior sampler.

Node i sits at row coordinate ``xi[i]`` and column coordinate ``eta[i]``.
Each box carries a positive rate; the link probability of (i, j) is the
logistic of the summed rates of the boxes covering ``(xi[i], eta[j])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.stats import rankdata

from .moves import accept, log_add_ratio, log_delete_ratio, propose_birth, propose_geometry
from .partition import Domain, Partition
from .regression import ConfigError
from .sampler import RbpParams, sample_partition

UNIT_SQUARE = Domain((1.0, 1.0))


class MetricError(ValueError):
    pass


def sigmoid(x):
    """Logistic function without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def _bernoulli_ll(values, z) -> np.ndarray:
    # log sigma(z) for 1, log sigma(-z) for 0
    return values * z - np.logaddexp(0.0, z)


@dataclass(frozen=True)
class RelationalHyper:
    tau: float = 3.0
    lam: float = 0.99
    p0: float = 0.5
    n_birth_death: int = 1

    def __post_init__(self):
        if not 0 < self.p0 < 1:
            raise ConfigError(f"p0 must lie in (0, 1), got {self.p0}")
        RbpParams(self.tau, self.lam)


@dataclass(frozen=True)
class RelationalData:
    """Observed and held-out entries as ``(rows, cols, values)`` arrays."""

    n_nodes: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    heldout_rows: np.ndarray = None
    heldout_cols: np.ndarray = None
    heldout_values: np.ndarray = None

    def __post_init__(self):
        def arr(v, dtype):
            return np.asarray([] if v is None else v, dtype=dtype).ravel()

        fields = {
            "rows": arr(self.rows, np.int64), "cols": arr(self.cols, np.int64),
            "values": arr(self.values, float),
            "heldout_rows": arr(self.heldout_rows, np.int64), "heldout_cols": arr(self.heldout_cols, np.int64),
            "heldout_values": arr(self.heldout_values, float),
        }
        for name, v in fields.items():
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        n = self.n_nodes
        for r, c, v in ((self.rows, self.cols, self.values),
                        (self.heldout_rows, self.heldout_cols, self.heldout_values)):
            if not (len(r) == len(c) == len(v)):
                raise ConfigError("entry arrays differ in length")
            if len(r) and (r.min() < 0 or c.min() < 0 or r.max() >= n or c.max() >= n):
                raise ConfigError(f"node index outside [0, {n})")
            if len(v) and not np.all((v == 0) | (v == 1)):
                raise ConfigError("entry values must be 0 or 1")
        obs = set(zip(self.rows.tolist(), self.cols.tolist()))
        if obs & set(zip(self.heldout_rows.tolist(), self.heldout_cols.tolist())):
            raise ConfigError("a pair is both observed and held out")
        # entry indices touching each row / column, for local likelihood ratios
        object.__setattr__(self, "_by_row", _group(self.rows, n))
        object.__setattr__(self, "_by_col", _group(self.cols, n))

    @classmethod
    def from_triples(cls, n_nodes: int, observed: Iterable, heldout: Iterable = ()) -> "RelationalData":
        obs = np.asarray(list(observed), dtype=float).reshape(-1, 3)
        held = np.asarray(list(heldout), dtype=float).reshape(-1, 3)
        return cls(n_nodes, obs[:, 0], obs[:, 1], obs[:, 2], held[:, 0], held[:, 1], held[:, 2])

    def entries_of(self, node: int, axis: str) -> np.ndarray:
        return (self._by_row if axis == "row" else self._by_col)[node]


def _group(index: np.ndarray, n: int) -> list[np.ndarray]:
    order = np.argsort(index, kind="stable")
    bounds = np.searchsorted(index[order], np.arange(n + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(n)]


@dataclass(frozen=True)
class RelationalState:
    partition: Partition
    rates: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    hyper: RelationalHyper

    def __post_init__(self):
        for name in ("rates", "xi", "eta"):
            v = np.array(getattr(self, name), dtype=float).ravel()
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        if len(self.rates) != self.partition.K:
            raise ConfigError("one rate per box required")
        if np.any(self.rates <= 0):
            raise ConfigError("rates must be positive")
        if len(self.xi) != len(self.eta):
            raise ConfigError("xi and eta differ in length")
        if np.any((self.xi < 0) | (self.xi > 1) | (self.eta < 0) | (self.eta > 1)):
            raise ConfigError("node coordinates must lie in [0, 1]")

    @property
    def K(self) -> int:
        return self.partition.K

    def row_cover(self) -> np.ndarray:
        """``(N, K)``: xi_i inside box k's row interval."""
        p = self.partition
        return (self.xi[:, None] >= p.starts[:, 0]) & (self.xi[:, None] <= p.ends[:, 0])

    def col_cover(self) -> np.ndarray:
        p = self.partition
        return (self.eta[:, None] >= p.starts[:, 1]) & (self.eta[:, None] <= p.ends[:, 1])

    def intensity(self, rows, cols) -> np.ndarray:
        """Summed rates of the boxes covering each ``(xi[row], eta[col])``."""
        rows = np.asarray(rows, dtype=np.int64)
        if self.K == 0:
            return np.zeros(len(rows))
        R = self.row_cover()[rows]
        C = self.col_cover()[np.asarray(cols, dtype=np.int64)]
        return (R & C) @ self.rates

    def to_dict(self) -> dict:
        d = self.partition.to_dict()
        d["rates"] = self.rates.tolist()
        d["xi"] = self.xi.tolist()
        d["eta"] = self.eta.tolist()
        return d


def _evolve(state: RelationalState, **changes) -> RelationalState:
    """``replace`` without re-validation, for updates that keep the invariants by construction."""
    new = object.__new__(RelationalState)
    new.__dict__.update(state.__dict__)
    for name, v in changes.items():
        if isinstance(v, np.ndarray):
            v.flags.writeable = False
        new.__dict__[name] = v
    return new


def link_probability(state: RelationalState, i: int, j: int) -> float:
    return float(sigmoid(state.intensity([i], [j])[0]))


def log_likelihood_rel(state: RelationalState, data: RelationalData) -> float:
    if len(data.values) == 0:
        return 0.0
    z = state.intensity(data.rows, data.cols)
    return float(np.sum(_bernoulli_ll(data.values, z)))


def mh_rate_step(state: RelationalState, data: RelationalData, k: int, rng) -> RelationalState:
    """Propose ``rate_k ~ Exp(1)`` (the prior); accept on likelihood ratio."""
    rates = state.rates.copy()
    rates[k] = rng.exponential(1.0)
    proposed = _evolve(state, rates=rates)
    log_alpha = log_likelihood_rel(proposed, data) - log_likelihood_rel(state, data)
    return proposed if accept(log_alpha, rng) else state


def mh_coordinate_step(state: RelationalState, data: RelationalData, node: int, axis: str, rng) -> RelationalState:
    """Propose a uniform coordinate for ``node``; only its row (or column) entries enter the ratio."""
    if axis not in ("row", "column"):
        raise ConfigError(f"axis must be 'row' or 'column', got {axis!r}")
    name = "xi" if axis == "row" else "eta"
    coords = getattr(state, name).copy()
    old = coords[node]
    coords[node] = rng.random()
    idx = data.entries_of(node, "row" if axis == "row" else "col")
    if len(idx) and state.K:
        d = 0 if axis == "row" else 1
        p = state.partition
        lo, hi = p.starts[:, d], p.ends[:, d]
        # cover of the partner coordinates on the other axis, weighted by rate
        if axis == "row":
            partner = state.eta[data.cols[idx]]
        else:
            partner = state.xi[data.rows[idx]]
        weighted = ((partner[:, None] >= p.starts[:, 1 - d]) & (partner[:, None] <= p.ends[:, 1 - d])) * state.rates
        z_old = weighted @ ((old >= lo) & (old <= hi))
        z_new = weighted @ ((coords[node] >= lo) & (coords[node] <= hi))
        v = data.values[idx]
        log_alpha = float(np.sum(_bernoulli_ll(v, z_new) - _bernoulli_ll(v, z_old)))
    else:
        log_alpha = 0.0
    return _evolve(state, **{name: coords}) if accept(log_alpha, rng) else state


def mh_geometry_rel_step(state: RelationalState, data: RelationalData, k: int, d: int, rng) -> RelationalState:
    proposed = _evolve(state, partition=propose_geometry(state.partition, k, d, rng))
    log_alpha = log_likelihood_rel(proposed, data) - log_likelihood_rel(state, data)
    return proposed if accept(log_alpha, rng) else state


def birth_death_rel_step(state: RelationalState, data: RelationalData, rng, add_bias: float = 1.0) -> RelationalState:
    """Add-or-delete proposal; new rates come from the Exp(1) prior.

    ``add_bias`` scales the add ratio and is only for mutation testing.
    """
    h = state.hyper
    part = state.partition
    if rng.random() < h.p0:
        new_part, k = propose_birth(part, rng)
        rates = np.insert(state.rates, k, rng.exponential(1.0))
        log_alpha = log_add_ratio(part, h.p0) + math.log(add_bias)
    else:
        if part.K == 0:
            return state
        k = int(rng.integers(part.K))
        new_part = part.remove(k)
        rates = np.delete(state.rates, k)
        log_alpha = log_delete_ratio(part, h.p0)
    proposed = _evolve(state, partition=new_part, rates=rates)
    log_alpha += log_likelihood_rel(proposed, data) - log_likelihood_rel(state, data)
    return proposed if accept(log_alpha, rng) else state


def relational_kernel(state: RelationalState, data: RelationalData, rng, add_bias: float = 1.0) -> RelationalState:
    """One sweep: birth/death, box geometry, rates, then every node's two coordinates."""
    for _ in range(state.hyper.n_birth_death):
        state = birth_death_rel_step(state, data, rng, add_bias=add_bias)
    for k in range(state.K):
        for d in range(2):
            state = mh_geometry_rel_step(state, data, k, d, rng)
    for k in range(state.K):
        state = mh_rate_step(state, data, k, rng)
    for node in range(len(state.xi)):
        state = mh_coordinate_step(state, data, node, "row", rng)
        state = mh_coordinate_step(state, data, node, "column", rng)
    return state


def sample_prior_state(n_nodes: int, hyper: RelationalHyper, rng) -> RelationalState:
    part = sample_partition(RbpParams(hyper.tau, hyper.lam), UNIT_SQUARE, rng)
    rates = rng.exponential(1.0, size=part.K)
    xi = rng.random(n_nodes)
    eta = rng.random(n_nodes)
    return RelationalState(part, rates, xi, eta, hyper)


def simulate_links(state: RelationalState, rows, cols, rng) -> np.ndarray:
    p = sigmoid(state.intensity(rows, cols))
    return (rng.random(len(p)) < p).astype(float)


def run_relational_mcmc(
    data: RelationalData,
    hyper: RelationalHyper,
    iters: int,
    rng,
    init: Optional[RelationalState] = None,
    burn_in: float = 0.5,
    thin: int = 1,
) -> list[RelationalState]:
    if len(data.values) == 0:
        raise ConfigError("no observed entries to fit")
    if iters < 1:
        raise ConfigError("iters must be at least 1")
    if not 0 <= burn_in < 1 or thin < 1:
        raise ConfigError("burn_in must lie in [0, 1) and thin be positive")
    state = init if init is not None else sample_prior_state(data.n_nodes, hyper, rng)
    first_kept = int(math.floor(burn_in * iters))
    samples = []
    for it in range(iters):
        state = relational_kernel(state, data, rng)
        if it >= first_kept and (it - first_kept) % thin == 0:
            samples.append(state)
    return samples


def posterior_scores(samples: list[RelationalState], rows, cols) -> np.ndarray:
    """Posterior-mean link probability for each ``(rows[e], cols[e])``."""
    if not samples:
        raise ConfigError("no posterior samples")
    return np.mean([sigmoid(s.intensity(rows, cols)) for s in samples], axis=0)


def auc(scores, labels=None) -> float:
    """Probability a random positive outscores a random negative; ties count 1/2.

    Accepts either parallel ``scores``/``labels`` arrays or a single sequence
    of ``(score, label)`` pairs.
    """
    if labels is None:
        pairs = np.asarray(scores, dtype=float).reshape(-1, 2)
        scores, labels = pairs[:, 0], pairs[:, 1]
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
