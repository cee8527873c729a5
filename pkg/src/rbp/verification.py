"""Monte Carlo checks of the process's properties and of the MCMC kernels.

Every check returns a :class:`TestReport`. Moment checks use 3-standard-error
bands, distributional checks a 0.01 level, and Geweke tests ``|z| < 4``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import regression as reg
from . import relational as rel
from .partition import ContractError, Domain
from .sampler import (
    RbpParams,
    box_count_rate,
    coverage_probability,
    sample_dims,
    sample_partitions,
)

LEVEL = 0.01
Z_BAND = 3.0
GEWEKE_Z = 4.0


@dataclass
class TestReport:
    name: str
    statistic: float
    threshold: float
    n_samples: int
    passed: bool
    details: str = ""
    seed: Optional[int] = None

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps({k: d[k] for k in ("name", "statistic", "threshold", "n_samples", "passed", "seed", "details")})


# keep pytest from collecting the report class
TestReport.__test__ = False


def _z(diff: float, se: float) -> float:
    if se > 0:
        return abs(diff) / se
    return 0.0 if diff == 0 else math.inf


def check_expected_volume(params: RbpParams, domain: Domain, n_samples: int, rng, chunk: int = 10_000) -> TestReport:
    """Mean total box volume against ``tau * prod(L)``."""
    if n_samples < 1000:
        raise ContractError("need at least 1000 samples")
    totals = []
    left = n_samples
    while left > 0:
        m = min(chunk, left)
        totals.append(sample_partitions(params, domain, m, rng).volumes())
        left -= m
    v = np.concatenate(totals)
    target = params.tau * float(np.prod(domain.lengths))
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n_samples))
    z = _z(mean - target, se)
    return TestReport("volume", z, Z_BAND, n_samples, z <= Z_BAND,
                      f"mean={mean:.6g} target={target:.6g} se={se:.3g} tau={params.tau} lambda={params.lam} "
                      f"lengths={list(domain.lengths)}")


def check_coverage(params: RbpParams, domain: Domain, query_points, n_samples: int, rng) -> TestReport:
    """Fraction of single boxes covering each query point against the constant prediction.

    Each point gets its own independent boxes so the homogeneity test sees
    independent binomial samples.
    """
    pts = np.atleast_2d(np.asarray(query_points, dtype=float))
    if pts.shape[1] != domain.dim:
        raise ContractError("query points differ in dimension from the domain")
    L = np.asarray(domain.lengths)
    if np.any(pts < 0) or np.any(pts > L):
        raise ContractError("query points must lie in the domain")
    p = coverage_probability(params, domain)
    hits = np.empty(len(pts), dtype=np.int64)
    for i, x in enumerate(pts):
        inside = np.ones(n_samples, dtype=bool)
        for d in range(domain.dim):
            s, l, _, ea = sample_dims(params.lam, L[d], n_samples, rng)
            end = np.where(ea, L[d], s + l)
            inside &= (s <= x[d]) & (x[d] <= end)
        hits[i] = inside.sum()
    frac = hits / n_samples
    se = math.sqrt(p * (1 - p) / n_samples)
    zs = np.array([_z(f - p, se) for f in frac])
    if np.all(hits == hits[0]) or np.all(hits == 0) or np.all(hits == n_samples):
        p_homog = 1.0
    else:
        p_homog = float(stats.chi2_contingency(np.vstack([hits, n_samples - hits]))[1])
    zmax = float(zs.max())
    passed = zmax <= Z_BAND and p_homog >= LEVEL
    return TestReport("coverage", zmax, Z_BAND, n_samples, passed,
                      f"target={p:.6g} fractions={np.round(frac, 5).tolist()} homogeneity_p={p_homog:.4g}")


def _count_chi2(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample chi-square on box counts, pooling sparse tail bins."""
    top = int(max(a.max(initial=0), b.max(initial=0)))
    ca = np.bincount(a, minlength=top + 1)
    cb = np.bincount(b, minlength=top + 1)
    table = np.vstack([ca, cb]).astype(float)
    # merge neighbouring bins until every pooled bin has >= 10 counts in total
    merged, acc = [], np.zeros(2)
    for col in table.T:
        acc = acc + col
        if acc.sum() >= 10:
            merged.append(acc)
            acc = np.zeros(2)
    if acc.sum() > 0:
        if merged:
            merged[-1] = merged[-1] + acc
        else:
            merged.append(acc)
    if len(merged) < 2:
        return 1.0
    return float(stats.chi2_contingency(np.array(merged).T)[1])


def _two_prop_z(x1: int, n1: int, x2: int, n2: int) -> float:
    if n1 == 0 or n2 == 0:
        return 0.0
    p = (x1 + x2) / (n1 + n2)
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    return _z(x1 / n1 - x2 / n2, se)


def self_consistency_cases(tau: float = 2.0, lam: float = 2.0) -> dict[str, tuple[RbpParams, Domain, Domain]]:
    """The three geometries of a sub-square inside ``Y = [0, 2]^2``."""
    params = RbpParams(tau, lam)
    Y = Domain((2.0, 2.0))
    return {
        "terminal": (params, Y, Domain((1.0, 1.0), (1.0, 1.0))),
        "initial": (params, Y, Domain((1.0, 1.0), (0.0, 0.0))),
        "interior": (params, Y, Domain((1.0, 1.0), (0.5, 0.5))),
    }


def check_self_consistency(params: RbpParams, Y: Domain, X: Domain, n_samples: int, rng,
                           name: str = "self-consistency") -> TestReport:
    """Compare RBP(Y) restricted to X with RBP(X) sampled directly.

    Sub-tests: box-count chi-square, KS on the continuous parts of starts
    and lengths per dimension, two-proportion z on atom frequencies, and KS
    on the cost gaps of the surviving boxes. The statistic is the number
    of failed sub-tests.
    """
    if not Y.contains(X):
        raise ContractError("X must be contained in Y")
    restricted = sample_partitions(params, Y, n_samples, rng).restrict(X)
    direct = sample_partitions(params, X, n_samples, rng)

    results = []
    p = _count_chi2(restricted.counts, direct.counts)
    results.append(("count_chi2", p, p >= LEVEL))
    for d in range(X.dim):
        a, b = restricted, direct
        s_a, s_b = a.starts[~a.start_atom[:, d], d], b.starts[~b.start_atom[:, d], d]
        l_a, l_b = a.lens[~a.end_atom[:, d], d], b.lens[~b.end_atom[:, d], d]
        for label, u, v in ((f"ks_start_d{d}", s_a, s_b), (f"ks_len_d{d}", l_a, l_b)):
            p = float(stats.ks_2samp(u, v).pvalue) if len(u) and len(v) else 1.0
            results.append((label, p, p >= LEVEL))
        M_a, M_b = len(a.times), len(b.times)
        for label, fa, fb in ((f"start_atom_d{d}", a.start_atom[:, d], b.start_atom[:, d]),
                              (f"end_atom_d{d}", a.end_atom[:, d], b.end_atom[:, d])):
            z = _two_prop_z(int(fa.sum()), M_a, int(fb.sum()), M_b)
            results.append((label, z, z < Z_BAND))
    ga, gb = restricted.gaps(), direct.gaps()
    p = float(stats.ks_2samp(ga, gb).pvalue) if len(ga) and len(gb) else 1.0
    results.append(("ks_gaps", p, p >= LEVEL))

    failed = [r for r in results if not r[2]]
    details = (f"Y={list(Y.lengths)}@{list(Y.origin)} X={list(X.lengths)}@{list(X.origin)} "
               f"mean_count restricted={restricted.counts.mean():.4f} direct={direct.counts.mean():.4f} "
               f"rate_X={box_count_rate(params, X):.4f}; "
               + " ".join(f"{n}={v:.4g}{'' if ok else '!'}" for n, v, ok in results))
    return TestReport(name, float(len(failed)), 0.0, n_samples, not failed, details)


def _batch_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated series by batch means."""
    b = len(x) // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def _regression_stats(state: reg.RegressionState) -> list[float]:
    return [state.K, float(state.weights.sum()), math.log(state.sigma2), float(state.partition.volumes().sum())]


def _relational_stats(state: rel.RelationalState) -> list[float]:
    return [state.K, float(state.rates.sum()), float(state.partition.volumes().sum())]


GEWEKE_STATS = {
    "regression": ("K", "sum_omega", "log_sigma2", "total_volume"),
    "relational": ("K", "sum_rates", "total_volume"),
}


def geweke_test(
    model: str,
    hyper,
    sizes: dict,
    n_samples: int,
    rng,
    kernel: Optional[Callable] = None,
    add_bias: float = 1.0,
) -> TestReport:
    """Marginal-conditional vs successive-conditional simulation.

    The first simulator draws parameters from the prior. The second
    alternates one kernel sweep with re-simulating the data from the
    current parameters; if the kernel leaves the posterior invariant both
    produce the prior marginals. ``kernel`` replaces the model's own sweep
    and ``add_bias`` corrupts its add ratio, both for testing the test.
    """
    if model == "regression":
        N, D = sizes.get("n_points", 10), sizes.get("dim", 1)
        domain = Domain((1.0,) * D)
        X = rng.random((N, D))

        def prior():
            return reg.sample_prior_state(domain, hyper, rng)

        def simulate(state):
            return reg.RegressionData(X, reg.simulate_labels(state, X, rng))

        step = kernel or (lambda s, data, r: reg.regression_kernel(s, data, r, add_bias=add_bias))
        summarize = _regression_stats
    elif model == "relational":
        n = sizes.get("n_nodes", 5)
        rows, cols = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(n), indexing="ij"))

        def prior():
            return rel.sample_prior_state(n, hyper, rng)

        def simulate(state):
            return rel.RelationalData(n, rows, cols, rel.simulate_links(state, rows, cols, rng))

        step = kernel or (lambda s, data, r: rel.relational_kernel(s, data, r, add_bias=add_bias))
        summarize = _relational_stats
    else:
        raise ContractError(f"unknown model {model!r}")

    forward = np.array([summarize(prior()) for _ in range(n_samples)])

    state = prior()
    data = simulate(state)
    chain = np.empty_like(forward)
    for t in range(n_samples):
        state = step(state, data, rng)
        data = simulate(state)
        chain[t] = summarize(state)

    names = GEWEKE_STATS[model]
    zs = []
    for j in range(len(names)):
        se_f = forward[:, j].std(ddof=1) / math.sqrt(n_samples)
        se_c = _batch_se(chain[:, j])
        zs.append(_z(forward[:, j].mean() - chain[:, j].mean(), math.hypot(se_f, se_c)))
    zmax = float(max(zs))
    details = " ".join(
        f"{nm}: prior={forward[:, j].mean():.4f} chain={chain[:, j].mean():.4f} z={zs[j]:.2f}"
        for j, nm in enumerate(names)
    )
    return TestReport(f"geweke-{model}", zmax, GEWEKE_Z, n_samples, zmax < GEWEKE_Z, details)


# -- named checks with default configurations, as run by the command line ----

CHECKS = ("volume", "coverage", "self-consistency", "geweke-regression", "geweke-relational")
CASES = ("terminal", "initial", "interior")


def _spawn(seed: int, *key: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def run_checks(
    names,
    seed: int,
    n_samples: Optional[int] = None,
    case: str = "all",
    tau: Optional[float] = None,
    lam: Optional[float] = None,
    lengths: Optional[tuple] = None,
    confirm: bool = True,
) -> list[TestReport]:
    """Run named checks with defaults, each on its own stream derived from ``seed``.

    With ``confirm``, a failing check is re-run once with ten times the
    samples and the re-run's verdict is reported, since a single failure at
    these levels is expected now and then under correct code.
    """
    names = list(names)
    if not names:
        raise ContractError("no checks selected")
    for nm in names:
        if nm not in CHECKS:
            raise ContractError(f"unknown check {nm!r}; choose from {', '.join(CHECKS)}")
    if case != "all" and case not in CASES:
        raise ContractError(f"unknown case {case!r}; choose from all, {', '.join(CASES)}")

    jobs = []
    for nm in names:
        if nm == "volume":
            params = RbpParams(tau or 1.0, 2.0 if lam is None else lam)
            dom = Domain(lengths or (1.0, 1.0))
            jobs.append((nm, lambda n, r, p=params, d=dom: check_expected_volume(p, d, n, r), n_samples or 100_000, 0))
        elif nm == "coverage":
            params = RbpParams(tau or 1.0, 2.0 if lam is None else lam)
            dom = Domain(lengths or (1.0,))
            pts = np.column_stack([np.linspace(0.0, L, 10) for L in dom.lengths])
            jobs.append((nm, lambda n, r, p=params, d=dom, q=pts: check_coverage(p, d, q, n, r), n_samples or 100_000, 0))
        elif nm == "self-consistency":
            cases = self_consistency_cases(tau or 2.0, 2.0 if lam is None else lam)
            for cname in (CASES if case == "all" else (case,)):
                p, Y, X = cases[cname]
                jobs.append((f"self-consistency:{cname}",
                             lambda n, r, p=p, Y=Y, X=X, c=cname: check_self_consistency(p, Y, X, n, r, f"self-consistency:{c}"),
                             n_samples or 10_000, CASES.index(cname)))
        elif nm == "geweke-regression":
            h = reg.RegressionHyper(tau=tau or 1.0, lam=2.0 if lam is None else lam)
            jobs.append((nm, lambda n, r, h=h: geweke_test("regression", h, {"n_points": 10, "dim": 1}, n, r),
                         n_samples or 10_000, 0))
        elif nm == "geweke-relational":
            h = rel.RelationalHyper(tau=tau or 1.0, lam=0.99 if lam is None else lam)
            jobs.append((nm, lambda n, r, h=h: geweke_test("relational", h, {"n_nodes": 5}, n, r),
                         n_samples or 10_000, 0))

    reports = []
    for nm, fn, n, sub in jobs:
        # streams keyed by check identity, so selecting a subset leaves each result unchanged
        key = (CHECKS.index(nm.split(":")[0]), sub)
        rep = fn(n, _spawn(seed, *key))
        if not rep.passed and confirm:
            first = rep
            rep = fn(10 * n, _spawn(seed, *key, 1))
            rep.details = f"first run failed ({first.statistic:.4g}); confirmation at {10 * n}: " + rep.details
        rep.seed = seed
        reports.append(rep)
    return reports
