"""Command line: ``rbp sample | fit-regression | fit-relational | verify``.

Settings come from built-in defaults, then ``--config`` (a JSON object
keyed by flag names in kebab-case), then explicit flags. Chain c of a run
seeded with s uses ``numpy.random.default_rng(s + c)``; the relational
hold-out split uses ``default_rng([s, 1])``.

Exit codes: 0 success, 1 runtime failure, 2 usage or parse error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import regression as reg
from . import relational as rel
from .io import ParseError, ensure_dir, partition_svg, read_edges, read_regression_csv, write_csv, write_jsonl
from .partition import ContractError, Domain, domain_from_points
from .sampler import RbpParams, sample_partition
from .synthetic import holdout_split
from .verification import CASES, CHECKS, run_checks

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3

DEFAULTS = {
    "sample": {"tau": 1.0, "lambda": 2.0, "lengths": "1,1", "origin": None, "n": 1, "seed": 0,
               "out": None, "svg": None},
    "fit-regression": {"tau": 1.0, "lambda": 2.0, "iters": 500, "chains": 1, "jobs": 1, "burn-in": 0.5,
                       "thin": 1, "seed": 0, "p0": 0.5, "mu-omega": 0.0, "eps2-omega": 1.0, "margin": 0.0,
                       "no-normalize": False, "test": None, "out": "rbp-regression"},
    "fit-relational": {"tau": 3.0, "lambda": 0.99, "iters": 500, "chains": 1, "jobs": 1, "burn-in": 0.5,
                       "thin": 1, "seed": 0, "p0": 0.5, "holdout": 0.1, "n-nodes": None,
                       "out": "rbp-relational"},
    "verify": {"checks": None, "case": "all", "samples": None, "seed": 0, "tau": None, "lambda": None,
               "lengths": None, "no-confirm": False, "out": None},
}


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(v) -> int:
    v = int(v)
    if not 0 <= v < 2**64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbp", description="Rectangular bounding process tools")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def shared(sp, model=True):
        sp.add_argument("--config", default=S, help="JSON file with flag values (kebab-case keys)")
        sp.add_argument("--seed", type=int, default=S)
        sp.add_argument("--tau", type=float, default=S)
        sp.add_argument("--lambda", type=float, default=S, dest="lambda")
        sp.add_argument("--out", default=S)
        if model:
            sp.add_argument("--iters", type=int, default=S)
            sp.add_argument("--chains", type=int, default=S)
            sp.add_argument("--jobs", type=int, default=S, help="worker processes for chains")
            sp.add_argument("--burn-in", type=float, default=S, dest="burn-in")
            sp.add_argument("--thin", type=int, default=S)
            sp.add_argument("--p0", type=float, default=S)

    sp = sub.add_parser("sample", help="draw partitions from the prior")
    shared(sp, model=False)
    sp.add_argument("--lengths", default=S, help="domain lengths, e.g. 1,1")
    sp.add_argument("--origin", default=S)
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--svg", default=S, help="SVG path (2-D only); index appended when n > 1")

    sp = sub.add_parser("fit-regression", help="fit the regression model to a CSV file")
    shared(sp)
    sp.add_argument("csv")
    sp.add_argument("--test", default=S, help="held-out CSV; reports RMAE")
    sp.add_argument("--mu-omega", type=float, default=S, dest="mu-omega")
    sp.add_argument("--eps2-omega", type=float, default=S, dest="eps2-omega")
    sp.add_argument("--margin", type=float, default=S)
    sp.add_argument("--no-normalize", action="store_true", default=S, dest="no-normalize")

    sp = sub.add_parser("fit-relational", help="fit the relational model to an edge list")
    shared(sp)
    sp.add_argument("edges")
    sp.add_argument("--holdout", type=float, default=S)
    sp.add_argument("--n-nodes", type=int, default=S, dest="n-nodes")

    sp = sub.add_parser("verify", help="run Monte Carlo property checks")
    shared(sp, model=False)
    sp.add_argument("--checks", default=S, help=f"comma-separated subset of {','.join(CHECKS)}")
    sp.add_argument("--case", default=S, choices=("all",) + CASES)
    sp.add_argument("--samples", type=int, default=S)
    sp.add_argument("--lengths", default=S)
    sp.add_argument("--no-confirm", action="store_true", default=S, dest="no-confirm",
                    help="report first-run failures without the 10x confirmation re-run")
    return p


def effective_config(command: str, args: dict) -> dict:
    cfg = dict(DEFAULTS[command])
    path = args.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {path}: {e}") from None
        unknown = set(from_file) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(from_file)
    cfg.update(args)
    if "seed" in cfg and cfg["seed"] is not None:
        cfg["seed"] = _seed(cfg["seed"])
    return cfg


def cmd_sample(cfg: dict) -> int:
    lengths = _floats(cfg["lengths"])
    origin = _floats(cfg["origin"]) if cfg["origin"] is not None else None
    if cfg["n"] < 1:
        raise UsageError("--n must be positive")
    domain = Domain(lengths, origin)
    if cfg["svg"] and domain.dim != 2:
        raise UsageError("--svg needs a 2-D domain")
    params = RbpParams(cfg["tau"], cfg["lambda"])
    rng = np.random.default_rng(cfg["seed"])
    parts = [sample_partition(params, domain, rng) for _ in range(cfg["n"])]
    doc = json.dumps({"config": cfg, "partitions": [p.to_dict() for p in parts]}) + "\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(doc, encoding="utf-8")
    else:
        sys.stdout.write(doc)
    if cfg["svg"]:
        svg = Path(cfg["svg"])
        for i, p in enumerate(parts):
            target = svg if len(parts) == 1 else svg.with_name(f"{svg.stem}_{i}{svg.suffix}")
            target.write_text(partition_svg(p), encoding="utf-8")
    return EXIT_OK


def _check_run_settings(cfg):
    if cfg["iters"] < 1 or cfg["chains"] < 1 or cfg["thin"] < 1 or cfg["jobs"] < 1:
        raise UsageError("iters, chains, thin and jobs must be positive")
    if not 0 <= cfg["burn-in"] < 1:
        raise UsageError("burn-in must lie in [0, 1)")


def _run_chains(fn, jobs: int, n_chains: int, args: tuple) -> list:
    if jobs > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, n_chains)) as ex:
            return list(ex.map(fn, range(n_chains), *[[a] * n_chains for a in args]))
    return [fn(c, *args) for c in range(n_chains)]


def _regression_chain(c, data, hyper, cfg, domain):
    rng = np.random.default_rng(cfg["seed"] + c)
    return reg.run_regression_mcmc(data, hyper, cfg["iters"], rng, domain=domain,
                                   burn_in=cfg["burn-in"], thin=cfg["thin"])


def cmd_fit_regression(cfg: dict) -> int:
    _check_run_settings(cfg)
    header, X, y = read_regression_csv(cfg["csv"])
    hyper = reg.RegressionHyper(tau=cfg["tau"], lam=cfg["lambda"], mu_omega=cfg["mu-omega"],
                                eps2_omega=cfg["eps2-omega"], p0=cfg["p0"])
    lo, span = X.min(axis=0), X.max(axis=0) - X.min(axis=0)
    span = np.where(span > 0, span, 1.0)

    def transform(F):
        return F if cfg["no-normalize"] else (F - lo) / span

    Xn = transform(X)
    m = cfg["margin"]
    if cfg["no-normalize"]:
        domain = domain_from_points(Xn, m)
    else:
        domain = Domain((1.0 + 2 * m,) * X.shape[1], (-m,) * X.shape[1])
    data = reg.RegressionData(Xn, y)
    chains = _run_chains(_regression_chain, cfg["jobs"], cfg["chains"], (data, hyper, cfg, domain))
    samples = [s for ch in chains for s in ch]

    out = ensure_dir(cfg["out"])
    records = [{"config": cfg}] + [
        {"chain": c, "sample": i, **s.to_dict()} for c, ch in enumerate(chains) for i, s in enumerate(ch)
    ]
    write_jsonl(out / "posterior.jsonl", records)
    pred = reg.posterior_predict(samples, Xn)
    write_csv(out / "predictions.csv", header + ["prediction"],
              (list(x) + [t, p] for x, t, p in zip(X, y, pred)), config=cfg)
    summary = {"config": cfg, "n_samples": len(samples), "train_rmae": reg.rmae(y, pred)}
    if cfg["test"]:
        t_header, Xt, yt = read_regression_csv(cfg["test"])
        if len(t_header) != len(header):
            raise ParseError("test CSV has a different number of columns")
        pt = reg.posterior_predict(samples, transform(Xt))
        write_csv(out / "test_predictions.csv", t_header + ["prediction"],
                  (list(x) + [t, p] for x, t, p in zip(Xt, yt, pt)), config=cfg)
        summary["rmae"] = reg.rmae(yt, pt)
        print(f"RMAE {summary['rmae']:.6g}")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _relational_chain(c, data, hyper, cfg):
    rng = np.random.default_rng(cfg["seed"] + c)
    return rel.run_relational_mcmc(data, hyper, cfg["iters"], rng, burn_in=cfg["burn-in"], thin=cfg["thin"])


def cmd_fit_relational(cfg: dict) -> int:
    _check_run_settings(cfg)
    if not 0 <= cfg["holdout"] < 1:
        raise UsageError("holdout must lie in [0, 1)")
    n, A = read_edges(cfg["edges"], cfg["n-nodes"])
    hyper = rel.RelationalHyper(tau=cfg["tau"], lam=cfg["lambda"], p0=cfg["p0"])
    held = holdout_split(n, cfg["holdout"], np.random.default_rng([cfg["seed"], 1]))
    I, J = np.indices((n, n))
    data = rel.RelationalData(n, I[~held], J[~held], A[~held], I[held], J[held], A[held])
    chains = _run_chains(_relational_chain, cfg["jobs"], cfg["chains"], (data, hyper, cfg))
    samples = [s for ch in chains for s in ch]

    out = ensure_dir(cfg["out"])
    records = [{"config": cfg}] + [
        {"chain": c, "sample": i, **s.to_dict()} for c, ch in enumerate(chains) for i, s in enumerate(ch)
    ]
    write_jsonl(out / "posterior.jsonl", records)
    if cfg["holdout"] > 0:
        rows, cols, labels = data.heldout_rows, data.heldout_cols, data.heldout_values
    else:
        rows, cols, labels = I.ravel(), J.ravel(), A.ravel()
    scores = rel.posterior_scores(samples, rows, cols)
    write_csv(out / "scores.csv", ["i", "j", "label", "score"],
              ([int(i), int(j), int(v), s] for i, j, v, s in zip(rows, cols, labels, scores)), config=cfg)
    summary = {"config": cfg, "n_samples": len(samples)}
    status = EXIT_OK
    if cfg["holdout"] > 0:
        try:
            summary["auc"] = rel.auc(scores, labels)
            print(f"AUC {summary['auc']:.6g}")
        except rel.MetricError as e:
            summary["auc_error"] = str(e)
            print(f"error: {e}", file=sys.stderr)
            status = EXIT_RUNTIME
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return status


def cmd_verify(cfg: dict) -> int:
    checks = list(CHECKS) if cfg["checks"] is None else [c for c in cfg["checks"].split(",") if c]
    if not checks:
        raise UsageError("--checks needs at least one check name")
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; choose from {', '.join(CHECKS)}")
    lengths = _floats(cfg["lengths"]) if cfg["lengths"] else None
    reports = run_checks(checks, cfg["seed"], n_samples=cfg["samples"], case=cfg["case"],
                         tau=cfg["tau"], lam=cfg["lambda"], lengths=lengths, confirm=not cfg["no-confirm"])
    text = "".join(r.to_json() + "\n" for r in reports)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


COMMANDS = {
    "sample": cmd_sample,
    "fit-regression": cmd_fit_regression,
    "fit-relational": cmd_fit_relational,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    try:
        cfg = effective_config(command, args)
        return COMMANDS[command](cfg)
    except (UsageError, ContractError, reg.ConfigError) as e:
        print(f"rbp {command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"rbp {command}: parse error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as e:
        print(f"rbp {command}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
