"""Link prediction on planted-community graphs; compares the model's AUC with a true-block oracle."""

import argparse
import json

import numpy as np

from rbp import relational as rel
from rbp.synthetic import holdout_split, planted_communities


def run(n, p_in, p_out, n_blocks, holdout, iters, tau, lam, seed):
    rng = np.random.default_rng(seed)
    A, block = planted_communities(n, rng, p_in=p_in, p_out=p_out, n_blocks=n_blocks)
    held = holdout_split(n, holdout, np.random.default_rng([seed, 1]))
    I, J = np.indices((n, n))
    data = rel.RelationalData(n, I[~held], J[~held], A[~held], I[held], J[held], A[held])
    samples = rel.run_relational_mcmc(data, rel.RelationalHyper(tau=tau, lam=lam), iters, rng)
    scores = rel.posterior_scores(samples, data.heldout_rows, data.heldout_cols)
    same = (block[data.heldout_rows] == block[data.heldout_cols]).astype(float)
    return {
        "seed": seed, "p_in": p_in, "p_out": p_out, "n_blocks": n_blocks,
        "auc": rel.auc(scores, data.heldout_values),
        "oracle_auc": rel.auc(same, data.heldout_values),
        "mean_K": float(np.mean([s.K for s in samples])),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=100)
    ap.add_argument("--p-in", type=float, nargs="+", default=[0.8])
    ap.add_argument("--p-out", type=float, default=0.2)
    ap.add_argument("--blocks", type=int, default=2)
    ap.add_argument("--holdout", type=float, default=0.1)
    ap.add_argument("--iters", type=int, default=500)
    ap.add_argument("--tau", type=float, default=3.0)
    ap.add_argument("--lam", type=float, default=0.99)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()

    for p_in in args.p_in:
        for seed in args.seeds:
            print(json.dumps(run(args.nodes, p_in, args.p_out, args.blocks, args.holdout,
                                 args.iters, args.tau, args.lam, seed)))


if __name__ == "__main__":
    main()
