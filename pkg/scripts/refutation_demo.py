"""Spectral refutation strength of random 4-XOR versus clause density.

For each density multiplier C the script draws random-sign instances with
m = C * n^1.5 * ln(n), builds the level-ell induced-subset matrix, and prints
the averaged refutation certificate delta_hat. Values well below 1 certify
that no assignment satisfies close to all clauses; a planted (satisfiable)
control instance is shown for contrast and never certifies below 1.
"""
import argparse
import math
import sys

import numpy as np

from rpcsp import XorInstance, random_assignment, sample_planted_xor
from rpcsp.kikuchi import refute_report
from rpcsp.rng import cell_seed, derived_rng


def random_signs_instance(n, m, k, seed):
    rng = derived_rng(seed, 0)
    scopes = rng.integers(1, n + 1, size=(m, k), dtype=np.int64)
    rhs = rng.choice(np.array([-1, 1], dtype=np.int8), size=m)
    return XorInstance(n, k, scopes, rhs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--ell", type=int, default=2)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--multipliers", default="1,2,4,6,10")
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    n, k, ell = args.n, args.k, args.ell
    base = n ** 1.5 * math.log(n)
    print(f"random {k}-XOR on n={n} at level {ell}; m = C * n^1.5 ln n")
    print(f"{'C':>5} {'m':>8} {'mean delta_hat':>15} {'certifies <1':>13}")
    for mult_txt in args.multipliers.split(","):
        mult = float(mult_txt)
        m = math.ceil(mult * base)
        deltas = []
        for t in range(args.trials):
            seed = cell_seed(args.seed, "refute", mult, t)
            inst = random_signs_instance(n, m, k, seed)
            deltas.append(refute_report(inst, ell, seed=seed).delta_hat)
        mean = sum(deltas) / len(deltas)
        print(f"{mult:>5g} {m:>8} {mean:>15.3f} {str(mean < 1.0):>13}")

    # satisfiable control: the certificate must stay >= 1
    m = math.ceil(10 * base)
    seed = cell_seed(args.seed, "control")
    x = random_assignment(n, seed)
    inst = sample_planted_xor(x, m, k, 0.5, seed)
    delta = refute_report(inst, ell, seed=seed).delta_hat
    print(f"\nnoiseless planted control at m={m}: delta_hat = {delta:.3f} "
          f"(sound: {delta >= 1.0})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
