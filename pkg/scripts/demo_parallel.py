"""Build a parallel, almost torsion-free higher connection and verify it.

Usage: python scripts/demo_parallel.py [--seed N]
"""
import argparse

import numpy as np

from hiconn import (
    AffineConnection,
    BilinearFormEta,
    Chart,
    DifferentialForm,
    SamplePlan,
    classify_eta,
    construct_parallel,
    is_parallel,
    parse,
    to_dsl,
    torsion_report,
)
from hiconn.randomfields import random_metric


def show(title, eta, metric, base, plan, rng):
    print(f"== {title}")
    cls = classify_eta(eta, plan)
    print(f"   in B-circle on plan: {cls.in_B_circle}, multisymplectic: {cls.in_B_plectic}")
    conn = construct_parallel(eta, metric, base, plan)
    for (k, l), tensor in sorted(conn.twist.entries.items()):
        for (K, I, J), v in sorted(tensor.items())[:3]:
            text = to_dsl(v)
            text = text if len(text) <= 72 else text[:69] + "..."
            print(f"   F^{k},{l}[{K}][{I}][{J}] = {text}")
    fresh = SamplePlan.uniform(eta.chart, len(plan.points), seed=plan.seed + 1)
    print(f"   parallel residual: {is_parallel(conn, eta, plan).max_residual:.2e}"
          f" (fresh plan {is_parallel(conn, eta, fresh).max_residual:.2e})")
    rep = torsion_report(conn, plan, rng=rng)
    print(f"   torsion on vector pairs: {rep.one_vector_residual:.2e}, on X^Y = 0 pairs: {rep.overlap_residual:.2e}")
    return conn


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    c2 = Chart(2)
    plan2 = SamplePlan.uniform(c2, 20, seed=args.seed)
    eta2 = BilinearFormEta(c2, {2: DifferentialForm(c2, 2, {(0, 1): "1 + x0^2"})})
    conn = show("R^2, (1 + x0^2) dx0^dx1, flat base", eta2, None, AffineConnection.flat(c2), plan2, rng)
    F = conn.twist.coefficient(1, 2, (0, 1), (0,), (0, 1))
    gap = np.max(np.abs((F - parse("2*x0/(1+x0^2)", c2)).values(plan2.points)))
    print(f"   F^1,2(d0, d01) vs 2 x0/(1 + x0^2): max gap {gap:.2e}")

    c3 = Chart(3)
    plan3 = SamplePlan.uniform(c3, 20, seed=args.seed)
    eta3 = BilinearFormEta(c3, {
        2: DifferentialForm(c3, 2, {(0, 1): "1", (1, 2): "2*x1"}),
        3: DifferentialForm(c3, 3, {(0, 1, 2): "2 + x0^2"}),
    })
    show("R^3, identity metric", eta3, None, None, plan3, rng)
    show("R^3, random polynomial metric", eta3, random_metric(c3, rng), None, plan3, rng)


if __name__ == "__main__":
    main()
