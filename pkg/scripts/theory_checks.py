#!/usr/bin/env python3
"""Distribution-level checks and the optimal-prior comparison, printed as a table."""
import argparse

from nearcs.sideinfo import DParams
from nearcs.theory import validate_distributions, validate_optimal_prior

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--samples", type=int, default=1_000_000)
ap.add_argument("--seed", type=int, default=7)
ap.add_argument("--no-pipeline", action="store_true")
args = ap.parse_args()

for c in validate_distributions(args.samples, seed=args.seed, pipeline=not args.no_pipeline):
    print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<40} {c.value:10.3e}  (limit {c.threshold:g})")

for regime, dp in (("theorem1", DParams(M=25, S_taps=20, g=1.0, sigma2=2.0)),
                   ("theorem2", DParams(M=25, S_taps=20, g=1.0, sigma2=2.0, d=4, K_eff=1))):
    rep = validate_optimal_prior(dp, p_grid=(0.5,), dps=(1e-3, 1e-2), regime=regime)
    for r in rep.rows:
        print(f"{regime} dp={r.dp:g} D={r.D:.4g} dv_theory={r.dv_theory:.5g} dv_opt={r.dv_opt:.5g} "
              f"rel_gap={r.rel_gap:.2e}")
