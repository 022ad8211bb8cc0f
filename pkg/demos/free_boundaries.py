"""Map a producer's optimal investment boundaries in closed form.

For a single producer facing the equilibrium price multiplier, the optimal
irreversible expansion policy is a barrier rule: invest just enough to keep
installed capacity at or below a ceiling that depends on the demand shock
and its historic maximum.  The state space (c, x, xbar) splits into three
regions -- strictly inside the ceiling (wait), on the diagonal boundary
where the shock equals its running maximum (invest while the maximum
advances), and on the interior boundary reached after a price drop (wait
until the shock recovers).  This script classifies a grid of states,
prints the two boundary surfaces, and checks the smooth-pasting and
value-matching conditions at the interior boundary numerically.

Run with:

    python3 demos/free_boundaries.py
"""

import numpy as np

from capexeq import (
    ControlSolution,
    EquilibriumProfile,
    MarketParams,
    ProducerType,
    derive_market,
)


def main():
    market = derive_market(MarketParams(
        beta=1.0, delta=1.0, mu_tilde=0.0, sigma_tilde=1.0, D0=1.0))
    producer = ProducerType(c=1.0, alpha=0.45, lam=0.5, k=1.0 / 6.0, r=2.0)
    profile = EquilibriumProfile([producer], market)
    sol = ControlSolution(producer, market, profile)

    print(f"characteristic roots: m = {sol.m:.6f}, n = {sol.n:.6f}")
    print(f"investment coefficient K = {sol.K:.6f}")

    xbar = 4.0
    print(f"\nboundaries at xbar = {xbar}")
    print("  x         ceiling Gamma(x, xbar)")
    for x in np.geomspace(0.5, xbar, 8):
        print(f"{x:8.4f}   {sol.Gamma(x, xbar):12.6f}")
    print(f"diagonal ceiling Phi(xbar) = {sol.Phi(xbar):.6f}")

    print("\n  capacity c   recovery boundary G(c, xbar)")
    for c in np.geomspace(0.1, sol.Phi(xbar), 8):
        print(f"{c:12.6f}   {sol.G(c, xbar):14.6f}")

    # classify a few states
    print("\nstate classification (c, x, xbar):")
    for c, x in [(0.5, 1.0), (sol.Gamma(2.0, xbar), 2.0),
                 (sol.Phi(xbar), xbar), (3.0, 1.0)]:
        print(f"  c = {c:9.5f}, x = {x:6.3f} -> {sol.region(c, x, xbar)}")

    # smooth pasting: marginal value of capacity equals the unit cost k at
    # the recovery boundary, and its derivative in x vanishes there
    c0 = 0.8 * sol.Phi(xbar)
    pasting = sol.smooth_pasting_check(c0, xbar)
    print(f"\nsmooth pasting at c = {c0:.5f}:")
    for key, val in pasting.items():
        print(f"  {key:24s} {val: .3e}")

    # the value function solves the pricing PDE away from the boundaries
    res = sol.hjb_residual(c0, 0.5 * sol.G(c0, xbar), xbar)
    print(f"\nPDE residual in the waiting region: {res.pde_residual:.3e} "
          f"(scale {res.pde_scale:.3e}, region {res.region})")


if __name__ == "__main__":
    main()
