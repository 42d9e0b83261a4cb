"""
Solving the reduced equations
=============================

The rate mu_L balances the profile dip against the image interaction.
For beta = 3.5 in N = 5 the balance gives mu_L ~ c0 L^6.
"""

import numpy as np

from bubblestrip.ansatz import KProfile
from bubblestrip.bubbles import Dimension
from bubblestrip.reduction import (SystemConfig, build_system, c0, rate_balance_check,
                                   reduced_residual, residual_scaling_study, scaling_sweep,
                                   solve_reduced)
from bubblestrip.norms import CloudSpec

rs = build_system(SystemConfig.default())
print(f"c0 = {c0(rs):.15g}")

study = scaling_sweep(rs, (2, 3, 4, 6, 8))
for L, mu in zip(study.L_grid, study.mu_solutions):
    print(f"L = {L}: mu_L = {mu:.10g}, mu_L / L^6 = {mu / L**6:.15g}")
print(f"log-log slope {study.slope:.12f} (target {study.target})")

# the rate equation changes sign at mu_L
L = 4
for mu in (10.0, 45.395553802558496, 1e6):
    print(f"L = {L}, mu = {mu:g}: rate residual {reduced_residual(rs, np.zeros(5), mu, L)[5]: .3e}")
print("dip / interaction at mu_L(3):", rate_balance_check(rs, solve_reduced(rs, 3)[1], 3)["ratio"])

# breaking the symmetry of one profile moves mu_L but keeps the center
kp1 = KProfile((-1.2, -1, -1, -1, -1), (3.5,) * 5)
perturbed = build_system(SystemConfig(Dimension(5, 1), kp1, KProfile.uniform(5)))
x, mu = solve_reduced(perturbed, 3)
print(f"perturbed profile, L = 3: x = {x}, mu = {mu:.12g}")

# the error term decays like mu^-2 in the double-star norm
res = residual_scaling_study(rs, 2, np.geomspace(20, 200, 4), CloudSpec(shells=8, sobol=16),
                             refine=False)
print("residual norms:", ", ".join(f"{v:.4e}" for v in res.norms), f"slope {res.slope:.3f}")
