"""
Bubble constants and the periodic Green's function
==================================================

Synchronized amplitudes, bubble integrals and the lattice constant for
N = 5 with one periodic direction.
"""

import numpy as np

from bubblestrip.bubbles import Dimension, solve_synchronized
from bubblestrip.lattice import (GreenEvaluator, LatticeConfig, green, green_at_radius,
                                 lattice_constant, lattice_constant_zeta)
from bubblestrip.quadrature import weighted_bubble_beta, weighted_bubble_integral

dim = Dimension(5, 1)
sync = solve_synchronized(dim)
print("kappa roots on (0, 10]:", sync.roots)
print(f"kappa = {sync.kappa}, s = {sync.s:.15f}, t = {sync.t:.15f}")
print(f"B1 = mass of U^(2*-1) = {sync.B1:.12f}")

# weighted integrals: adaptive quadrature against the Beta closed form
for beta in (3.1, 3.5, 3.9):
    for kind in ("pair0", "pairh"):
        q = weighted_bubble_integral(5, beta, kind)
        b = weighted_bubble_beta(5, beta, kind)
        print(f"{kind:6s} beta={beta}: quad {q: .12f}  beta-form {b: .12f}  rel {abs(q / b - 1):.1e}")

# lattice constant: direct sum with certified tail vs zeta(3)
ge1 = GreenEvaluator(LatticeConfig(5, 1, 1.0))
direct, tail = lattice_constant(ge1, tol=1e-11)
print(f"S direct = {direct:.15f} (tail {tail:.1e}), zeta form = {lattice_constant_zeta(5):.15f}")

# the truncated image sum converges like R^{-2}; the tail bound tracks it
ge = GreenEvaluator(LatticeConfig(5, 1, 2.0))
y, z = np.array([0.3, 0.2, 0, 0, 0]), np.array([-0.4, 0, 0.5, 0, 0])
exact, _ = green(ge, y, z, tol=1e-12)
for R in (4, 16, 64, 256):
    v, t = green_at_radius(ge, y, z, R)
    print(f"R = {R:4d}: error {exact - v:.3e}  certified tail {t:.3e}")
