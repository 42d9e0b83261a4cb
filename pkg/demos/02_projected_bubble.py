"""
The projected bubble on a periodic strip
========================================

PU solves the linear problem with the bubble nonlinearity as source. It
sits below the sum of periodic copies of U, and its defect phi_1 = U - PU
follows the far-field image expansion.
"""

import numpy as np

from bubblestrip.ansatz import (AnsatzField, expansion_deviation, image_sums, domination_ratio,
                                phi_one, projected_bubble)
from bubblestrip.bubbles import BubbleParams, Dimension, solve_synchronized
from bubblestrip.lattice import LatticeConfig
from bubblestrip.norms import NormParams, sample_cloud

dim = Dimension(5, 1)
sync = solve_synchronized(dim)
L, mu = 2.0, 20.0
af = AnsatzField(BubbleParams.centered(5, mu), sync, LatticeConfig(5, 1, L))

# a line along the periodic axis, and one along a decaying axis
line = np.zeros((7, 5))
line[:, 0] = np.linspace(-1, 1, 7)
pu, _, err = projected_bubble(af, line)
total, _ = image_sums(af, line)
print("along y1:   PU            sum U_j       PU / sum      certified err")
for row in zip(pu, total, pu / total, err):
    print("           " + "  ".join(f"{v:.6e}" for v in row))

# the domination constant over the standard cloud
cloud = sample_cloud(NormParams(dim, L, np.zeros(5), mu))
print(f"{len(cloud)} cloud points, max PU / sum U_j = {domination_ratio(af, cloud).max():.6f}")

# phi_1 against its leading image expansion inside the unit ball
ball = cloud[np.linalg.norm(cloud, axis=1) <= 1.0]
phi, _ = phi_one(af, ball)
dev, _ = expansion_deviation(af, ball)
scale = L**-3 * mu**-3.5
print(f"max |phi_1| = {np.abs(phi).max():.4e}, max deviation = {dev.max():.4e}, "
      f"deviation / (L^-3 mu^-3.5) = {dev.max() / scale:.3f}")
