"""One receding-horizon decision on a toy scalar model."""
import numpy as np

from softkoop.core import ReferenceTrajectory
from softkoop.dictionary import build_linear_dictionary
from softkoop.koopman import KoopmanModel
from softkoop.mpc import MpcConfig, solve_step

# x+ = 0.5 x + u, written as a lifted model on (x, u)
model = KoopmanModel.from_matrix(np.array([[0.5, 0.0], [1.0, 0.0]]),
                                 build_linear_dictionary(1, 1))
cfg = MpcConfig(horizon=3, u_min=0.0, u_max=1.0, grid_levels=11)
ref = ReferenceTrajectory(np.full((20, 1), 0.6), dt=0.5)

x = np.zeros(1)
for t in range(6):
    sol = solve_step(model, x, ref, t, cfg)
    x = 0.5 * x + sol.first_input
    print(f"t={t} u={sol.first_input[0]:.2f} x={x[0]:.3f} cost={sol.cost:.4f} "
          f"({sol.evaluations} plans)")
