"""SINDy baseline: sparse next-state regression on the same data."""
import numpy as np

from softkoop.eval import constant_input_sets
from softkoop.io import ExperimentConfig
from softkoop.sindy import fit_sindy, sindy_predict

cfg = ExperimentConfig(offline_sets=6)
sets = constant_input_sets(cfg, seed=0)
s = np.vstack([x[:-1] for _, x, _ in sets[:-1]])
u = np.vstack([v[:-1] for _, _, v in sets[:-1]])
nxt = np.vstack([x[1:] for _, x, _ in sets[:-1]])

_, s_test, u_test = sets[-1]
for lam in (1e-3, 1e-5, 1e-7):
    m = fit_sindy(s, u, nxt, lam=lam)
    err = sindy_predict(m, s_test[:-1], u_test[:-1]) - s_test[1:]
    print(f"lambda={lam:g}  sparsity={m.sparsity:.2f}  sweeps={m.n_iter:4d}  "
          f"one-step rms={np.sqrt(np.mean(err**2)):.2e}")
