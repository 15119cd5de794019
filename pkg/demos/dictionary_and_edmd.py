"""Lift gripper data with the analytic dictionary and fit a Koopman model."""
import numpy as np

from softkoop.dictionary import build_gripper_dictionary, term_to_str
from softkoop.eval import constant_input_sets
from softkoop.io import ExperimentConfig
from softkoop.koopman import decompose, fit_edmd_trajectories, predict_rollout

d = build_gripper_dictionary()
print(d.dim, "terms:", ", ".join(term_to_str(t) for t in d.terms[9:16]), "...")

# constant-PWM segments from the simulator, a few of them
cfg = ExperimentConfig(offline_sets=6)
sets = constant_input_sets(cfg, seed=0)
model = fit_edmd_trajectories([(s, u[:-1]) for _, s, u in sets[:-1]], d)
print("K", model.K.shape, "fit %.2f ms" % (model.fit_time * 1e3))

# held-out set: multi-step rollout from its first state
_, s, u = sets[-1]
roll = predict_rollout(model, s[0], u[:-1])
err = np.abs(roll - s[1:]).max(axis=1)
print("rollout error (m) every 8 steps:", np.array2string(err[::8], precision=2))

dec = decompose(model)
print("largest |eigenvalues|:", np.round(np.sort(np.abs(dec.eigenvalues))[::-1][:5], 4))
