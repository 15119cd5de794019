"""Closed-loop grasp: refit the Koopman model every step and track the closing reference."""
import numpy as np

from softkoop.io import ExperimentConfig
from softkoop.online import run_online_trial
from softkoop.plant import get_object, grasp_outcome, grasp_reference

cfg = ExperimentConfig()
params = cfg.plant_params()
steps = cfg.T + cfg.lift_steps + cfg.hold_steps
ref = grasp_reference(params, steps, cfg.ramp_steps, cfg.theta_goal)

for obj_id in (1, 4, 6):
    obj = get_object(obj_id)
    trial = run_online_trial(params, obj, ref, cfg.replace(T=steps).loop_config(), seed=5)
    track = np.linalg.norm(trial.states - trial.references, axis=1)
    check = grasp_outcome(trial.contact_forces[1:], obj, cfg.lift_steps, cfg.hold_steps)
    print(f"object {obj_id}: tracking error start {track[5]:.4f} end {track[-1]:.4f} m, "
          f"contacts {check.min_contacts}, margin {check.min_margin:+.3f} N, "
          f"success {check.success}")
