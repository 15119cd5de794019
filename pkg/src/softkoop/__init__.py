"""Online Koopman modeling and model-predictive control of a simulated soft gripper.

Modules
-------
core        state layout, snapshot buffer, reference trajectories, seeding
dictionary  Hermite/Kronecker lifting dictionaries
koopman     EDMD fit, prediction and spectral decomposition
sindy       sparse-regression baseline (LASSO by coordinate descent)
mpc         grid-search receding-horizon controller
plant       surrogate pneumatic gripper and grasp check
online      the online model-and-control loop
io          trajectory files, filtering, experiment config
eval        prediction benchmark and grasp campaign
cli         command-line entry point
"""

__version__ = "0.1.0"

from .core import (ConfigError, InsufficientDataError, NumericError, ReferenceTrajectory,
                   SnapshotBuffer, SoftKoopError, flatten, unflatten)
from .dictionary import (Dictionary, build_generic_dictionary, build_gripper_dictionary,
                         hermite_eval, kron_compose)
from .koopman import (KoopmanModel, decompose, fit_edmd, predict_mode_sum,
                      predict_one_step, predict_rollout)
from .sindy import SindyModel, fit_sindy, lasso_fit, sindy_library, sindy_predict
from .mpc import MpcConfig, clamp_input, solve_step
from .plant import GripperPlant, ObjectSpec, PlantParams, get_object, grasp_outcome, step
from .online import OnlineLoopConfig, TrialLog, run_online_trial, swap_estimator
from .io import ExperimentConfig, load_config, load_trajectory, moving_average, save_trajectory
