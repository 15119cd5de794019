"""Surrogate simulator of a three-fingered pneumatic gripper.

Each finger is a constant-curvature bender hanging from the plate. Per step:

* pressure follows a first-order lag toward ``gain * u`` of its board;
* the bend angle is the quasi-static balance of a cubic torsional spring,
  the pressure torque and, when the tip penetrates the object, a penalty
  contact torque ``stiffness * depth * length``;
* optional Gaussian noise perturbs the bend angle.

The object is a sphere centered on the gripper axis. It does not move; a
grasp is judged from the contact forces it receives (see
:func:`grasp_outcome`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .core import DEFAULT_DT, N_FINGERS, ReferenceTrajectory, make_rng

GRAVITY = 9.81
LAYOUTS = ("symmetric", "asymmetric")

# board driving each finger: fingers 1 and 3 on board 1, finger 2 on board 2
FINGER_BOARD = (0, 1, 0)


@dataclass(frozen=True)
class PlantParams:
    """Geometry and actuation constants; SI units, pressure in kPa."""

    layout: str = "symmetric"
    plate_radius: float = 0.04
    finger_length: float = 0.08
    tau: float = 1.0
    gain: float = 50.0
    alpha: float = 0.0075  # N m per kPa
    k1: float = 0.1  # N m / rad
    k3: float = 0.03  # N m / rad^3
    theta_max: float = 2.0
    noise_std: float = 1e-3
    dt: float = DEFAULT_DT

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.tau <= 0 or self.finger_length <= 0 or self.dt <= 0:
            raise ValueError("tau, finger_length and dt must be positive")
        if self.k1 <= 0 or self.k3 < 0:
            raise ValueError("stiffness must be positive")

    def mounts(self) -> tuple[np.ndarray, np.ndarray]:
        """Mount points ``(3, 3)`` and unit inward bending directions ``(3, 3)``."""
        if self.layout == "symmetric":
            angles = np.deg2rad([0.0, 120.0, 240.0])
            radial = np.stack([np.cos(angles), np.sin(angles), np.zeros(3)], axis=1)
            return self.plate_radius * radial, -radial
        # fingers 1 and 3 side by side, facing finger 2
        angles = np.deg2rad([150.0, 0.0, 210.0])
        pos = self.plate_radius * np.stack([np.cos(angles), np.sin(angles), np.zeros(3)], axis=1)
        inward = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        return pos, inward

    def plane_normals(self) -> np.ndarray:
        _, inward = self.mounts()
        return np.cross(inward, np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class ObjectSpec:
    """Spherical stand-in for a grasped object, centered on the gripper axis."""

    id: int
    radius: float
    mass: float
    stiffness: float = 400.0  # N/m
    friction: float = 0.8
    center_depth: float = 0.075

    def __post_init__(self) -> None:
        if self.mass < 0 or self.radius <= 0 or self.stiffness <= 0:
            raise ValueError("object needs mass >= 0 and positive size and stiffness")

    @property
    def center(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.center_depth])


# Graded roughly like the six test objects: a light, soft plush ball, two
# boxes, then the same box shape at increasing mass, the last beyond any grip.
DEFAULT_OBJECTS = {
    1: ObjectSpec(1, radius=0.035, mass=0.05, stiffness=60.0, friction=0.9),
    2: ObjectSpec(2, radius=0.025, mass=0.08),
    3: ObjectSpec(3, radius=0.030, mass=0.12),
    4: ObjectSpec(4, radius=0.030, mass=0.20),
    5: ObjectSpec(5, radius=0.030, mass=0.30),
    6: ObjectSpec(6, radius=0.030, mass=1.50),
}


def get_object(obj_id: int) -> ObjectSpec:
    if obj_id not in DEFAULT_OBJECTS:
        raise ValueError(f"object id must be in 1..6, got {obj_id}")
    return DEFAULT_OBJECTS[obj_id]


@dataclass(frozen=True)
class PlantState:
    pressure: np.ndarray
    theta: np.ndarray
    tips: np.ndarray  # flattened 9-vector
    contact_force: np.ndarray

    @property
    def n_contacts(self) -> int:
        return int(np.count_nonzero(self.contact_force > 0))


def bend_offsets(theta, length: float):
    """In-plane tip offset ``(inward, down)`` of a constant-curvature finger."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-6
    safe = np.where(small, 1.0, theta)
    inward = np.where(small, length * theta / 2.0, length * (1.0 - np.cos(theta)) / safe)
    down = np.where(small, length * (1.0 - theta**2 / 6.0), length * np.sin(theta) / safe)
    return inward, down


def tip_positions(theta, params: PlantParams) -> np.ndarray:
    """Flattened fingertip positions for bend angles ``theta`` (3,)."""
    pos, inward_dir = params.mounts()
    inward, down = bend_offsets(theta, params.finger_length)
    tips = pos + inward[:, None] * inward_dir - down[:, None] * np.array([0.0, 0.0, 1.0])
    return tips.reshape(-1)


def _penetration(tip, obj: ObjectSpec | None) -> float:
    if obj is None:
        return 0.0
    return max(obj.radius - float(np.linalg.norm(tip - obj.center)), 0.0)


def _finger_tip(i, theta, params):
    pos, inward_dir = params.mounts()
    inward, down = bend_offsets(theta, params.finger_length)
    return pos[i] + inward * inward_dir[i] - down * np.array([0.0, 0.0, 1.0])


def free_bend(torque, params: PlantParams) -> float:
    """Root of ``k1 theta + k3 theta^3 = torque`` (no contact)."""
    return _solve_bend(lambda th: params.k1 * th + params.k3 * th**3 - torque, params)


def _solve_bend(f, params):
    lim = params.theta_max
    lo, hi = f(-lim), f(lim)
    if lo >= 0:
        return -lim
    if hi <= 0:
        return lim
    return brentq(f, -lim, lim, xtol=1e-14, rtol=1e-14)


def equilibrium_bend(i: int, pressure: float, params: PlantParams,
                     obj: ObjectSpec | None) -> tuple[float, float]:
    """Bend angle and contact force of finger ``i`` at a given pressure."""
    torque = params.alpha * pressure
    if obj is None:
        return free_bend(torque, params), 0.0
    k_arm = obj.stiffness * params.finger_length

    def balance(th):
        depth = _penetration(_finger_tip(i, th, params), obj)
        return params.k1 * th + params.k3 * th**3 + k_arm * depth - torque

    th = _solve_bend(balance, params)
    return th, obj.stiffness * _penetration(_finger_tip(i, th, params), obj)


def idle_state(params: PlantParams, obj: ObjectSpec | None = None) -> PlantState:
    theta = np.zeros(N_FINGERS)
    force = np.array([obj.stiffness * _penetration(_finger_tip(i, 0.0, params), obj)
                      if obj is not None else 0.0 for i in range(N_FINGERS)])
    return PlantState(np.zeros(N_FINGERS), theta, tip_positions(theta, params), force)


def step(state: PlantState, params: PlantParams, u, obj: ObjectSpec | None = None,
         rng: np.random.Generator | None = None) -> PlantState:
    """Advance the plant by one sampling period under PWM input ``u``.

    Noise is drawn from ``rng`` only when ``params.noise_std > 0``; passing
    ``rng=None`` disables it.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (2,) or np.any(u < 0) or np.any(u > 1):
        raise ValueError(f"PWM input must be two fractions in [0, 1], got {u}")
    a = params.dt / params.tau
    target = params.gain * u[list(FINGER_BOARD)]
    pressure = state.pressure + a * (target - state.pressure)
    theta = np.empty(N_FINGERS)
    force = np.empty(N_FINGERS)
    for i in range(N_FINGERS):
        theta[i], force[i] = equilibrium_bend(i, pressure[i], params, obj)
    if rng is not None and params.noise_std > 0:
        theta = theta + rng.normal(0.0, params.noise_std, N_FINGERS)
        theta = np.clip(theta, -params.theta_max, params.theta_max)
        if obj is not None:
            force = np.array([obj.stiffness * _penetration(_finger_tip(i, theta[i], params), obj)
                              for i in range(N_FINGERS)])
    return PlantState(pressure, theta, tip_positions(theta, params), force)


class GripperPlant:
    """Stateful wrapper used by the control loop: observe tips, apply inputs."""

    def __init__(self, params: PlantParams, obj: ObjectSpec | None = None, seed: int = 0):
        self.params = params
        self.obj = obj
        self.rng = make_rng(seed)
        self.state = idle_state(params, obj)

    @property
    def observation(self) -> np.ndarray:
        return self.state.tips.copy()

    @property
    def contact_force(self) -> np.ndarray:
        return self.state.contact_force.copy()

    def apply(self, u) -> np.ndarray:
        self.state = step(self.state, self.params, u, self.obj, self.rng)
        return self.observation


class LinearToyPlant:
    """``x+ = a x + b u``; exactly representable by a linear dictionary."""

    def __init__(self, a, b, x0):
        self.a = np.atleast_2d(np.asarray(a, dtype=float))
        self.b = np.atleast_2d(np.asarray(b, dtype=float))
        self.x = np.asarray(x0, dtype=float).copy()

    @property
    def observation(self) -> np.ndarray:
        return self.x.copy()

    @property
    def contact_force(self) -> np.ndarray:
        return np.zeros(N_FINGERS)

    def apply(self, u) -> np.ndarray:
        self.x = self.a @ self.x + self.b @ np.atleast_1d(np.asarray(u, dtype=float))
        return self.observation


def grasp_reference(params: PlantParams, steps: int, ramp_steps: int = 10,
                    theta_goal: float = 0.45) -> ReferenceTrajectory:
    """Ramp every finger from straight to ``theta_goal`` then hold.

    The default goal sits inside the band of contact equilibria of the soft
    default object 1, so the closing posture is reachable while squeezing it;
    stiffer objects are met earlier and simply stop the fingers.
    """
    k = np.arange(steps + 1)
    theta = theta_goal * np.minimum(k / max(ramp_steps, 1), 1.0)
    points = np.array([tip_positions(np.full(N_FINGERS, th), params) for th in theta])
    return ReferenceTrajectory(points, params.dt)


@dataclass
class GraspCheck:
    success: bool
    min_margin: float
    min_contacts: int
    loads: np.ndarray = field(repr=False)


def grasp_outcome(contact_forces, obj: ObjectSpec, lift_steps: int = 4,
                  hold_steps: int = 6) -> GraspCheck:
    """Judge a grasp from the contact forces of the final lift and hold steps.

    During lift step ``k`` (1-based) the object's weight is ramped in as
    ``m g k / lift_steps``; during the hold it is the full weight. The grasp
    holds at a step when at least two fingers touch the object and the
    friction capacity ``friction * sum(normal forces)`` is ``>=`` the load.
    """
    forces = np.atleast_2d(np.asarray(contact_forces, dtype=float))
    n = lift_steps + hold_steps
    if forces.shape[0] < n:
        raise ValueError(f"need {n} steps of contact forces, got {forces.shape[0]}")
    window = forces[-n:]
    ramp = np.concatenate([np.arange(1, lift_steps + 1) / max(lift_steps, 1),
                           np.ones(hold_steps)])
    loads = obj.mass * GRAVITY * ramp
    capacity = obj.friction * window.sum(axis=1)
    contacts = np.count_nonzero(window > 0, axis=1)
    ok = (contacts >= 2) & (capacity >= loads)
    return GraspCheck(bool(np.all(ok)), float(np.min(capacity - loads)),
                      int(contacts.min()), loads)


def steady_bend(u_board: float, params: PlantParams) -> float:
    """Free-space steady bend under a constant duty cycle."""
    return free_bend(params.alpha * params.gain * u_board, params)


def with_layout(params: PlantParams, layout: str) -> PlantParams:
    return replace(params, layout=layout)
