"""Shared domain types for the gripper pipeline.

States are plain ``numpy`` vectors. A gripper state is the 9-vector of
fingertip positions in meters, ordered ``x1, y1, z1, x2, y2, z2, x3, y3, z3``
and expressed in a frame at the center of the attachment plate. A control
input is the 2-vector of PWM duty-cycle fractions; board 1 drives fingers 1
and 3, board 2 drives finger 2.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

N_FINGERS = 3
STATE_DIM = 9
INPUT_DIM = 2

STATE_NAMES = ("x1", "y1", "z1", "x2", "y2", "z2", "x3", "y3", "z3")
INPUT_NAMES = ("u1", "u2")

DEFAULT_BAND = (0.20, 0.35)
DEFAULT_DT = 0.5
DEFAULT_WINDOW = 5


class SoftKoopError(Exception):
    """Base class for errors raised by this package."""


class InsufficientDataError(SoftKoopError):
    pass


class NumericError(SoftKoopError):
    pass


class ConfigError(SoftKoopError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


def flatten(tips) -> np.ndarray:
    """Flatten a ``(3, 3)`` array of fingertip positions into a 9-vector."""
    tips = np.asarray(tips, dtype=float)
    if tips.shape != (N_FINGERS, 3):
        raise ValueError(f"expected tips of shape (3, 3), got {tips.shape}")
    return tips.reshape(STATE_DIM).copy()


def unflatten(state) -> np.ndarray:
    """Inverse of :func:`flatten`: row ``i`` holds finger ``i + 1``."""
    state = np.asarray(state, dtype=float)
    if state.shape != (STATE_DIM,):
        raise ValueError(f"expected a 9-vector, got shape {state.shape}")
    return state.reshape(N_FINGERS, 3).copy()


def as_state(state) -> np.ndarray:
    """Validate a gripper state: exactly 9 finite components."""
    state = np.asarray(state, dtype=float)
    if state.shape != (STATE_DIM,):
        raise ValueError(f"gripper state must have 9 components, got {state.shape}")
    if not np.all(np.isfinite(state)):
        raise ValueError("gripper state has non-finite components")
    return state


def as_input(u, band: tuple[float, float] = DEFAULT_BAND) -> np.ndarray:
    """Validate a control input against the actuation band."""
    u = np.asarray(u, dtype=float)
    if u.shape != (INPUT_DIM,):
        raise ValueError(f"control input must have 2 components, got {u.shape}")
    lo, hi = band
    if not np.all((u >= lo) & (u <= hi)):
        raise ValueError(f"control input {u} outside band [{lo}, {hi}]")
    return u


def finger_slice(i: int) -> slice:
    """Slice of the flattened state holding finger ``i`` (0-based)."""
    return slice(3 * i, 3 * i + 3)


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.default_rng(int(seed))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a sub-task identified by ``keys``."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SnapshotBuffer:
    """Sliding window of ``(t, state, input)`` entries with FIFO eviction.

    Timestep indices must be consecutive. Together with the most recent
    observed state the buffer yields ``len(buffer)`` transitions.
    """

    capacity: int = DEFAULT_WINDOW
    _entries: deque = field(default_factory=deque, repr=False)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("buffer capacity must be positive")
        self._entries = deque(self._entries, maxlen=self.capacity)

    def push(self, t: int, state, u) -> None:
        if self._entries and t != self._entries[-1][0] + 1:
            raise ValueError(
                f"timestep {t} does not follow {self._entries[-1][0]}")
        self._entries.append((int(t), np.array(state, dtype=float),
                              np.array(u, dtype=float)))

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        return iter(self._entries)

    @property
    def timesteps(self) -> list[int]:
        return [e[0] for e in self._entries]

    def transitions(self, latest_state) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(states, inputs)`` with ``len(states) == len(inputs) + 1``.

        ``latest_state`` is the observation that followed the newest entry.
        """
        if not self._entries:
            raise InsufficientDataError("empty snapshot buffer")
        states = np.array([e[1] for e in self._entries] + [np.asarray(latest_state, float)])
        inputs = np.array([e[2] for e in self._entries])
        return states, inputs


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Desired states indexed by timestep; queries past the end hold the last point."""

    points: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 0:
            raise ValueError("reference trajectory must be nonempty")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def at(self, t: int) -> np.ndarray:
        return self.points[min(max(int(t), 0), len(self) - 1)]

    def window(self, t: int, horizon: int) -> np.ndarray:
        """References ``r_{t+1} .. r_{t+horizon}`` as a ``(horizon, n)`` array."""
        idx = np.clip(np.arange(t + 1, t + horizon + 1), 0, len(self) - 1)
        return self.points[idx]
