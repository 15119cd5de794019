import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from softkoop.core import (ConfigError, InsufficientDataError, ReferenceTrajectory,
                           SnapshotBuffer, as_input, as_state, derive_seed, finger_slice,
                           flatten, make_rng, unflatten)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_flatten_order():
    tips = [[1, 2, 3], [4, 5, 6], [7, 8, 9]]
    assert flatten(tips).tolist() == list(range(1, 10))
    assert np.all(flatten(np.zeros((3, 3))) == 0)


@given(arrays(float, (3, 3), elements=finite))
def test_flatten_roundtrip(tips):
    assert np.array_equal(unflatten(flatten(tips)), tips)


def test_shape_validation():
    with pytest.raises(ValueError):
        flatten(np.zeros(9))
    with pytest.raises(ValueError):
        unflatten(np.zeros(8))
    with pytest.raises(ValueError):
        as_state([np.nan] * 9)
    with pytest.raises(ValueError):
        as_input([0.1, 0.3])
    assert as_input([0.2, 0.35]).tolist() == [0.2, 0.35]


def test_finger_slice():
    s = np.arange(9)
    assert s[finger_slice(2)].tolist() == [6, 7, 8]


def test_seeding_is_reproducible():
    a = make_rng(7).normal(size=4)
    b = make_rng(7).normal(size=4)
    assert np.array_equal(a, b)
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    with pytest.raises(ValueError):
        make_rng(-1)


def test_config_error_names_key():
    err = ConfigError("H_p", "bad")
    assert err.key == "H_p" and "H_p" in str(err)


@given(st.integers(1, 12), st.integers(0, 40))
def test_buffer_keeps_last_entries(capacity, pushes):
    buf = SnapshotBuffer(capacity)
    for t in range(pushes):
        buf.push(t, np.full(9, t), [t, -t])
    assert len(buf) == min(pushes, capacity)
    assert buf.timesteps == list(range(max(0, pushes - capacity), pushes))


def test_buffer_rejects_gaps():
    buf = SnapshotBuffer(3)
    buf.push(4, np.zeros(9), [0, 0])
    with pytest.raises(ValueError):
        buf.push(6, np.zeros(9), [0, 0])


def test_buffer_transitions():
    buf = SnapshotBuffer(2)
    with pytest.raises(InsufficientDataError):
        buf.transitions(np.zeros(9))
    for t in range(3):
        buf.push(t, np.full(9, float(t)), [t, t])
    states, inputs = buf.transitions(np.full(9, 3.0))
    assert states[:, 0].tolist() == [1, 2, 3]
    assert inputs[:, 0].tolist() == [1, 2]


def test_reference_clamps():
    ref = ReferenceTrajectory(np.arange(4)[:, None] * np.ones(9), dt=0.5)
    assert ref.at(10)[0] == 3 and ref.at(-2)[0] == 0
    assert ref.window(2, 3)[:, 0].tolist() == [3, 3, 3]
    with pytest.raises(ValueError):
        ReferenceTrajectory(np.zeros((0, 9)))
