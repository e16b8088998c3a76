# tests/unit/test_core_model.py
import itertools

import numpy as np
import pytest

from all_types.game_dtypes import ActionPair, ClosedLoopDynamics, CostModel, FlipState, MixedPolicy2
from core_model import flip_transition, stage_cost, step_state
from game_errors import ConfigurationError
from lqr_synthesis import build_linear_game, double_integrator, lqr_gain

pytestmark = pytest.mark.unit


@pytest.mark.parametrize(
    "alpha, a0, a1, expected",
    [(0, 0, 0, 0), (1, 1, 1, 1), (1, 1, 0, 0), (0, 0, 1, 1)],
)
def test_flip_transition_examples(alpha, a0, a1, expected):
    assert flip_transition(alpha, ActionPair(a0=a0, a1=a1)) == expected


def test_flip_transition_matches_closed_form():
    for alpha, a0, a1 in itertools.product((0, 1), repeat=3):
        closed_form = ((1 - a0) * (1 - a1) + a0 * a1) * alpha + (1 - a0) * (a0 + a1)
        result = flip_transition(alpha, ActionPair(a0=a0, a1=a1))
        assert isinstance(result, FlipState)
        assert result == closed_form


def test_step_state_examples():
    identity = ClosedLoopDynamics(n=2, f0=lambda x: x, f1=lambda x: x)
    np.testing.assert_array_equal(step_state(np.array([1.0, 0.0]), 0, identity, 0), [1.0, 0.0])

    scalar = ClosedLoopDynamics(n=1, f0=lambda x: 0.9 * x, f1=lambda x: 1.1 * x)
    assert step_state(np.array([2.0]), 1, scalar, 0)[0] == pytest.approx(2.2)

    F, B = double_integrator(0.99, 0.1)
    K = lqr_gain(F, B)
    game = build_linear_game(F, B, K=K)
    x = np.array([0.0, 1.0])
    np.testing.assert_allclose(step_state(x, 0, game, 0), (F - B @ K) @ x, rtol=0, atol=1e-15)


def test_step_state_dimension_mismatch():
    dynamics = ClosedLoopDynamics(n=2, f0=lambda x: x, f1=lambda x: x)
    with pytest.raises(ConfigurationError):
        step_state(np.array([1.0, 2.0, 3.0]), 0, dynamics, 0)

    shrinking = ClosedLoopDynamics(n=2, f0=lambda x: x[:1], f1=lambda x: x)
    with pytest.raises(ConfigurationError):
        step_state(np.array([1.0, 2.0]), 0, shrinking, 0)


def test_step_state_composes_single_player_loop():
    dynamics = ClosedLoopDynamics(n=1, f0=lambda x: 0.7 * x + 1.0, f1=lambda x: -x)
    x = np.array([3.0])
    expected = x.copy()
    for k in range(5):
        x = step_state(x, 0, dynamics, k)
        expected = 0.7 * expected + 1.0
    np.testing.assert_array_equal(x, expected)


def test_step_state_time_varying_maps():
    dynamics = ClosedLoopDynamics(
        n=1,
        f0=lambda x: x,
        f1=lambda x: x,
        f0_steps=[lambda x, c=c: c * x for c in (2.0, 3.0)],
    )
    x = np.array([1.0])
    assert step_state(x, 0, dynamics, 1)[0] == 3.0
    assert step_state(x, 1, dynamics, 1)[0] == 1.0


@pytest.mark.parametrize(
    "g, d, a, actions, expected",
    [(4, 1, 2, (0, 0), 4.0), (4, 1, 2, (1, 1), 3.0), (0, 0.5, 0.9, (0, 1), -0.9)],
)
def test_stage_cost_examples(g, d, a, actions, expected):
    costs = CostModel.constant(g, d, a)
    x = np.array([0.0])
    assert stage_cost(x, ActionPair(a0=actions[0], a1=actions[1]), costs) == pytest.approx(expected)


def test_stage_cost_is_additive(rng):
    Q = np.diag(rng.uniform(0.5, 2.0, 3))
    costs = CostModel.quadratic(Q, 0.5 * np.eye(3), 0.9 * np.eye(3))
    for _ in range(20):
        x = rng.normal(size=3)
        both = stage_cost(x, ActionPair(a0=1, a1=1), costs)
        idle = stage_cost(x, ActionPair(a0=0, a1=0), costs)
        assert both == pytest.approx(idle + costs.d(x) - costs.a(x), abs=1e-12)


def test_mixed_policy_simplex():
    policy = MixedPolicy2.from_act(0.25)
    assert policy.p_act + policy.p_idle == 1.0
    np.testing.assert_array_equal(policy.as_vector(), [0.75, 0.25])
    assert MixedPolicy2.from_act(1.5).p_act == 1.0
    with pytest.raises(ValueError):
        MixedPolicy2(p_act=0.5, p_idle=0.6)
