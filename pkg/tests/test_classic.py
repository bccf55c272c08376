import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_usv
from vecalloc.body import ActuatorSpec, BodyConfig, build_mapping
from vecalloc.classic import ClassicParams, solve_classic
from vecalloc.convex import ConvexWeights, closed_form_unconstrained
from vecalloc.errors import ConfigError
from vecalloc.mapping import ActuatorCommand, angle_diff, commands_to_forces, commands_to_wrench, forces_to_commands, wrap_angle

seeds = st.integers(0, 2**32 - 1)
DOCKING = ClassicParams(2.0, 2e4, 1e4, rho=3000.0, eps_det=3e-10)


def _perturbed(cmds, rng, amount):
    return [
        ActuatorCommand(c.thrust, wrap_angle(c.alpha + rng.uniform(-amount, amount)), wrap_angle(c.beta + rng.uniform(-amount, amount)))
        for c in cmds
    ]


@pytest.mark.parametrize("seed", range(5))
def test_matches_pinv_without_penalty(seed):
    rng = np.random.default_rng(seed)
    body = make_usv()
    mp = build_mapping(body)
    tau = rng.uniform(-1e5, 1e5, 3) * [1, 1, 10]
    F0 = mp.pinv @ tau
    prev = [ActuatorCommand(c.thrust, c.alpha, wrap_angle(c.beta + rng.uniform(-0.3, 0.3))) for c in forces_to_commands(body, F0)]
    cmds, _ = solve_classic(body, ClassicParams(1.0, 1e6, 0.0), tau, prev)
    assert np.linalg.norm(commands_to_forces(body, cmds) - F0) <= 1e-3 * np.linalg.norm(F0)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_matches_weighted_least_squares(seed):
    # with free directions T'WT is the per-actuator force norm, so the local
    # optimum near the solution is the weighted least-squares force vector
    rng = np.random.default_rng(seed)
    body = BodyConfig(tuple(ActuatorSpec(tuple(rng.uniform(-1, 1, 3))) for _ in range(3)))
    mp = build_mapping(body)
    tau = rng.uniform(-5, 5, 6)
    ref = closed_form_unconstrained(mp, ConvexWeights.uniform(9, 6, 1.0, 10.0), tau)
    prev = _perturbed(forces_to_commands(body, ref), rng, 0.2)
    cmds, slack = solve_classic(body, ClassicParams(1.0, 10.0, 0.0), tau, prev)
    F = commands_to_forces(body, cmds)
    assert np.linalg.norm(F - ref) <= 1e-5 * np.linalg.norm(ref)
    assert np.allclose(slack, tau - mp.M @ F)


def test_reachable_aligned_has_small_slack():
    body = make_usv()
    tau = np.array([1e5, 0.0, 0.0])
    prev = [ActuatorCommand(0.0, math.pi / 2, 0.0)] * 3
    cmds, slack = solve_classic(body, DOCKING, tau, prev, dt=0.5)
    assert np.linalg.norm(slack) <= 1e-4 * np.linalg.norm(tau)
    assert np.allclose(commands_to_wrench(body, cmds), tau - slack)


def test_idle_thrusters_stall():
    # zero thrust removes every angle gradient: the reversed surge is never produced
    body = make_usv()
    tau = np.array([-1e5, 0.0, 0.0])
    prev = [ActuatorCommand(0.0, math.pi / 2, 0.0)] * 3
    cmds, slack = solve_classic(body, DOCKING, tau, prev, dt=0.5)
    assert all(c.thrust == 0 for c in cmds)
    assert np.allclose(slack, tau)


@settings(max_examples=15, deadline=None)
@given(seeds, st.floats(0.05, 1.0))
def test_limits_respected(seed, dt):
    rng = np.random.default_rng(seed)
    body = make_usv()
    tau = rng.uniform(-3e5, 3e5, 3) * [1, 1, 30]
    prev = [ActuatorCommand(float(rng.uniform(0, 68e3)), math.pi / 2, float(rng.uniform(-math.pi, math.pi))) for _ in range(3)]
    cmds, _ = solve_classic(body, DOCKING, tau, prev, dt=dt)
    for c, p, a in zip(cmds, prev, body.actuators):
        assert 0 <= c.thrust <= a.t_max * (1 + 1e-12)
        assert abs(angle_diff(c.beta, p.beta)) <= a.rate_limit * dt + 1e-9


def test_params_validation():
    with pytest.raises(ConfigError):
        ClassicParams(0.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        ClassicParams(1.0, 1.0, 1.0, rho=-1.0)
    with pytest.raises(ConfigError):
        solve_classic(make_usv(), DOCKING, np.zeros(2), [ActuatorCommand(0, math.pi / 2, 0)] * 3)
