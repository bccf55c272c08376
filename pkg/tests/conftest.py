import math

import numpy as np
import pytest

from vecalloc.body import AXES, ActuatorSpec, BodyConfig, Mount, MountKind, build_mapping
from vecalloc.errors import RankDeficientTarget

USV_POSITIONS = [(-30.0, -8.0, 5.0), (-30.0, 8.0, 5.0), (30.0, 0.0, 5.0)]
QUAD_POSITIONS = [(1.0, 0.0, 0.1), (0.0, 1.0, 0.1), (-1.0, 0.0, 0.1), (0.0, -1.0, 0.1)]
QUAD_TILT_AZIMUTHS = [45.0, 135.0, 225.0, 315.0]


def make_usv(t_max=68e3, rate_deg=25.0):
    acts = tuple(
        ActuatorSpec(p, mount=Mount(MountKind.AZIMUTH_ONLY, math.pi / 2), t_max=t_max, rate_limit=math.radians(rate_deg))
        for p in USV_POSITIONS
    )
    return BodyConfig(acts, ("Fx", "Fy", "Tz"))


def make_quad(t_max=10.0, rate_deg=600.0):
    acts = tuple(
        ActuatorSpec(
            p,
            mount=Mount(MountKind.ELEVATION_ONLY, math.radians(b)),
            t_max=t_max,
            rate_limit=math.radians(rate_deg),
        )
        for p, b in zip(QUAD_POSITIONS, QUAD_TILT_AZIMUTHS)
    )
    return BodyConfig(acts)


def random_actuator(rng):
    kind = rng.choice(["full", "az", "el"])
    pos = tuple(rng.uniform(-3, 3, 3))
    spin = int(rng.choice([-1, 0, 1]))
    kappa = float(rng.uniform(0, 0.2)) if spin else 0.0
    if kind == "full":
        mount = Mount()
    elif kind == "az":
        mount = Mount(MountKind.AZIMUTH_ONLY, float(rng.choice([math.pi / 2, -math.pi / 2])))
    else:
        mount = Mount(MountKind.ELEVATION_ONLY, float(rng.uniform(-math.pi, math.pi)))
    return ActuatorSpec(pos, spin=spin, kappa_d=kappa, mount=mount)


def random_mapping(rng, m_range=(2, 6), need_kernel=False):
    """Random full-rank body and its mapping; retries until one is valid."""
    while True:
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        acts = tuple(random_actuator(rng) for _ in range(m))
        d = sum(a.force_dim for a in acts)
        n_axes = int(rng.integers(1, min(6, d) + 1))
        picked = set(rng.choice(AXES, n_axes, replace=False).tolist())
        axes = tuple(a for a in AXES if a in picked)
        try:
            mp = build_mapping(BodyConfig(acts, axes))
        except RankDeficientTarget:
            continue
        if need_kernel:
            if mp.kernel.shape[1] == 0:
                continue
            if any(np.linalg.norm(mp.kernel[sl]) < 1e-6 for sl in mp.blocks):
                continue
        return mp


def random_kernel_vector(mp, rng):
    """A kernel vector scaled so its shortest block has unit norm, or None."""
    for _ in range(20):
        v = mp.kernel @ rng.standard_normal(mp.kernel.shape[1])
        norms = np.array([np.linalg.norm(v[sl]) for sl in mp.blocks])
        if norms.min() > 1e-3 * norms.max():
            return v / norms.min()
    return None


@pytest.fixture(scope="session")
def usv():
    return make_usv()


@pytest.fixture(scope="session")
def quad():
    return make_quad()


@pytest.fixture(scope="session")
def usv_map(usv):
    return build_mapping(usv)


@pytest.fixture(scope="session")
def quad_map(quad):
    return build_mapping(quad)


ACCEPTANCE_LINES: list[str] = []


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
