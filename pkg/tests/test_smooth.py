import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_kernel_vector, random_mapping
from vecalloc.config import build_body, build_kb, build_smoothing, load_shipped
from vecalloc.body import build_mapping
from vecalloc.errors import ConfigError, DegenerateKernelBlock
from vecalloc.mapping import allocate_pinv
from vecalloc.reproduce import quad_sweep
from vecalloc.smooth import (
    KernelDirection,
    SmoothingMode,
    SmoothingParams,
    allocate_smooth,
    angle_slopes,
    b_of_tau,
    complete_basis,
    empirical_lipschitz,
    eval_b,
    lipschitz_bound,
)

seeds = st.integers(0, 2**32 - 1)
USV_KB = np.array([-0.5, math.sqrt(3) / 2, -0.5, -math.sqrt(3) / 2, 1.0, 0.0])


@pytest.fixture(scope="module")
def usv_kd(usv_map):
    return KernelDirection.from_vector(usv_map, USV_KB)


def test_basis_aligned():
    assert np.allclose(complete_basis(np.array([1.0, 0.0])), np.eye(2))


def test_basis_quarter_turn():
    K = complete_basis(np.array([0.0, 1.0]))
    assert np.allclose(K[:, 0], [0, 1])
    assert np.allclose(np.abs(K[:, 1]), [1, 0])
    assert np.array_equal(K, complete_basis(np.array([0.0, 1.0])))


def test_basis_rejects_short_block():
    with pytest.raises(DegenerateKernelBlock):
        complete_basis(np.array([0.5, 0.0]))


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=3))
def test_basis_orthonormal(v):
    v = np.array(v)
    n = np.linalg.norm(v)
    if n < 1e-3:
        return
    v = v / n * (1 + n)
    K = complete_basis(v)
    assert np.allclose(K.T @ K, np.eye(v.size), atol=1e-12)
    assert np.allclose(K[:, 0], v / np.linalg.norm(v), atol=1e-12)


def test_params_validation():
    with pytest.raises(ConfigError):
        SmoothingParams(0.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        SmoothingParams(1.0, -1.0, 1.0)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_gain_bounded_and_decreasing(x, y):
    p = SmoothingParams(0.7, 0.3, 5.0)
    gx, gy = float(p.gain(x)), float(p.gain(y))
    assert 0 <= gx <= p.k_a
    if x <= y:
        assert gx >= gy


def test_usv_kernel_is_valid(usv_map, usv_kd):
    assert usv_kd.residual(usv_map) < 1e-12
    assert np.allclose(usv_kd.block_norms, 1)


def test_far_from_singularity_matches_pinv(usv_map, usv_kd):
    strict = SmoothingParams(1.0, 1e-4, 5e4, SmoothingMode.STRICT_RAMP)
    tau = np.array([0.0, 1e6, 0.0])
    F, diag = allocate_smooth(usv_map, usv_kd, strict, tau)
    assert diag.min_orth > strict.eps2 and not diag.triggered
    assert np.array_equal(F, allocate_pinv(usv_map, tau))
    # the sigmoid gain only decays, so the relative correction shrinks with distance
    p = SmoothingParams(1.0, 1e-4, 5e4)
    rel = [eval_b(usv_map.pinv @ (s * tau), usv_kd, p)[0] / s for s in (1, 10, 100)]
    assert rel[0] > rel[1] > rel[2]


def test_strict_ramp_at_rest(usv_map, usv_kd):
    p = SmoothingParams(1.0, 1.0, 3.0, SmoothingMode.STRICT_RAMP)
    b, diag = eval_b(np.zeros(6), usv_kd, p)
    assert diag.triggered
    assert b == pytest.approx(3.0 / usv_kd.block_norms.min())
    F = usv_kd.k_b * b
    for sl, K in zip(usv_kd.blocks, usv_kd.bases):
        assert K[:, 0] @ F[sl] >= 3.0 - 1e-9


def test_strict_ramp_at_threshold(usv_map, usv_kd):
    # orthogonal components of norm eps2 and positive kernel components
    p = SmoothingParams(1.0, 1.0, 3.0, SmoothingMode.STRICT_RAMP)
    F = np.concatenate([K @ [10.0, 3.0] for K in usv_kd.bases])
    b, diag = eval_b(F, usv_kd, p)
    assert diag.min_orth == pytest.approx(3.0)
    assert b == 0.0


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(list(SmoothingMode)))
def test_exactness_and_lower_bound(seed, mode):
    rng = np.random.default_rng(seed)
    mp = random_mapping(rng, need_kernel=True)
    kv = random_kernel_vector(mp, rng)
    if kv is None:
        return
    kd = KernelDirection.from_vector(mp, kv)
    p = SmoothingParams(float(rng.uniform(0.1, 1)), float(rng.uniform(0.1, 2)), float(rng.uniform(0.5, 5)), mode)
    tau = mp.M @ rng.uniform(-3, 3, mp.force_dim)
    F, diag = allocate_smooth(mp, kd, p, tau)
    assert np.linalg.norm(mp.M @ F - tau) <= 1e-9 * max(1, np.linalg.norm(tau))
    assert diag.b_value >= 0
    if mode is SmoothingMode.STRICT_RAMP and diag.triggered:
        for sl, K in zip(kd.blocks, kd.bases):
            assert K[:, 0] @ F[sl] >= p.eps2 - 1e-9
            assert np.linalg.norm(F[sl]) >= p.eps2 * (1 - 1e-9)


def test_batch_b_matches_pointwise(usv_map, usv_kd):
    p = SmoothingParams(1.0, 1e-4, 5e4)
    taus = np.array([[x, 0.0, 0.0] for x in np.linspace(-1e5, 1e5, 11)])
    batch = b_of_tau(usv_map, usv_kd, p, taus)
    single = [eval_b(usv_map.pinv @ t, usv_kd, p)[0] for t in taus]
    assert np.allclose(batch, single)


def test_quad_smoothing_has_two_symmetric_maxima():
    doc = load_shipped("quad_flip.json")
    mp = build_mapping(build_body(doc))
    kd, p = build_kb(doc, mp), build_smoothing(doc)
    taus = quad_sweep(step=1e-2)
    b = b_of_tau(mp, kd, p, taus)
    peaks = np.flatnonzero((b[1:-1] > b[:-2]) & (b[1:-1] >= b[2:])) + 1
    top = peaks[np.argsort(b[peaks])[-2:]]
    ty = np.sort(taus[top, 4])
    assert ty[0] < 0 < ty[1]
    assert ty[0] == pytest.approx(-ty[1], abs=0.02)
    assert b[top[0]] == pytest.approx(b[top[1]], rel=1e-6)


def test_bound_without_smoothing_is_pinv_norm(usv_map, usv_kd):
    # b vanishes on a box far from the singularity
    p = SmoothingParams(1.0, 1e-4, 5e4, SmoothingMode.STRICT_RAMP)
    lo, hi = np.array([0.0, 4e5, 0.0]), np.array([1e3, 5e5, 0.0])
    L = lipschitz_bound(usv_map, usv_kd, p, lo, hi, points_per_axis=5)
    want = [2 / p.eps2 * np.linalg.norm(usv_map.pinv_block(i), 2) for i in range(3)]
    assert np.allclose(L, want)


def test_empirical_constant_path(usv_map, usv_kd):
    p = SmoothingParams(1.0, 1e-4, 5e4)
    path = np.tile([1e4, 0, 0], (5, 1))
    assert np.all(empirical_lipschitz(usv_map, usv_kd, p, path) == 0)


def test_pinv_slope_diverges_at_crossing(usv, usv_map):
    slopes = []
    for n in (11, 101, 1001):
        fx = np.linspace(-1e3, 1e3, n + (n % 2 == 0))
        taus = np.column_stack([fx, np.zeros_like(fx), np.zeros_like(fx)])
        slopes.append(angle_slopes(usv, taus, [allocate_pinv(usv_map, t) for t in taus]).max())
    assert slopes[0] < slopes[1] < slopes[2]
