"""Offline computation of the rest-configuration kernel vector K_b.

Solves ``min ||K_b||^2`` over ``K_b in Ker(M)`` with every actuator block
of norm at least one and orthogonal to the pseudo-inverse force blocks of
a few typical wrenches. The kernel and orthogonality constraints are
linear and are removed by parameterisation; the block-norm constraints
are handled by multi-start local optimisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .body import MappingMatrix
from .errors import InfeasibleKb
from .smooth import KernelDirection

DEFAULT_SEEDS = 64


@dataclass
class KbProblem:
    mapping: MappingMatrix
    typical_wrenches: list = field(default_factory=list)
    min_block_norm: float = 1.0


@dataclass
class KbSolution:
    direction: KernelDirection
    objective: float
    residual: float
    seed_index: int
    n_feasible_starts: int

    @property
    def k_b(self) -> np.ndarray:
        return self.direction.k_b


def reduced_kernel(problem: KbProblem) -> np.ndarray:
    """Orthonormal basis of the kernel vectors meeting the orthogonality constraints."""
    mp = problem.mapping
    Z = mp.kernel
    if Z.shape[1] == 0:
        raise InfeasibleKb("mapping kernel is empty", n_binding=0)
    rows = []
    for tau in problem.typical_wrenches:
        F_star = mp.pinv @ np.asarray(tau, dtype=float)
        for sl in mp.blocks:
            rows.append(F_star[sl] @ Z[sl])
    if not rows:
        return Z
    C = np.array(rows)
    scale = np.linalg.norm(C, axis=1, keepdims=True)
    C = C[scale[:, 0] > 0] / scale[scale[:, 0] > 0]
    N = null_space(C, rcond=1e-10) if C.size else np.eye(Z.shape[1])
    if N.shape[1] == 0:
        raise InfeasibleKb(
            f"{len(rows)} orthogonality constraints leave no kernel direction",
            n_binding=len(rows),
        )
    return Z @ N


def _local_solve(A_blocks, v0, r):
    k = v0.size

    def cons_fun(v):
        return np.array([A @ v @ (A @ v) for A in A_blocks]) - r * r

    def cons_jac(v):
        return np.array([2.0 * (A.T @ (A @ v)) for A in A_blocks])

    res = minimize(
        lambda v: v @ v,
        v0,
        jac=lambda v: 2.0 * v,
        constraints=[{"type": "ineq", "fun": cons_fun, "jac": cons_jac}],
        method="SLSQP",
        options={"maxiter": 200, "ftol": 1e-14},
    )
    v = res.x if np.all(np.isfinite(res.x)) else v0
    return v.reshape(k)


def _restore(A_blocks, v, r):
    # scale so the shortest block sits exactly on the bound
    short = min(np.linalg.norm(A @ v) for A in A_blocks)
    return v * (r / short) if short > 0 else None


def canonical_sign(k_b: np.ndarray) -> np.ndarray:
    """Fix the sign of ``k_b`` (both signs are equally optimal).

    The entry of largest magnitude is made positive; near-ties go to the
    lowest index.
    """
    a = np.abs(k_b)
    j = int(np.flatnonzero(a >= a.max() * (1 - 1e-9))[0])
    return -k_b if k_b[j] < 0 else k_b


def solve_kb(problem: KbProblem, seeds: int = DEFAULT_SEEDS, rng_seed: int = 0) -> KbSolution:
    mp = problem.mapping
    Zr = reduced_kernel(problem)
    r = problem.min_block_norm
    A_blocks = [Zr[sl] for sl in mp.blocks]
    dead = [i for i, A in enumerate(A_blocks) if np.linalg.norm(A) < 1e-10]
    if dead:
        raise InfeasibleKb(
            f"actuators {dead} have no admissible kernel component",
            n_binding=len(dead),
        )
    rng = np.random.default_rng(rng_seed)
    k = Zr.shape[1]
    starts = rng.standard_normal((max(seeds, 1), k))
    best, best_obj, best_idx, n_ok = None, np.inf, -1, 0
    for idx, s in enumerate(starts):
        v0 = _restore(A_blocks, s / np.linalg.norm(s), r)
        if v0 is None:
            continue
        v = _restore(A_blocks, _local_solve(A_blocks, v0, r), r)
        if v is None:
            continue
        n_ok += 1
        obj = float(v @ v)
        # strict improvement keeps the lowest seed index on ties
        if obj < best_obj * (1 - 1e-12):
            best, best_obj, best_idx = v, obj, idx
    if best is None:
        raise InfeasibleKb("no start reached a feasible point", n_binding=len(A_blocks))
    k_b = canonical_sign(Zr @ best)
    direction = KernelDirection.from_vector(mp, k_b)
    return KbSolution(
        direction=direction,
        objective=float(k_b @ k_b),
        residual=direction.residual(mp),
        seed_index=best_idx,
        n_feasible_starts=n_ok,
    )
