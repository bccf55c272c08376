"""Null-space smoothed closed-form allocation.

The allocation is ``F = pinv(M) tau + K_b * b(tau)`` where ``K_b`` lies in
the kernel of ``M``, so the produced wrench is unchanged while the kernel
term keeps every actuator's force away from the origin near singular
configurations.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .body import MappingMatrix
from .errors import ConfigError, DegenerateKernelBlock
from .mapping import forces_to_commands, EPS_THRUST
from .body import unit_vector

BLOCK_NORM_TOL = 1e-9


class SmoothingMode(str, enum.Enum):
    PAPER_SIGMOID = "paper_sigmoid"
    STRICT_RAMP = "strict_ramp"


@dataclass(frozen=True)
class SmoothingParams:
    k_a: float
    k_b: float
    eps2: float
    mode: SmoothingMode = SmoothingMode.PAPER_SIGMOID

    def __post_init__(self):
        for name in ("k_a", "k_b", "eps2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"smoothing {name} must be finite and > 0, got {v}")
        object.__setattr__(self, "mode", SmoothingMode(self.mode))

    def gain(self, min_orth):
        """Sigmoid-like weight: close to k_a near a singularity, 0 far from it."""
        x = np.asarray(min_orth, dtype=float)
        return 0.5 * self.k_a * (1.0 - (2.0 / math.pi) * np.arctan(self.k_b * (x - self.eps2)))


def complete_basis(block) -> np.ndarray:
    """Orthonormal basis whose first column is ``block / ||block||``.

    Uses a Householder reflector; the reflection is taken about
    ``e1 + u`` when ``u`` leans towards ``e1`` to avoid cancellation.
    """
    k = np.asarray(block, dtype=float)
    n = float(np.linalg.norm(k))
    if n < 1.0 - BLOCK_NORM_TOL:
        raise DegenerateKernelBlock(f"kernel block norm {n:.6g} < 1")
    u = k / n
    e1 = np.zeros_like(u)
    e1[0] = 1.0
    if u[0] > 0:
        w = e1 + u
        H = np.eye(u.size) - 2.0 * np.outer(w, w) / (w @ w)
        H[:, 0] = -H[:, 0]
        return H
    w = e1 - u
    return np.eye(u.size) - 2.0 * np.outer(w, w) / (w @ w)


@dataclass(frozen=True, eq=False)
class KernelDirection:
    k_b: np.ndarray
    blocks: tuple[slice, ...]
    bases: tuple[np.ndarray, ...] = field(repr=False)

    @classmethod
    def from_vector(cls, mapping: MappingMatrix, k_b) -> "KernelDirection":
        k_b = np.asarray(k_b, dtype=float)
        if k_b.shape != (mapping.force_dim,):
            raise ConfigError(f"K_b must have {mapping.force_dim} entries, got {k_b.shape}")
        bases = tuple(complete_basis(k_b[sl]) for sl in mapping.blocks)
        return cls(k_b=k_b, blocks=mapping.blocks, bases=bases)

    @property
    def block_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.k_b[sl]) for sl in self.blocks])

    def residual(self, mapping: MappingMatrix) -> float:
        return float(np.linalg.norm(mapping.M @ self.k_b))


@dataclass
class SmoothDiagnostics:
    b_value: float
    min_orth: float
    triggered: bool
    f_ker: np.ndarray
    orth: np.ndarray
    lipschitz_bound: np.ndarray | None = None


def _decompose(F_star, kd: KernelDirection):
    """Along-kernel and orthogonal force components per actuator.

    ``F_star`` may be one force vector or a stack of them (rows).
    """
    F_star = np.atleast_2d(F_star)
    along, orth = [], []
    for sl, K in zip(kd.blocks, kd.bases):
        c = F_star[:, sl] @ K
        along.append(c[:, 0])
        orth.append(np.linalg.norm(c[:, 1:], axis=1))
    return np.array(along).T, np.array(orth).T


def _b_batch(F_star, kd: KernelDirection, p: SmoothingParams):
    along, orth = _decompose(F_star, kd)
    f_ker = (p.eps2 - along) / kd.block_norms
    min_orth = orth.min(axis=1)
    ramp = np.maximum(0.0, f_ker.max(axis=1))
    if p.mode is SmoothingMode.STRICT_RAMP:
        b = np.where(min_orth < p.eps2, ramp, 0.0)
    else:
        b = ramp * p.gain(min_orth)
    return b, min_orth, f_ker, orth


def eval_b(F_star, kd: KernelDirection, p: SmoothingParams) -> tuple[float, SmoothDiagnostics]:
    b, min_orth, f_ker, orth = _b_batch(F_star, kd, p)
    diag = SmoothDiagnostics(
        b_value=float(b[0]),
        min_orth=float(min_orth[0]),
        triggered=bool(min_orth[0] < p.eps2),
        f_ker=f_ker[0],
        orth=orth[0],
    )
    return diag.b_value, diag


def b_of_tau(mapping: MappingMatrix, kd: KernelDirection, p: SmoothingParams, taus) -> np.ndarray:
    """Vectorised smoothing coefficient for a stack of wrenches (rows)."""
    taus = np.atleast_2d(np.asarray(taus, dtype=float))
    return _b_batch(taus @ mapping.pinv.T, kd, p)[0]


def allocate_smooth(mapping: MappingMatrix, kd: KernelDirection, p: SmoothingParams, tau):
    F_star = mapping.pinv @ np.asarray(tau, dtype=float)
    b, diag = eval_b(F_star, kd, p)
    return F_star + kd.k_b * b, diag


def gradient_bound(mapping, kd, p, lo, hi, points_per_axis: int = 33) -> float:
    """Largest finite-difference gradient norm of b over a box of wrenches.

    Axes with zero width are held fixed.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = hi - lo
    free = np.flatnonzero(width > 0)
    if free.size == 0:
        return 0.0
    axes = [np.linspace(lo[j], hi[j], points_per_axis) for j in free]
    grid = np.array(list(itertools.product(*axes))).reshape(-1, free.size)
    base = np.tile(lo, (grid.shape[0], 1))
    base[:, free] = grid
    grad = np.zeros((base.shape[0], free.size))
    for k, j in enumerate(free):
        h = 1e-4 * width[j]
        up, dn = base.copy(), base.copy()
        up[:, j] += h
        dn[:, j] -= h
        grad[:, k] = (b_of_tau(mapping, kd, p, up) - b_of_tau(mapping, kd, p, dn)) / (2 * h)
    return float(np.linalg.norm(grad, axis=1).max())


def lipschitz_bound(mapping, kd, p, lo, hi, points_per_axis: int = 33) -> np.ndarray:
    """Per-actuator upper bound on the Lipschitz constant of the thrust direction."""
    eps1 = float(np.linalg.norm(kd.k_b)) * gradient_bound(mapping, kd, p, lo, hi, points_per_axis)
    norms = np.array([np.linalg.norm(mapping.pinv_block(i), 2) for i in range(len(mapping.blocks))])
    return (2.0 / p.eps2) * (norms + eps1)


def direction_steps(body, forces, eps_thrust: float = EPS_THRUST) -> np.ndarray:
    """Angle travelled by each actuator's thrust direction between samples.

    Returns an array of shape (n_samples - 1, m). Zero-thrust samples hold
    the previous direction.
    """
    prev = None
    dirs = []
    for F in forces:
        cmds = forces_to_commands(body, F, prev, eps_thrust)
        dirs.append([unit_vector(c.alpha, c.beta) for c in cmds])
        prev = cmds
    dirs = np.array(dirs)
    a, b = dirs[:-1], dirs[1:]
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def angle_slopes(body, taus, forces, eps_thrust: float = EPS_THRUST) -> np.ndarray:
    """Largest observed angle change per unit wrench change, per actuator."""
    taus = np.asarray(taus, dtype=float)
    steps = direction_steps(body, forces, eps_thrust)
    dtau = np.linalg.norm(np.diff(taus, axis=0), axis=1)
    moving = dtau > 0
    if not moving.any():
        return np.zeros(steps.shape[1])
    return (steps[moving] / dtau[moving, None]).max(axis=0)


def empirical_lipschitz(mapping, kd, p, tau_path) -> np.ndarray:
    forces = [allocate_smooth(mapping, kd, p, tau)[0] for tau in tau_path]
    return angle_slopes(mapping.body, tau_path, forces)
