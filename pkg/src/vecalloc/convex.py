"""Convex constrained allocation with saturation and rate cones.

The program, over the stacked force vector ``F`` and wrench slack ``s``::

    minimize    F'WF + s'Qs + c ||K_b'F - q2||^2,   c = q1 b(tau)
    subject to  tau = M F + s
                ||F_i|| <= t_max_i
                axis_i'F_i >= cos(h_i) ||F_i||      (optional rate cones)

``b(tau)`` is evaluated once from the pseudo-inverse solution, so the
problem stays convex. It is solved with the ADMM routine in :mod:`socp`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .body import ActuatorSpec, MappingMatrix, unit_vector
from .errors import ConfigError
from .mapping import ActuatorCommand
from .smooth import KernelDirection, SmoothingParams, eval_b
from .socp import ADMMSolver, ADMMState, BallConeBlock, FixedBlock, Status

__all__ = [
    "ConvexWeights",
    "ConeConstraint",
    "QPSolution",
    "ConvexAllocator",
    "Status",
    "solve_convex",
    "build_rate_cone",
    "closed_form_unconstrained",
]


def _diag(v, n, name):
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = np.full(n, float(a))
    elif a.ndim == 2:
        if a.shape != (n, n) or np.any(a - np.diag(np.diag(a))):
            raise ConfigError(f"{name} must be a diagonal {n}x{n} matrix")
        a = np.diag(a).copy()
    if a.shape != (n,):
        raise ConfigError(f"{name} must have {n} diagonal entries, got {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ConfigError(f"{name} diagonal entries must be finite and > 0")
    return a


@dataclass(frozen=True, eq=False)
class ConvexWeights:
    """Cost weights. ``W`` and ``Q`` hold diagonals (length d and l)."""

    W: np.ndarray
    Q: np.ndarray
    q1: float = 0.0
    q2: float = 0.0

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "W", _diag(W, W.shape[0] if W.ndim else 1, "W"))
        object.__setattr__(self, "Q", _diag(Q, Q.shape[0] if Q.ndim else 1, "Q"))
        if not (self.q1 >= 0 and math.isfinite(self.q1)):
            raise ConfigError(f"q1 must be finite and >= 0, got {self.q1}")
        if not math.isfinite(self.q2):
            raise ConfigError("q2 must be finite")

    @classmethod
    def uniform(cls, d: int, l: int, w: float, q: float, q1: float = 0.0, q2: float = 0.0):
        return cls(np.full(d, float(w)), np.full(l, float(q)), q1, q2)

    def check(self, mapping: MappingMatrix):
        if self.W.shape != (mapping.force_dim,) or self.Q.shape != (mapping.n_axes,):
            raise ConfigError(
                f"weights sized ({self.W.size}, {self.Q.size}) do not match "
                f"force dim {mapping.force_dim} and {mapping.n_axes} axes"
            )


@dataclass(frozen=True, eq=False)
class ConeConstraint:
    axis: np.ndarray
    half_angle: float

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        n = float(np.linalg.norm(a))
        if not n > 0 or not np.all(np.isfinite(a)):
            raise ConfigError("cone axis must be a nonzero finite vector")
        object.__setattr__(self, "axis", a / n)
        if not (0 < self.half_angle <= math.pi + 1e-12):
            raise ConfigError(f"cone half angle must lie in (0, pi], got {self.half_angle}")

    @property
    def vacuous(self) -> bool:
        return self.half_angle >= math.pi

    def contains(self, f, tol: float = 0.0) -> bool:
        if self.vacuous:
            return True
        h = min(self.half_angle, math.pi / 2)
        return float(self.axis @ f) >= math.cos(h) * float(np.linalg.norm(f)) - tol


@dataclass
class QPSolution:
    F: np.ndarray
    slack: np.ndarray
    objective: float
    iterations: int
    status: Status
    b_value: float = 0.0
    polished: bool = False
    prim_res: float = 0.0
    dual_res: float = 0.0


def build_rate_cone(prev: ActuatorCommand, spec: ActuatorSpec, dt: float) -> ConeConstraint:
    """Cone of force directions reachable from ``prev`` within one step."""
    if not dt > 0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    axis = spec.force_basis().T @ unit_vector(prev.alpha, prev.beta)
    h = spec.rate_limit * dt
    return ConeConstraint(axis, min(h, math.pi) if math.isfinite(h) else math.pi)


def _objective(F, s, w: ConvexWeights, K, c):
    return float(F @ (w.W * F) + s @ (w.Q * s) + c * (K @ F - w.q2) ** 2)


def closed_form_unconstrained(mapping: MappingMatrix, w: ConvexWeights, tau, K=None, c: float = 0.0):
    """Exact minimiser when no saturation or cone is active.

    Eliminating the slack gives ``(W + M'QM + c K K') F = M'Q tau + c q2 K``.
    """
    M = mapping.M
    tau = np.asarray(tau, dtype=float)
    H = np.diag(w.W) + M.T @ (w.Q[:, None] * M)
    g = M.T @ (w.Q * tau)
    if K is not None and c > 0:
        H = H + c * np.outer(K, K)
        g = g + c * w.q2 * K
    return np.linalg.solve(H, g)


class ConvexAllocator:
    """Solver object holding warm-start state across successive calls."""

    def __init__(
        self,
        mapping: MappingMatrix,
        kd: KernelDirection | None,
        p: SmoothingParams | None,
        w: ConvexWeights,
        eps_abs: float = 1e-6,
        eps_rel: float = 1e-6,
        max_iter: int = 20_000,
        warm_start: bool = True,
        polish: bool = True,
    ):
        w.check(mapping)
        self.mapping = mapping
        self.kd = kd
        self.p = p
        self.w = w
        self.admm = ADMMSolver(eps_abs, eps_rel, max_iter)
        self.warm_start = warm_start
        self.polish = polish
        self._state: ADMMState | None = None

    def reset(self):
        self._state = None

    def _coefficient(self, tau):
        if self.kd is None or self.p is None or self.w.q1 == 0:
            return 0.0
        b, _ = eval_b(self.mapping.pinv @ tau, self.kd, self.p)
        return self.w.q1 * b

    def solve(self, tau, sat=None, cones=None) -> QPSolution:
        mp, w = self.mapping, self.w
        tau = np.asarray(tau, dtype=float)
        if tau.shape != (mp.n_axes,) or not np.all(np.isfinite(tau)):
            raise ConfigError(f"tau must be {mp.n_axes} finite values")
        m, d, l = len(mp.blocks), mp.force_dim, mp.n_axes
        sat = mp.body.t_max if sat is None else np.broadcast_to(np.asarray(sat, dtype=float), (m,))
        if cones is not None and len(cones) != m:
            raise ConfigError(f"expected {m} cones, got {len(cones)}")

        c = self._coefficient(tau)
        K = self.kd.k_b if self.kd is not None else np.zeros(d)
        n = d + l
        P = np.zeros((n, n))
        P[:d, :d] = 2.0 * (np.diag(w.W) + c * np.outer(K, K))
        P[d:, d:] = 2.0 * np.diag(w.Q)
        q = np.zeros(n)
        q[:d] = -2.0 * c * w.q2 * K
        A = np.zeros((l + d, n))
        A[:l, :d] = mp.M
        A[:l, d:] = np.eye(l)
        A[l:, :d] = np.eye(d)

        blocks = [FixedBlock(slice(0, l), tau)]
        for i, sl in enumerate(mp.blocks):
            rows = slice(l + sl.start, l + sl.stop)
            cone = cones[i] if cones is not None else None
            if cone is not None and not cone.vacuous:
                # beyond a quarter turn the reachable set is not convex; clamp
                blocks.append(BallConeBlock(rows, float(sat[i]), cone.axis, min(cone.half_angle, math.pi / 2)))
            else:
                blocks.append(BallConeBlock(rows, float(sat[i])))

        res = self.admm.solve(P, q, A, blocks, self._state if self.warm_start else None)
        F = res.z[l:].copy()
        polished = False
        Fp = closed_form_unconstrained(mp, w, tau, K, c) if self.polish else None
        if self.polish and self._feasible(Fp, sat, cones):
            sp = tau - mp.M @ Fp
            if _objective(Fp, sp, w, K, c) <= _objective(F, tau - mp.M @ F, w, K, c) + 1e-12:
                F = Fp
                polished = True
        s = tau - mp.M @ F
        if self.warm_start:
            x = np.concatenate([F, s])
            self._state = ADMMState(x, A @ x, res.y, res.rho)
        status = Status.OPTIMAL if (polished or res.status is Status.OPTIMAL) else res.status
        return QPSolution(
            F=F,
            slack=s,
            objective=_objective(F, s, w, K, c),
            iterations=res.iterations,
            status=status,
            b_value=c / w.q1 if w.q1 > 0 else 0.0,
            polished=polished,
            prim_res=res.prim_res,
            dual_res=res.dual_res,
        )

    def _feasible(self, F, sat, cones) -> bool:
        for i, sl in enumerate(self.mapping.blocks):
            f = F[sl]
            if np.linalg.norm(f) > sat[i]:
                return False
            if cones is not None and cones[i] is not None and not cones[i].contains(f):
                return False
        return True


def solve_convex(mapping, kd, p, w, tau, sat=None, cones=None, **solver_opts) -> QPSolution:
    """One-shot solve without warm start."""
    return ConvexAllocator(mapping, kd, p, w, warm_start=False, **solver_opts).solve(tau, sat, cones)
