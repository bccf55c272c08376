"""Classic nonconvex allocation over thrusts and servo angles.

Baseline used for comparison with the convex allocator::

    minimize  T'WT + s'Qs + dth'Omega dth + rho / (eps + det(J J'))
    s.t.      tau = J(theta) T + s,  0 <= T <= t_max,  |dth| <= rate * dt

For fixed angles the thrusts are a box-constrained least-squares
problem. The angles are then optimised over the rate box by a bounded
quasi-Newton method on the cost with thrusts re-solved at every angle
set. Being local, it stalls when a thrust collapses to zero: the
tracking term then has no gradient with respect to that actuator's
angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import lsq_linear, minimize, nnls

from .body import BodyConfig, MountKind, actuator_block
from .convex import _diag
from .errors import ConfigError
from .mapping import ActuatorCommand, free_angles, wrap_angle, with_free_angles


@dataclass(frozen=True, eq=False)
class ClassicParams:
    """Weights of the classic program, given as diagonals.

    ``W`` has one entry per actuator, ``Q`` one per controlled axis and
    ``Omega`` one per servo-driven angle.
    """

    W: np.ndarray
    Q: np.ndarray
    Omega: np.ndarray
    rho: float = 0.0
    eps_det: float = 1e-10
    outer_iters: int = 50

    def __post_init__(self):
        for name in ("W", "Q", "Omega"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if a.ndim == 2:
                a = np.diag(a).copy()
            if not np.all(np.isfinite(a)) or np.any(a < 0) or (name != "Omega" and np.any(a == 0)):
                raise ConfigError(f"classic {name} entries must be finite and > 0")
            object.__setattr__(self, name, a)
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ConfigError(f"rho must be finite and >= 0, got {self.rho}")
        if not self.eps_det > 0:
            raise ConfigError(f"eps_det must be > 0, got {self.eps_det}")
        if self.outer_iters < 1:
            raise ConfigError("outer_iters must be >= 1")

    def sized(self, cfg: BodyConfig) -> "ClassicParams":
        n_ang = sum(2 if a.mount.kind is MountKind.FULL_SPHERICAL else 1 for a in cfg.actuators)
        return ClassicParams(
            _diag(self.W if self.W.size > 1 else self.W[0], cfg.m, "W"),
            _diag(self.Q if self.Q.size > 1 else self.Q[0], len(cfg.controlled_axes), "Q"),
            self.Omega if self.Omega.size == n_ang else np.full(n_ang, float(self.Omega[0])),
            self.rho,
            self.eps_det,
            self.outer_iters,
        )


class _Geometry:
    """Wrench Jacobian ``J(theta)`` and its angle derivatives."""

    def __init__(self, cfg: BodyConfig):
        self.cfg = cfg
        rows = cfg.axis_index
        self.B = [actuator_block(a)[rows] for a in cfg.actuators]
        self.kinds = [a.mount.kind for a in cfg.actuators]
        self.fixed = [a.mount.fixed_angle for a in cfg.actuators]

    def _angles(self, theta):
        k = 0
        for kind, fx in zip(self.kinds, self.fixed):
            if kind is MountKind.FULL_SPHERICAL:
                yield theta[k], theta[k + 1], (k, k + 1)
                k += 2
            elif kind is MountKind.AZIMUTH_ONLY:
                yield fx, theta[k], (None, k)
                k += 1
            else:
                yield theta[k], fx, (k, None)
                k += 1

    def jac(self, theta):
        """Returns ``J`` (l x m) and ``dJ`` (n_angles, l) column derivatives with owner index."""
        cols, dcols, owner = [], [], []
        for i, (al, be, idx) in enumerate(self._angles(theta)):
            sa, ca, sb, cb = math.sin(al), math.cos(al), math.sin(be), math.cos(be)
            v = np.array([sa * cb, sa * sb, ca])
            cols.append(self.B[i] @ v)
            if idx[0] is not None:
                dcols.append((idx[0], self.B[i] @ np.array([ca * cb, ca * sb, -sa])))
                owner.append(i)
            if idx[1] is not None:
                dcols.append((idx[1], self.B[i] @ np.array([-sa * sb, sa * cb, 0.0])))
                owner.append(i)
        J = np.array(cols).T
        n = len(dcols)
        dJ = np.zeros((n, J.shape[0]))
        own = np.zeros(n, dtype=int)
        for (k, col), i in zip(dcols, owner):
            dJ[k] = col
            own[k] = i
        return J, dJ, own


def _det_penalty(geo, theta, rho, eps):
    if rho == 0:
        return 0.0
    J = geo.jac(theta)[0]
    return rho / (eps + float(np.linalg.det(J @ J.T)))


def solve_classic(
    cfg: BodyConfig,
    params: ClassicParams,
    tau,
    prev: Sequence[ActuatorCommand],
    dt: float | None = None,
):
    """Local solution of the classic program starting from ``prev``.

    ``dt`` activates the servo rate limits; ``None`` leaves angles free.
    Returns ``(commands, slack)``.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (len(cfg.controlled_axes),) or not np.all(np.isfinite(tau)):
        raise ConfigError(f"tau must be {len(cfg.controlled_axes)} finite values")
    if len(prev) != cfg.m:
        raise ConfigError(f"expected {cfg.m} previous commands, got {len(prev)}")
    prm = params.sized(cfg)
    geo = _Geometry(cfg)
    t_max = cfg.t_max
    sqW, sqQ = np.sqrt(prm.W), np.sqrt(prm.Q)

    theta0 = free_angles(cfg, prev)
    rates = []
    for a in cfg.actuators:
        rates += [a.rate_limit] * (2 if a.mount.kind is MountKind.FULL_SPHERICAL else 1)
    rates = np.array(rates)
    if dt is not None and dt > 0:
        span = rates * dt
        bounds = [(t - h, t + h) if math.isfinite(h) else (None, None) for t, h in zip(theta0, span)]
    else:
        bounds = [(None, None)] * theta0.size

    lo, hi = np.zeros(cfg.m), t_max

    def thrust_step(th):
        J = geo.jac(th)[0]
        A = np.vstack([sqQ[:, None] * J, np.diag(sqW)])
        rhs = np.concatenate([sqQ * tau, np.zeros(cfg.m)])
        T, _ = nnls(A, rhs)
        if np.any(T > hi):
            T = lsq_linear(A, rhs, bounds=(lo, hi), method="bvls").x
        return np.clip(T, lo, hi)

    def reduced_cost(th):
        # thrusts re-optimised for every angle set; gradient by the envelope theorem
        T = thrust_step(th)
        J, dJ, own = geo.jac(th)
        r = tau - J @ T
        dth = th - theta0
        f = float(T @ (prm.W * T) + r @ (prm.Q * r) + dth @ (prm.Omega * dth))
        g = -2.0 * (dJ @ (prm.Q * r)) * T[own] + 2.0 * prm.Omega * dth
        if prm.rho > 0:
            f += _det_penalty(geo, th, prm.rho, prm.eps_det)
            h = 1e-7
            for k in range(th.size):
                e = np.zeros_like(th)
                e[k] = h
                g[k] += (
                    _det_penalty(geo, th + e, prm.rho, prm.eps_det) - _det_penalty(geo, th - e, prm.rho, prm.eps_det)
                ) / (2 * h)
        return f / scale, g / scale

    theta = theta0.copy()
    scale = 1.0
    scale = max(reduced_cost(theta)[0], 1e-300) if theta.size else 1.0
    if theta.size:
        res = minimize(
            reduced_cost,
            theta,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": prm.outer_iters, "ftol": 1e-15, "gtol": 1e-12},
        )
        theta = res.x
    T = thrust_step(theta)
    J = geo.jac(theta)[0]
    slack = tau - J @ T
    cmds = with_free_angles(cfg, T, wrap_angle(theta) if theta.size else theta)
    return cmds, slack
