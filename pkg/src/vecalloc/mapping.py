"""Exact linear-algebra allocation and force/command conversions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .body import BodyConfig, MappingMatrix, MountKind, actuator_block, unit_vector
from .errors import InconsistentConstraints

EPS_THRUST = 1e-6


@dataclass(frozen=True)
class ActuatorCommand:
    thrust: float
    alpha: float
    beta: float


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + math.pi, 2 * math.pi) - math.pi
    y = np.where(y == -math.pi, math.pi, y)
    return float(y) if np.ndim(y) == 0 else y


def angle_diff(a, b):
    """Shortest signed difference ``a - b`` in (-pi, pi]."""
    return wrap_angle(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def rest_commands(body: BodyConfig, alpha: float = 0.0, beta: float = 0.0) -> list[ActuatorCommand]:
    """Zero-thrust commands; restricted mounts report their fixed angle."""
    out = []
    for a in body.actuators:
        al, be = alpha, beta
        if a.mount.kind is MountKind.AZIMUTH_ONLY:
            al = a.mount.fixed_angle
        elif a.mount.kind is MountKind.ELEVATION_ONLY:
            be = a.mount.fixed_angle
        out.append(ActuatorCommand(0.0, al, be))
    return out


def free_angles(body: BodyConfig, cmds: Sequence[ActuatorCommand]) -> np.ndarray:
    """Servo-driven angles in actuator order (alpha before beta)."""
    vals = []
    for a, c in zip(body.actuators, cmds):
        kind = a.mount.kind
        if kind is MountKind.FULL_SPHERICAL:
            vals += [c.alpha, c.beta]
        elif kind is MountKind.AZIMUTH_ONLY:
            vals.append(c.beta)
        else:
            vals.append(c.alpha)
    return np.array(vals, dtype=float)


def with_free_angles(body: BodyConfig, thrust, angles) -> list[ActuatorCommand]:
    """Inverse of :func:`free_angles`: rebuild commands from thrusts and free angles."""
    out, k = [], 0
    for a, T in zip(body.actuators, thrust):
        kind = a.mount.kind
        if kind is MountKind.FULL_SPHERICAL:
            out.append(ActuatorCommand(float(T), float(angles[k]), float(angles[k + 1])))
            k += 2
        elif kind is MountKind.AZIMUTH_ONLY:
            out.append(ActuatorCommand(float(T), a.mount.fixed_angle, float(angles[k])))
            k += 1
        else:
            out.append(ActuatorCommand(float(T), float(angles[k]), a.mount.fixed_angle))
            k += 1
    return out


def allocate_pinv(mapping: MappingMatrix, tau) -> np.ndarray:
    """Minimum 2-norm force vector producing ``tau``."""
    return mapping.pinv @ np.asarray(tau, dtype=float)


def allocate_pinv_constrained(mapping: MappingMatrix, tau, A=None, b=None) -> np.ndarray:
    """Minimum-norm solution of ``M F = tau`` together with ``A F = b``."""
    tau = np.asarray(tau, dtype=float)
    if A is None or np.size(A) == 0:
        return allocate_pinv(mapping, tau)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    stacked = np.vstack([mapping.M, A])
    rhs = np.concatenate([tau, b])
    F = np.linalg.pinv(stacked, rcond=1e-12) @ rhs
    residual = float(np.linalg.norm(stacked @ F - rhs))
    if residual > 1e-6 * (np.linalg.norm(tau) + np.linalg.norm(b)) + 1e-12:
        raise InconsistentConstraints(residual)
    return F


def forces_to_commands(
    body: BodyConfig,
    F,
    prev: Sequence[ActuatorCommand] | None = None,
    eps_thrust: float = EPS_THRUST,
) -> list[ActuatorCommand]:
    """Thrust magnitudes and servo angles for each force block.

    Below ``eps_thrust`` the direction is undefined and the previous
    angles are held.
    """
    F = np.asarray(F, dtype=float)
    if prev is None:
        prev = rest_commands(body)
    out = []
    for a, sl, p in zip(body.actuators, body.blocks(), prev):
        f = F[sl]
        T = float(np.linalg.norm(f))
        kind = a.mount.kind
        alpha, beta = p.alpha, p.beta
        if kind is MountKind.AZIMUTH_ONLY:
            alpha = a.mount.fixed_angle
            if T >= eps_thrust:
                beta = math.atan2(f[1], f[0])
        elif kind is MountKind.ELEVATION_ONLY:
            beta = a.mount.fixed_angle
            if T >= eps_thrust:
                alpha = math.atan2(f[0], f[1])
        elif T >= eps_thrust:
            rho = math.hypot(f[0], f[1])
            alpha = math.atan2(rho, f[2])
            if rho >= eps_thrust:
                beta = math.atan2(f[1], f[0])
        out.append(ActuatorCommand(T, alpha, beta))
    return out


def commands_to_forces(body: BodyConfig, cmds: Sequence[ActuatorCommand]) -> np.ndarray:
    """Reduced force blocks realised by the given commands."""
    parts = []
    for a, c in zip(body.actuators, cmds):
        v = unit_vector(c.alpha, c.beta) * c.thrust
        parts.append(a.force_basis().T @ v)
    return np.concatenate(parts)


def commands_to_wrench(body: BodyConfig, cmds: Sequence[ActuatorCommand]) -> np.ndarray:
    """Wrench on the controlled axes produced by the nonlinear actuator model."""
    w = np.zeros(6)
    for a, c in zip(body.actuators, cmds):
        w += actuator_block(a) @ (unit_vector(c.alpha, c.beta) * c.thrust)
    return w[body.axis_index]
