"""Rigid body, vectorized actuators and the extended-representation mapping.

Each actuator contributes a Cartesian force block ``F_i`` to the stacked
force vector ``F``; the body wrench on the controlled axes is ``M @ F``.
Actuators whose orientation is restricted to one servo axis carry a
2-dimensional block instead of a 3-dimensional one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, RankDeficientTarget

AXES = ("Fx", "Fy", "Fz", "Tx", "Ty", "Tz")

SV_CUTOFF = 1e-12


class MountKind(str, enum.Enum):
    FULL_SPHERICAL = "full_spherical"
    AZIMUTH_ONLY = "azimuth_only"
    ELEVATION_ONLY = "elevation_only"


@dataclass(frozen=True)
class Mount:
    """Servo arrangement of one actuator.

    ``fixed_angle`` is the elevation for azimuth-only mounts and the
    azimuth for elevation-only mounts, in radians. Ignored for
    full-spherical mounts.
    """

    kind: MountKind = MountKind.FULL_SPHERICAL
    fixed_angle: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.fixed_angle):
            raise ConfigError(f"fixed mount angle must be finite, got {self.fixed_angle}")
        object.__setattr__(self, "kind", MountKind(self.kind))
        object.__setattr__(self, "fixed_angle", math.remainder(float(self.fixed_angle), 2 * math.pi))
        if self.kind is MountKind.AZIMUTH_ONLY and abs(abs(math.sin(self.fixed_angle)) - 1.0) > 1e-9:
            # other elevations sweep a cone, which has no linear force block
            raise ConfigError("azimuth-only mounts require a fixed elevation of +-pi/2")

    @property
    def force_dim(self) -> int:
        return 3 if self.kind is MountKind.FULL_SPHERICAL else 2


@dataclass(frozen=True)
class ActuatorSpec:
    position: tuple[float, float, float]
    spin: int = 0
    kappa_d: float = 0.0
    mount: Mount = field(default_factory=Mount)
    t_max: float = math.inf
    rate_limit: float = math.inf

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ConfigError(f"actuator position must be 3 finite values, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        if self.spin not in (-1, 0, 1):
            raise ConfigError(f"spin must be -1, 0 or +1, got {self.spin}")
        if not (self.kappa_d >= 0 and math.isfinite(self.kappa_d)):
            raise ConfigError(f"kappa_d must be finite and >= 0, got {self.kappa_d}")
        if self.spin == 0 and self.kappa_d != 0:
            raise ConfigError("an actuator without spin cannot produce reaction torque (kappa_d must be 0)")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be > 0, got {self.t_max}")
        if not self.rate_limit > 0:
            raise ConfigError(f"rate_limit must be > 0, got {self.rate_limit}")

    @property
    def force_dim(self) -> int:
        return self.mount.force_dim

    def force_basis(self) -> np.ndarray:
        """Orthonormal 3 x d_i map from the reduced force block to the 3D force."""
        kind, ang = self.mount.kind, self.mount.fixed_angle
        if kind is MountKind.FULL_SPHERICAL:
            return np.eye(3)
        if kind is MountKind.AZIMUTH_ONLY:
            # reduced block is T (cos b, sin b); the sign of sin(alpha) flips it
            sa = math.copysign(1.0, math.sin(ang))
            return sa * np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        # elevation-only: reduced block is (T sin a, T cos a) in the plane of the azimuth
        return np.array([[math.cos(ang), 0.0], [math.sin(ang), 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class BodyConfig:
    actuators: tuple[ActuatorSpec, ...]
    controlled_axes: tuple[str, ...] = AXES

    def __post_init__(self):
        object.__setattr__(self, "actuators", tuple(self.actuators))
        object.__setattr__(self, "controlled_axes", tuple(self.controlled_axes))
        if len(self.actuators) < 1:
            raise ConfigError("a body needs at least one actuator")
        axes = self.controlled_axes
        if not 1 <= len(axes) <= 6:
            raise ConfigError("between 1 and 6 controlled axes are required")
        unknown = [a for a in axes if a not in AXES]
        if unknown:
            raise ConfigError(f"unknown controlled axes {unknown}; valid: {list(AXES)}")
        if len(set(axes)) != len(axes):
            raise ConfigError("controlled axes must not repeat")
        if [AXES.index(a) for a in axes] != sorted(AXES.index(a) for a in axes):
            raise ConfigError(f"controlled axes must follow the order {list(AXES)}")
        if len(axes) > self.force_dim:
            raise ConfigError(f"{len(axes)} axes exceed the {self.force_dim} available force components")

    @property
    def m(self) -> int:
        return len(self.actuators)

    @property
    def force_dim(self) -> int:
        return sum(a.force_dim for a in self.actuators)

    @property
    def axis_index(self) -> list[int]:
        return [AXES.index(a) for a in self.controlled_axes]

    @property
    def t_max(self) -> np.ndarray:
        return np.array([a.t_max for a in self.actuators])

    def blocks(self) -> list[slice]:
        out, start = [], 0
        for a in self.actuators:
            out.append(slice(start, start + a.force_dim))
            start += a.force_dim
        return out


def skew(p) -> np.ndarray:
    """Cross-product matrix: ``skew(p) @ v == np.cross(p, v)``."""
    x, y, z = (float(v) for v in p)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def actuator_block(a: ActuatorSpec) -> np.ndarray:
    """6 x 3 map from the actuator's 3D force to the body wrench."""
    bottom = skew(a.position) - a.spin * a.kappa_d * np.eye(3)
    return np.vstack([np.eye(3), bottom])


def unit_vector(alpha: float, beta: float) -> np.ndarray:
    """Thrust direction for elevation ``alpha`` and azimuth ``beta``."""
    sa = math.sin(alpha)
    return np.array([sa * math.cos(beta), sa * math.sin(beta), math.cos(alpha)])


@dataclass(frozen=True, eq=False)
class MappingMatrix:
    """Linear map ``tau = M @ F`` plus its SVD-derived factorizations."""

    body: BodyConfig
    M: np.ndarray
    blocks: tuple[slice, ...]
    pinv: np.ndarray
    kernel: np.ndarray
    rank: int
    singular_values: np.ndarray

    @property
    def n_axes(self) -> int:
        return self.M.shape[0]

    @property
    def force_dim(self) -> int:
        return self.M.shape[1]

    def split(self, F: np.ndarray) -> list[np.ndarray]:
        return [F[b] for b in self.blocks]

    def pinv_block(self, i: int) -> np.ndarray:
        """Rows of the pseudo-inverse that produce actuator ``i``'s block."""
        return self.pinv[self.blocks[i]]


def full_mapping(cfg: BodyConfig) -> np.ndarray:
    """Reduced-block mapping on all six axes (6 x d)."""
    return np.hstack([actuator_block(a) @ a.force_basis() for a in cfg.actuators])


def build_mapping(cfg: BodyConfig) -> MappingMatrix:
    M = full_mapping(cfg)[cfg.axis_index]
    U, sv, Vt = np.linalg.svd(M)
    tol = SV_CUTOFF * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    if rank < M.shape[0]:
        raise RankDeficientTarget(rank, M.shape[0])
    inv_s = 1.0 / sv[:rank]
    pinv = (Vt[:rank].T * inv_s) @ U[:, :rank].T
    kernel = Vt[rank:].T.copy()
    for arr in (M, pinv, kernel, sv):
        arr.setflags(write=False)
    return MappingMatrix(
        body=cfg,
        M=M,
        blocks=tuple(cfg.blocks()),
        pinv=pinv,
        kernel=kernel,
        rank=rank,
        singular_values=sv,
    )
