"""Discrete-time scenario runner with rate-limited servos."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .body import AXES, BodyConfig, MountKind, build_mapping
from .classic import ClassicParams, solve_classic
from .convex import ConvexAllocator, ConvexWeights, build_rate_cone
from .errors import AllocationError, ConfigError, ScenarioError
from .mapping import (
    ActuatorCommand,
    angle_diff,
    allocate_pinv,
    commands_to_wrench,
    forces_to_commands,
    rest_commands,
    wrap_angle,
)
from .smooth import KernelDirection, SmoothingParams, allocate_smooth

CSV_SCHEMA = "vecalloc-timeseries/1"


def _axis(name: str) -> str:
    if name not in AXES:
        raise ConfigError(f"unknown axis {name!r}; valid: {list(AXES)}")
    return name


def _place(axis: str, value: float, axes: Sequence[str]) -> np.ndarray:
    out = np.zeros(len(axes))
    if axis in axes:
        out[list(axes).index(axis)] = value
    elif value != 0:
        raise ConfigError(f"signal axis {axis} is not a controlled axis {list(axes)}")
    return out


@dataclass(frozen=True)
class Sine:
    axis: str
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        _axis(self.axis)
        if not self.frequency > 0:
            raise ConfigError(f"sine frequency must be > 0, got {self.frequency}")

    def value(self, t: float, axes) -> np.ndarray:
        v = self.amplitude * math.sin(2 * math.pi * self.frequency * t + self.phase)
        return _place(self.axis, v, axes)


@dataclass(frozen=True)
class RampHold:
    """Linear ramp from 0 to ``peak``, hold, then linear ramp back to 0."""

    axis: str
    peak: float
    rise_time: float
    fall_time: float
    hold_time: float = 0.0
    start_time: float = 0.0

    def __post_init__(self):
        _axis(self.axis)
        if not self.rise_time > 0:
            raise ConfigError(f"rise_time must be > 0, got {self.rise_time}")
        if not self.fall_time >= 0 or not self.hold_time >= 0:
            raise ConfigError("fall_time and hold_time must be >= 0")

    def level(self, t: float) -> float:
        s = t - self.start_time
        if s <= 0:
            return 0.0
        if s < self.rise_time:
            return s / self.rise_time
        s -= self.rise_time
        if s <= self.hold_time:
            return 1.0
        s -= self.hold_time
        if s < self.fall_time:
            return 1.0 - s / self.fall_time
        return 0.0

    def value(self, t: float, axes) -> np.ndarray:
        return _place(self.axis, self.peak * self.level(t), axes)


@dataclass(frozen=True)
class Constant:
    wrench: tuple[tuple[str, float], ...]

    def __post_init__(self):
        items = self.wrench.items() if isinstance(self.wrench, dict) else self.wrench
        items = tuple((_axis(k), float(v)) for k, v in items)
        object.__setattr__(self, "wrench", items)

    def value(self, t: float, axes) -> np.ndarray:
        out = np.zeros(len(axes))
        for k, v in self.wrench:
            out += _place(k, v, axes)
        return out


@dataclass(frozen=True)
class Sum:
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def value(self, t: float, axes) -> np.ndarray:
        out = np.zeros(len(axes))
        for s in self.terms:
            out += s.value(t, axes)
        return out


class Allocator(str, enum.Enum):
    PINV = "pinv"
    SMOOTH = "smooth"
    CONVEX = "convex"
    CLASSIC = "classic"


@dataclass(eq=False)
class ScenarioConfig:
    body: BodyConfig
    allocator: Allocator
    signal: object
    dt: float
    duration: float
    initial_commands: list | None = None
    smoothing: SmoothingParams | None = None
    kd: KernelDirection | None = None
    convex: ConvexWeights | None = None
    classic: ClassicParams | None = None
    rate_cones: bool = True
    convex_opts: dict = field(default_factory=dict)
    name: str = "scenario"

    def __post_init__(self):
        self.allocator = Allocator(self.allocator)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be finite and > 0, got {self.dt}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError(f"duration must be finite and > 0, got {self.duration}")
        if self.dt > self.duration:
            raise ConfigError("dt must not exceed duration")
        if self.initial_commands is None:
            self.initial_commands = rest_commands(self.body)
        if len(self.initial_commands) != self.body.m:
            raise ConfigError(f"expected {self.body.m} initial commands, got {len(self.initial_commands)}")
        if any(c.thrust < 0 for c in self.initial_commands):
            raise ConfigError("initial thrusts must be >= 0")
        a = self.allocator
        if a is Allocator.SMOOTH and (self.smoothing is None or self.kd is None):
            raise ConfigError("the smooth allocator needs smoothing parameters and K_b")
        if a is Allocator.CONVEX and self.convex is None:
            raise ConfigError("the convex allocator needs convex weights")
        if a is Allocator.CLASSIC and self.classic is None:
            raise ConfigError("the classic allocator needs classic parameters")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9)) + 1


@dataclass
class TimeSeries:
    axes: tuple[str, ...]
    t: np.ndarray
    tau_ref: np.ndarray
    tau_prod: np.ndarray
    thrust_ref: np.ndarray
    alpha_ref: np.ndarray
    beta_ref: np.ndarray
    thrust: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    slack: np.ndarray
    power_fraction: np.ndarray
    b_value: np.ndarray
    iterations: np.ndarray
    status: list = field(default_factory=list)

    def __len__(self):
        return self.t.size

    @property
    def m(self) -> int:
        return self.thrust.shape[1]


def power_fraction(commands: Sequence[ActuatorCommand], cfg: BodyConfig) -> float:
    """Share of the maximum quadratic power in use (0 when no thrust limit is finite)."""
    T = np.array([c.thrust for c in commands])
    tm = cfg.t_max
    den = float(np.sum(tm**2))
    if not math.isfinite(den):
        return 0.0
    return float(np.sum(T**2) / den)


def servo_step(body: BodyConfig, actual, ref, dt: float) -> list[ActuatorCommand]:
    """Slew actual angles toward the references; thrust clipped to [0, t_max]."""
    out = []
    for a, c, r in zip(body.actuators, actual, ref):
        lim = a.rate_limit * dt

        def slew(x, target):
            d = angle_diff(target, x)
            if math.isfinite(lim):
                d = max(-lim, min(lim, d))
            return wrap_angle(x + d)

        al, be = c.alpha, c.beta
        kind = a.mount.kind
        if kind is MountKind.FULL_SPHERICAL:
            al, be = slew(al, r.alpha), slew(be, r.beta)
        elif kind is MountKind.AZIMUTH_ONLY:
            al, be = a.mount.fixed_angle, slew(be, r.beta)
        else:
            al, be = slew(al, r.alpha), a.mount.fixed_angle
        T = min(max(r.thrust, 0.0), a.t_max)
        out.append(ActuatorCommand(T, al, be))
    return out


def run_scenario(sc: ScenarioConfig) -> TimeSeries:
    body = sc.body
    mp = build_mapping(body)
    axes = body.controlled_axes
    n, m, l = sc.n_steps, body.m, len(axes)
    rec = {k: np.zeros((n, m)) for k in ("thrust_ref", "alpha_ref", "beta_ref", "thrust", "alpha", "beta")}
    tau_ref = np.zeros((n, l))
    tau_prod = np.zeros((n, l))
    slack = np.zeros((n, l))
    pf = np.zeros(n)
    bval = np.zeros(n)
    iters = np.zeros(n, dtype=int)
    status = []

    solver = None
    if sc.allocator is Allocator.CONVEX:
        kd = sc.kd if sc.convex.q1 > 0 else None
        solver = ConvexAllocator(mp, kd, sc.smoothing, sc.convex, **sc.convex_opts)

    actual = list(sc.initial_commands)
    ref_prev = list(sc.initial_commands)
    for k in range(n):
        t = k * sc.dt
        try:
            tau = np.asarray(sc.signal.value(t, axes), dtype=float)
            st = "ok"
            if sc.allocator is Allocator.PINV:
                F = allocate_pinv(mp, tau)
                ref = forces_to_commands(body, F, ref_prev)
                s = tau - mp.M @ F
            elif sc.allocator is Allocator.SMOOTH:
                F, diag = allocate_smooth(mp, sc.kd, sc.smoothing, tau)
                ref = forces_to_commands(body, F, ref_prev)
                s = tau - mp.M @ F
                bval[k] = diag.b_value
            elif sc.allocator is Allocator.CONVEX:
                cones = [build_rate_cone(c, a, sc.dt) for c, a in zip(actual, body.actuators)] if sc.rate_cones else None
                sol = solver.solve(tau, cones=cones)
                ref = forces_to_commands(body, sol.F, ref_prev)
                s = sol.slack
                bval[k] = sol.b_value
                iters[k] = sol.iterations
                st = sol.status.value
            else:
                ref, s = solve_classic(body, sc.classic, tau, actual, sc.dt)
        except AllocationError as exc:
            raise ScenarioError(k, exc) from exc
        actual = servo_step(body, actual, ref, sc.dt)
        ref_prev = ref

        tau_ref[k] = tau
        tau_prod[k] = commands_to_wrench(body, actual)
        slack[k] = s
        pf[k] = power_fraction(actual, body)
        status.append(st)
        for i in range(m):
            rec["thrust_ref"][k, i] = ref[i].thrust
            rec["alpha_ref"][k, i] = ref[i].alpha
            rec["beta_ref"][k, i] = ref[i].beta
            rec["thrust"][k, i] = actual[i].thrust
            rec["alpha"][k, i] = actual[i].alpha
            rec["beta"][k, i] = actual[i].beta

    return TimeSeries(
        axes=tuple(axes),
        t=np.arange(n) * sc.dt,
        tau_ref=tau_ref,
        tau_prod=tau_prod,
        slack=slack,
        power_fraction=pf,
        b_value=bval,
        iterations=iters,
        status=status,
        **rec,
    )


def angle_steps(ts: TimeSeries) -> np.ndarray:
    """Wrapped per-step change of every actual angle, shape (n - 1, 2 m)."""
    ang = np.hstack([ts.alpha, ts.beta])
    return np.abs(angle_diff(ang[1:], ang[:-1]))


def rms_error(ts: TimeSeries, axis: str, t_lo=None, t_hi=None, exclude: bool = False) -> float:
    """RMS of ``tau_ref - tau_prod`` on one axis, inside (or outside) a time window."""
    j = ts.axes.index(axis)
    lo = -math.inf if t_lo is None else t_lo
    hi = math.inf if t_hi is None else t_hi
    mask = (ts.t >= lo) & (ts.t <= hi)
    if exclude:
        mask = ~mask
    e = ts.tau_ref[mask, j] - ts.tau_prod[mask, j]
    return float(np.sqrt(np.mean(e**2))) if e.size else 0.0


def tracking_metrics(ts: TimeSeries) -> dict:
    if len(ts) == 0:
        raise ConfigError("empty time series")
    err = ts.tau_ref - ts.tau_prod
    steps = angle_steps(ts)
    dt = float(ts.t[1] - ts.t[0]) if len(ts) > 1 else 0.0
    return {
        "rms_error": {a: float(np.sqrt(np.mean(err[:, j] ** 2))) for j, a in enumerate(ts.axes)},
        "max_slack": float(np.abs(ts.slack).max(initial=0.0)),
        "max_angle_step": float(steps.max(initial=0.0)),
        "power_integral": float(np.sum(ts.power_fraction) * dt),
    }


def csv_columns(axes, m: int) -> list[str]:
    cols = ["t"]
    cols += [f"tau_ref_{a}" for a in axes]
    cols += [f"tau_prod_{a}" for a in axes]
    for pre in ("T_ref", "alpha_ref", "beta_ref", "T", "alpha", "beta"):
        cols += [f"{pre}_{i + 1}" for i in range(m)]
    cols += [f"slack_{a}" for a in axes]
    cols += ["power_fraction"]
    return cols


def _fmt(x) -> str:
    return "%.17g" % x


def write_csv(ts: TimeSeries, fh) -> None:
    """Schema line, header row, then one row per step (angles in radians)."""
    fh.write(f"# {CSV_SCHEMA}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(csv_columns(ts.axes, ts.m))
    for k in range(len(ts)):
        row = [ts.t[k], *ts.tau_ref[k], *ts.tau_prod[k]]
        for arr in (ts.thrust_ref, ts.alpha_ref, ts.beta_ref, ts.thrust, ts.alpha, ts.beta):
            row += list(arr[k])
        row += [*ts.slack[k], ts.power_fraction[k]]
        w.writerow([_fmt(v) for v in row])


def to_csv(ts: TimeSeries) -> str:
    buf = io.StringIO()
    write_csv(ts, buf)
    return buf.getvalue()


def write_curve(path, columns, rows) -> None:
    """Small CSV for a single reproduced curve."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
