"""JSON configuration documents.

Angles are written in degrees (rates in degrees per second) and converted
to radians when domain objects are built. Forces are in N, torques in
N m, positions in m. Unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .body import ActuatorSpec, BodyConfig, Mount, build_mapping
from .classic import ClassicParams
from .convex import ConvexWeights
from .errors import AllocationError, ConfigError
from .kb import KbProblem, KbSolution, solve_kb
from .mapping import ActuatorCommand, rest_commands
from .sim import Constant, RampHold, ScenarioConfig, Sine, Sum
from .smooth import KernelDirection, SmoothingParams


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MountDoc(_Model):
    kind: Literal["full_spherical", "azimuth_only", "elevation_only"] = "full_spherical"
    fixed_angle: float = 0.0  # deg


class ActuatorDoc(_Model):
    position: tuple[float, float, float]
    spin: Literal[-1, 0, 1] = 0
    kappa_d: float = 0.0
    mount: MountDoc = MountDoc()
    t_max: Optional[float] = None  # N, None = unlimited
    rate_limit: Optional[float] = None  # deg/s, None = unlimited


class BodyDoc(_Model):
    actuators: list[ActuatorDoc]
    controlled_axes: list[str] = ["Fx", "Fy", "Fz", "Tx", "Ty", "Tz"]


class SmoothingDoc(_Model):
    k_a: float
    k_b: float
    eps2: float
    mode: Literal["paper_sigmoid", "strict_ramp"] = "paper_sigmoid"


class ConvexDoc(_Model):
    W: Union[float, list[float]]
    Q: Union[float, list[float]]
    q1: float = 0.0
    q2: float = 0.0
    rate_cones: bool = True
    max_iter: int = 20_000
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6


class ClassicDoc(_Model):
    W: Union[float, list[float]]
    Q: Union[float, list[float]]
    Omega: Union[float, list[float]]
    rho: float = 0.0
    eps_det: float = 1e-10
    outer_iters: int = 50


class KbDoc(_Model):
    """Either an explicit ``vector`` or the inputs of the offline solve."""

    vector: Optional[list[float]] = None
    typical: list[list[float]] = []
    seeds: int = 64
    seed: int = 0
    min_block_norm: float = 1.0


class SineDoc(_Model):
    type: Literal["sine"]
    axis: str
    amplitude: float
    frequency: float
    phase: float = 0.0  # deg


class RampHoldDoc(_Model):
    type: Literal["ramp_hold"]
    axis: str
    peak: float
    rise_time: float
    fall_time: float
    hold_time: float = 0.0
    start_time: float = 0.0


class ConstantDoc(_Model):
    type: Literal["constant"]
    wrench: dict[str, float]


class SumDoc(_Model):
    type: Literal["sum"]
    terms: list["SignalDoc"]


SignalDoc = Annotated[Union[SineDoc, RampHoldDoc, ConstantDoc, SumDoc], Field(discriminator="type")]
SumDoc.model_rebuild()


class InitialDoc(_Model):
    """Initial actuator state, angles in degrees.

    ``thrust_from_wrench`` sets the thrusts of the pseudo-inverse
    allocation of that wrench instead of listing them.
    """

    thrust: Optional[list[float]] = None
    alpha: Optional[list[float]] = None
    beta: Optional[list[float]] = None
    thrust_from_wrench: Optional[list[float]] = None


class ScenarioDoc(_Model):
    allocator: Literal["pinv", "smooth", "convex", "classic"] = "convex"
    dt: float
    duration: float
    signal: SignalDoc
    initial: InitialDoc = InitialDoc()


class ConfigDocument(_Model):
    name: str = "config"
    body: BodyDoc
    smoothing: Optional[SmoothingDoc] = None
    convex: Optional[ConvexDoc] = None
    classic: Optional[ClassicDoc] = None
    scenario: Optional[ScenarioDoc] = None
    kb: Optional[KbDoc] = None


# -- parsing ------------------------------------------------------------


def _format_validation(err: ValidationError, source: str) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return f"{source}: invalid config: " + "; ".join(parts)


def parse_config(text: str, source: str = "<string>") -> ConfigDocument:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    try:
        doc = ConfigDocument.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc, source)) from exc
    # re-check domain invariants now so bad values fail at parse time
    try:
        body = build_body(doc)
        build_mapping(body)
        if doc.smoothing:
            build_smoothing(doc)
        if doc.convex:
            build_convex(doc, body)
        if doc.classic:
            build_classic(doc)
        if doc.scenario:
            build_signal(doc.scenario.signal)
            initial_commands(doc, body)
    except AllocationError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return doc


def load_config(path) -> ConfigDocument:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    return parse_config(text, str(p))


def dump_config(doc: ConfigDocument) -> str:
    return json.dumps(doc.model_dump(mode="json", exclude_none=True), indent=2) + "\n"


def shipped_config_path(name: str) -> Path:
    return Path(str(resources.files("vecalloc") / "data" / name))


def load_shipped(name: str) -> ConfigDocument:
    return load_config(shipped_config_path(name))


# -- domain construction --------------------------------------------------


def _rad(x):
    return math.radians(x)


def build_body(doc: ConfigDocument) -> BodyConfig:
    acts = []
    for i, a in enumerate(doc.body.actuators):
        try:
            acts.append(
                ActuatorSpec(
                    position=a.position,
                    spin=a.spin,
                    kappa_d=a.kappa_d,
                    mount=Mount(a.mount.kind, _rad(a.mount.fixed_angle)),
                    t_max=math.inf if a.t_max is None else a.t_max,
                    rate_limit=math.inf if a.rate_limit is None else _rad(a.rate_limit),
                )
            )
        except ConfigError as exc:
            raise ConfigError(f"body.actuators.{i}: {exc}") from exc
    return BodyConfig(tuple(acts), tuple(doc.body.controlled_axes))


def build_smoothing(doc: ConfigDocument) -> SmoothingParams:
    if doc.smoothing is None:
        raise ConfigError("config has no 'smoothing' section")
    s = doc.smoothing
    return SmoothingParams(s.k_a, s.k_b, s.eps2, s.mode)


def _expand(v, n):
    a = np.asarray(v, dtype=float)
    return np.full(n, float(a)) if a.ndim == 0 else a


def build_convex(doc: ConfigDocument, body: BodyConfig) -> ConvexWeights:
    if doc.convex is None:
        raise ConfigError("config has no 'convex' section")
    c = doc.convex
    d, l = body.force_dim, len(body.controlled_axes)
    W = _expand(c.W, d)
    if W.size != d and d % W.size == 0:
        # one weight block per actuator, repeated
        W = np.tile(W, d // W.size)
    return ConvexWeights(W, _expand(c.Q, l), c.q1, c.q2)


def build_classic(doc: ConfigDocument) -> ClassicParams:
    if doc.classic is None:
        raise ConfigError("config has no 'classic' section")
    c = doc.classic
    return ClassicParams(np.atleast_1d(c.W), np.atleast_1d(c.Q), np.atleast_1d(c.Omega), c.rho, c.eps_det, c.outer_iters)


def build_signal(sd):
    if isinstance(sd, SineDoc):
        return Sine(sd.axis, sd.amplitude, sd.frequency, _rad(sd.phase))
    if isinstance(sd, RampHoldDoc):
        return RampHold(sd.axis, sd.peak, sd.rise_time, sd.fall_time, sd.hold_time, sd.start_time)
    if isinstance(sd, ConstantDoc):
        return Constant(tuple(sd.wrench.items()))
    return Sum(tuple(build_signal(t) for t in sd.terms))


def initial_commands(doc: ConfigDocument, body: BodyConfig) -> list[ActuatorCommand]:
    init = doc.scenario.initial if doc.scenario else InitialDoc()
    m = body.m
    base = rest_commands(body)
    for name in ("thrust", "alpha", "beta"):
        v = getattr(init, name)
        if v is not None and len(v) != m:
            raise ConfigError(f"scenario.initial.{name} must have {m} entries")
    if init.thrust is not None and init.thrust_from_wrench is not None:
        raise ConfigError("give either scenario.initial.thrust or thrust_from_wrench, not both")
    if init.thrust is not None:
        thrust = list(init.thrust)
    elif init.thrust_from_wrench is not None:
        mp = build_mapping(body)
        tau = np.asarray(init.thrust_from_wrench, dtype=float)
        if tau.shape != (mp.n_axes,):
            raise ConfigError(f"scenario.initial.thrust_from_wrench must have {mp.n_axes} entries")
        F = mp.pinv @ tau
        thrust = [float(np.linalg.norm(F[sl])) for sl in mp.blocks]
    else:
        thrust = [0.0] * m
    out = []
    for i, b in enumerate(base):
        al = _rad(init.alpha[i]) if init.alpha is not None else b.alpha
        be = _rad(init.beta[i]) if init.beta is not None else b.beta
        out.append(ActuatorCommand(float(thrust[i]), al, be))
    if any(c.thrust < 0 for c in out):
        raise ConfigError("initial thrusts must be >= 0")
    return out


def kb_document(sol: KbSolution, typical) -> dict:
    return {
        "k_b": [float(x) for x in sol.k_b],
        "block_norms": [float(x) for x in sol.direction.block_norms],
        "residual": sol.residual,
        "objective": sol.objective,
        "bases": [[[float(x) for x in row] for row in B] for B in sol.direction.bases],
        "seed_index": sol.seed_index,
        "n_feasible_starts": sol.n_feasible_starts,
        "typical": [[float(x) for x in t] for t in typical],
    }


def load_kb_document(path, mapping) -> KernelDirection:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read K_b document {p}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    if not isinstance(raw, dict) or "k_b" not in raw:
        raise ConfigError(f"{p}: K_b document needs a 'k_b' entry")
    return KernelDirection.from_vector(mapping, raw["k_b"])


def build_kb(doc: ConfigDocument, mapping) -> KernelDirection:
    """Kernel direction from the config: inline vector, else solved offline."""
    kb = doc.kb or KbDoc()
    if kb.vector is not None:
        return KernelDirection.from_vector(mapping, kb.vector)
    return solve_kb(KbProblem(mapping, kb.typical, kb.min_block_norm), seeds=kb.seeds, rng_seed=kb.seed).direction


def build_scenario(doc: ConfigDocument, allocator: str | None = None, kd: KernelDirection | None = None) -> ScenarioConfig:
    if doc.scenario is None:
        raise ConfigError("config has no 'scenario' section")
    body = build_body(doc)
    mp = build_mapping(body)
    alloc = allocator or doc.scenario.allocator
    smoothing = build_smoothing(doc) if doc.smoothing else None
    if kd is None and (alloc == "smooth" or (alloc == "convex" and doc.convex and doc.convex.q1 > 0)):
        kd = build_kb(doc, mp)
    return ScenarioConfig(
        body=body,
        allocator=alloc,
        signal=build_signal(doc.scenario.signal),
        dt=doc.scenario.dt,
        duration=doc.scenario.duration,
        initial_commands=initial_commands(doc, body),
        smoothing=smoothing,
        kd=kd,
        convex=build_convex(doc, body) if doc.convex else None,
        classic=build_classic(doc) if doc.classic else None,
        rate_cones=doc.convex.rate_cones if doc.convex else True,
        convex_opts=(
            {"max_iter": doc.convex.max_iter, "eps_abs": doc.convex.eps_abs, "eps_rel": doc.convex.eps_rel}
            if doc.convex
            else {}
        ),
        name=doc.name,
    )
