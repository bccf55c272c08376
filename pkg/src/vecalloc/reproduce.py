"""Figure reproduction: scenario runs and sweeps written as CSV curves."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .body import build_mapping
from .config import build_body, build_kb, build_scenario, build_smoothing, load_shipped
from .mapping import allocate_pinv, forces_to_commands
from .sim import run_scenario, write_curve
from .smooth import SmoothingMode, SmoothingParams, allocate_smooth, angle_slopes, lipschitz_bound

USV_CONFIG = "usv_docking.json"
USV_SMOOTHING_CONFIG = "usv_smoothing.json"
QUAD_CONFIG = "quad_flip.json"

# values printed for the two case studies, reported next to ours
REFERENCE_LIPSCHITZ = {"lipschitz-usv": 5.68, "lipschitz-quad": 2.7893}


@dataclass(frozen=True)
class Curve:
    name: str
    columns: list
    rows: np.ndarray


def thread_cap() -> int:
    raw = os.environ.get("VECALLOC_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def run_shipped(config: str, allocator: str):
    doc = load_shipped(config)
    return run_scenario(build_scenario(doc, allocator))


def _runs(config, allocators):
    with ThreadPoolExecutor(max_workers=min(thread_cap(), len(allocators))) as ex:
        futs = {a: ex.submit(run_shipped, config, a) for a in allocators}
        return {a: f.result() for a, f in futs.items()}


def _idx(m):
    return [str(i + 1) for i in range(m)]


def usv_sweep(step: float = 10.0, amplitude: float = 1e5) -> np.ndarray:
    fx = np.arange(-amplitude, amplitude + step / 2, step)
    taus = np.zeros((fx.size, 3))
    taus[:, 0] = fx
    return taus


def quad_sweep(step: float = 1e-3, peak: float = 10.0, weight: float = 9.81) -> np.ndarray:
    ty = np.linspace(-peak, peak, int(round(2 * peak / step)) + 1)
    taus = np.zeros((ty.size, 6))
    taus[:, 2] = weight
    taus[:, 4] = ty
    return taus


def lipschitz_case(figure: str, mode: SmoothingMode | str | None = None):
    """Bound and observed slope per actuator for a case-study sweep.

    Returns ``(taus, bound, empirical, smooth_forces, pinv_forces, body)``.
    """
    if figure == "lipschitz-usv":
        doc, taus = load_shipped(USV_SMOOTHING_CONFIG), usv_sweep()
    elif figure == "lipschitz-quad":
        doc, taus = load_shipped(QUAD_CONFIG), quad_sweep()
    else:
        raise KeyError(figure)
    body = build_body(doc)
    mp = build_mapping(body)
    kd = build_kb(doc, mp)
    p = build_smoothing(doc)
    if mode is not None:
        p = SmoothingParams(p.k_a, p.k_b, p.eps2, mode)
    smooth_F = [allocate_smooth(mp, kd, p, t)[0] for t in taus]
    pinv_F = [allocate_pinv(mp, t) for t in taus]
    bound = lipschitz_bound(mp, kd, p, taus.min(axis=0), taus.max(axis=0))
    emp = angle_slopes(body, taus, smooth_F)
    return taus, bound, emp, smooth_F, pinv_F, body


def _lipschitz_curves(figure):
    curves = []
    rows = []
    res = {}
    for mode in SmoothingMode:
        taus, bound, emp, sF, pF, body = lipschitz_case(figure, mode)
        res[mode] = (bound, emp)
        if mode is SmoothingMode.PAPER_SIGMOID:
            sweep_axis = 0 if figure == "lipschitz-usv" else 4
            key = "beta" if figure == "lipschitz-usv" else "alpha"
            prev_s = prev_p = None
            data = []
            for t, fs, fp in zip(taus, sF, pF):
                cs = forces_to_commands(body, fs, prev_s)
                cp = forces_to_commands(body, fp, prev_p)
                prev_s, prev_p = cs, cp
                data.append([t[sweep_axis]] + [getattr(c, key) for c in cs] + [getattr(c, key) for c in cp])
            m = body.m
            cols = ["tau"] + [f"{key}_smooth_{i}" for i in _idx(m)] + [f"{key}_pinv_{i}" for i in _idx(m)]
            curves.append(Curve("sweep", cols, np.array(data)))
    m = len(res[SmoothingMode.PAPER_SIGMOID][0])
    for i in range(m):
        rows.append(
            [
                i + 1,
                res[SmoothingMode.PAPER_SIGMOID][0][i],
                res[SmoothingMode.PAPER_SIGMOID][1][i],
                res[SmoothingMode.STRICT_RAMP][0][i],
                res[SmoothingMode.STRICT_RAMP][1][i],
                REFERENCE_LIPSCHITZ[figure],
            ]
        )
    cols = [
        "actuator",
        "bound_paper_sigmoid",
        "empirical_paper_sigmoid",
        "bound_strict_ramp",
        "empirical_strict_ramp",
        "reference_value",
    ]
    curves.insert(0, Curve("bounds", cols, np.array(rows, dtype=float)))
    return curves


def _series_curves(runs, fields, label):
    curves = []
    for alloc, ts in runs.items():
        cols = ["t"]
        data = [ts.t]
        for f in fields:
            arr = getattr(ts, f)
            if arr.ndim == 1:
                cols.append(f)
                data.append(arr)
            else:
                cols += [f"{label.get(f, f)}_{i}" for i in _idx(arr.shape[1])]
                data += list(arr.T)
        curves.append(Curve(alloc, cols, np.column_stack(data)))
    return curves


def _axis_curves(runs, axis, include_ref=True):
    curves = []
    first = next(iter(runs.values()))
    j = first.axes.index(axis)
    if include_ref:
        curves.append(Curve("reference", ["t", axis], np.column_stack([first.t, first.tau_ref[:, j]])))
    for alloc, ts in runs.items():
        curves.append(Curve(alloc, ["t", axis], np.column_stack([ts.t, ts.tau_prod[:, j]])))
    return curves


FIGURES = {
    "usv-angles": (USV_CONFIG, ("pinv", "classic", "convex"), lambda r: _series_curves(r, ["beta_ref"], {})),
    "usv-thrusts": (USV_CONFIG, ("pinv", "classic", "convex"), lambda r: _series_curves(r, ["thrust_ref"], {"thrust_ref": "T_ref"})),
    "usv-power": (USV_CONFIG, ("pinv", "classic", "convex"), lambda r: _series_curves(r, ["power_fraction"], {})),
    "usv-fx": (USV_CONFIG, ("classic", "convex"), lambda r: _axis_curves(r, "Fx")),
    "quad-angles": (QUAD_CONFIG, ("pinv", "convex"), lambda r: _series_curves(r, ["alpha_ref"], {})),
    "quad-thrusts": (QUAD_CONFIG, ("pinv", "convex"), lambda r: _series_curves(r, ["thrust_ref"], {"thrust_ref": "T_ref"})),
    "quad-tauy": (QUAD_CONFIG, ("convex", "pinv"), lambda r: _axis_curves(r, "Ty")),
    "quad-power": (QUAD_CONFIG, ("pinv", "convex"), lambda r: _series_curves(r, ["power_fraction"], {})),
    "lipschitz-usv": None,
    "lipschitz-quad": None,
}


def figure_curves(figure: str) -> list[Curve]:
    if figure not in FIGURES:
        raise KeyError(figure)
    entry = FIGURES[figure]
    if entry is None:
        return _lipschitz_curves(figure)
    config, allocators, make = entry
    return make(_runs(config, allocators))


def reproduce(figure: str, outdir) -> list[Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for c in figure_curves(figure):
        p = out / f"{figure}_{c.name}.csv"
        write_curve(p, c.columns, c.rows)
        paths.append(p)
    return paths
