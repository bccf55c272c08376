"""Small dense conic QP solver based on operator splitting (ADMM).

Solves::

    minimize    1/2 x'Px + q'x
    subject to  A x = z,  z in C

where C is a product of row blocks, each either a fixed value (equality
rows) or the intersection of a Euclidean ball and a circular cone with
apex at the origin. Iterates follow the OSQP scheme: a cached Cholesky
factor of ``P + sigma I + A' R A`` for the linear step, exact projections
for the set step, over-relaxation and adaptive step size. The problem is
equilibrated (Ruiz) with row scaling kept constant inside every set
block so ball and cone shapes are preserved.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"


@dataclass
class FixedBlock:
    """Rows constrained to equal ``value``."""

    rows: slice
    value: np.ndarray

    def project(self, v, scale):
        return scale * self.value


@dataclass
class BallConeBlock:
    """Rows constrained to ``||v|| <= radius`` and ``axis'v >= cos(half_angle) ||v||``.

    ``radius`` may be infinite and ``axis`` may be None (no cone).
    """

    rows: slice
    radius: float = math.inf
    axis: np.ndarray | None = None
    half_angle: float = math.pi

    def project(self, v, scale):
        p = project_cone(v, self.axis, self.half_angle) if self.axis is not None else v
        r = self.radius * scale
        n = np.linalg.norm(p)
        if n > r:
            p = p * (r / n)
        return p


def project_cone(v, axis, half_angle):
    """Euclidean projection onto ``{x : axis'x >= cos(h) ||x||}`` for h <= pi/2."""
    t = float(axis @ v)
    w = v - t * axis
    nw = float(np.linalg.norm(w))
    ch, sh = math.cos(half_angle), math.sin(half_angle)
    if nw * ch <= t * sh:
        return v
    if t * ch + nw * sh <= 0:
        return np.zeros_like(v)
    d = ch * axis + sh * (w / nw)
    return (t * ch + nw * sh) * d


@dataclass
class ADMMState:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    rho: float


@dataclass
class ADMMResult:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    iterations: int
    status: Status
    prim_res: float
    dual_res: float
    polished: bool
    rho: float


class ADMMSolver:
    sigma = 1e-6
    alpha = 1.6
    rho_eq_factor = 1e3
    check_every = 5
    adapt_every = 50
    ruiz_iters = 15

    def __init__(self, eps_abs=1e-6, eps_rel=1e-6, max_iter=20_000):
        self.eps_abs = eps_abs
        self.eps_rel = eps_rel
        self.max_iter = max_iter

    # -- scaling ---------------------------------------------------------
    def _equilibrate(self, P, q, A, blocks):
        n, m = P.shape[0], A.shape[0]
        D, E, c = np.ones(n), np.ones(m), 1.0
        P, q, A = P.copy(), q.copy(), A.copy()
        for _ in range(self.ruiz_iters):
            col = np.maximum(np.abs(P).max(axis=0), np.abs(A).max(axis=0))
            dD = 1.0 / np.sqrt(np.where(col > 1e-8, col, 1.0))
            row = np.abs(A).max(axis=1)
            dE = 1.0 / np.sqrt(np.where(row > 1e-8, row, 1.0))
            for blk in blocks:
                if isinstance(blk, BallConeBlock):
                    dE[blk.rows] = math.exp(np.mean(np.log(dE[blk.rows])))
            P = dD[:, None] * P * dD[None, :]
            A = dE[:, None] * A * dD[None, :]
            q = dD * q
            D *= dD
            E *= dE
            mean_col = np.abs(P).max(axis=0).mean()
            g = max(mean_col, np.abs(q).max(initial=0.0))
            g = 1.0 / g if g > 1e-8 else 1.0
            P *= g
            q *= g
            c *= g
        return P, q, A, D, E, c

    # -- main loop -------------------------------------------------------
    def solve(self, P, q, A, blocks, warm: ADMMState | None = None) -> ADMMResult:
        Ps, qs, As, D, E, c = self._equilibrate(P, q, A, blocks)
        n, m = Ps.shape[0], As.shape[0]
        eq_rows = np.zeros(m, dtype=bool)
        for blk in blocks:
            if isinstance(blk, FixedBlock):
                eq_rows[blk.rows] = True

        if warm is not None:
            x = warm.x / D
            z = warm.z * E
            y = warm.y / E * c
            rho = warm.rho
        else:
            x, z, y, rho = np.zeros(n), np.zeros(m), np.zeros(m), 0.1

        def rho_vec(r):
            return np.where(eq_rows, r * self.rho_eq_factor, r)

        def factor(r):
            R = rho_vec(r)
            K = Ps + self.sigma * np.eye(n) + As.T @ (R[:, None] * As)
            return cho_factor(K), R

        def project(v):
            out = np.empty_like(v)
            for blk in blocks:
                out[blk.rows] = blk.project(v[blk.rows], E[blk.rows][0] if isinstance(blk, BallConeBlock) else E[blk.rows])
            return out

        fac, R = factor(rho)
        status = Status.MAX_ITERS
        it = 0
        pr = dr = math.inf
        for it in range(1, self.max_iter + 1):
            xt = cho_solve(fac, self.sigma * x - qs + As.T @ (R * z - y))
            zt = As @ xt
            x = self.alpha * xt + (1 - self.alpha) * x
            zr = self.alpha * zt + (1 - self.alpha) * z
            z_new = project(zr + y / R)
            y = y + R * (zr - z_new)
            z = z_new

            if it % self.check_every == 0 or it == self.max_iter:
                Ax = As @ x
                Px = Ps @ x
                Aty = As.T @ y
                pr = np.abs((Ax - z) / E).max(initial=0.0)
                dr = np.abs((Px + qs + Aty) / D).max(initial=0.0) / c
                ep = self.eps_abs + self.eps_rel * max(np.abs(Ax / E).max(initial=0.0), np.abs(z / E).max(initial=0.0))
                ed = self.eps_abs + self.eps_rel * max(
                    np.abs(Px / D).max(initial=0.0),
                    np.abs(Aty / D).max(initial=0.0),
                    np.abs(qs / D).max(initial=0.0),
                ) / c
                if pr <= ep and dr <= ed:
                    status = Status.OPTIMAL
                    break
                if it % self.adapt_every == 0:
                    sp = np.abs(As @ x - z).max(initial=0.0) / max(np.abs(Ax).max(initial=0.0), np.abs(z).max(initial=0.0), 1e-12)
                    sd = np.abs(Px + qs + Aty).max(initial=0.0) / max(
                        np.abs(Px).max(initial=0.0), np.abs(Aty).max(initial=0.0), np.abs(qs).max(initial=0.0), 1e-12
                    )
                    new_rho = float(np.clip(rho * math.sqrt(sp / max(sd, 1e-30)), 1e-6, 1e6))
                    if new_rho > 5 * rho or new_rho < 0.2 * rho:
                        rho = new_rho
                        fac, R = factor(rho)

        x_u, z_u, y_u = D * x, z / E, E * y / c
        return ADMMResult(x_u, z_u, y_u, it, status, float(pr), float(dr), False, rho)
