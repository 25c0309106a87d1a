"""Dense primal-dual interior point method for small cone programs.

Solves

    minimize    c^T x
    subject to  G x + s = h,   A x = b,   s in K

where ``K`` is a nonnegative orthant of dimension ``n_lin`` followed by at
most one second-order cone ``{(u0, u1) : u0 >= ||u1||}`` of dimension
``soc_dim``. Steps use Nesterov-Todd scaling with a Mehrotra
predictor-corrector. Everything is dense; the reduced Newton system has the
size of ``x``, which is a few hundred to a couple of thousand here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse



@dataclass(frozen=True)
class ConeProgram:
    c: np.ndarray
    g: np.ndarray
    h: np.ndarray
    a: np.ndarray
    b: np.ndarray
    n_lin: int
    soc_dim: int = 0

    def __post_init__(self):
        if self.g.shape[0] != self.n_lin + self.soc_dim:
            raise ValueError("rows of G must equal n_lin + soc_dim")
        if self.soc_dim == 1:
            raise ValueError("a second-order cone needs dimension >= 2")


@dataclass(frozen=True)
class ConeSolution:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    y: np.ndarray
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Cone:
    """Jordan algebra helpers for R^l_+ x Q^q."""

    def __init__(self, n_lin: int, soc_dim: int):
        self.l = n_lin
        self.q = soc_dim
        self.degree = n_lin + (1 if soc_dim else 0)

    def e(self) -> np.ndarray:
        v = np.zeros(self.l + self.q)
        v[: self.l] = 1.0
        if self.q:
            v[self.l] = 1.0
        return v

    def prod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        l = self.l
        out[:l] = u[:l] * v[:l]
        if self.q:
            u0, u1, v0, v1 = u[l], u[l + 1 :], v[l], v[l + 1 :]
            out[l] = u0 * v0 + u1 @ v1
            out[l + 1 :] = u0 * v1 + v0 * u1
        return out

    def div(self, lam: np.ndarray, d: np.ndarray) -> np.ndarray:
        """``u`` with ``lam o u = d``."""
        out = np.empty_like(d)
        l = self.l
        out[:l] = d[:l] / lam[:l]
        if self.q:
            l0, l1, d0, d1 = lam[l], lam[l + 1 :], d[l], d[l + 1 :]
            u0 = (l0 * d0 - l1 @ d1) / (l0 * l0 - l1 @ l1)
            out[l] = u0
            out[l + 1 :] = (d1 - u0 * l1) / l0
        return out

    def soc_det(self, u: np.ndarray) -> float:
        l = self.l
        u0, u1 = u[l], u[l + 1 :]
        n1 = float(np.linalg.norm(u1))
        return (u0 - n1) * (u0 + n1)

    def interior_margin(self, u: np.ndarray) -> float:
        """Smallest 'eigenvalue' of ``u``; positive iff ``u`` is interior."""
        m = float(u[: self.l].min()) if self.l else math.inf
        if self.q:
            l = self.l
            m = min(m, float(u[l] - np.linalg.norm(u[l + 1 :])))
        return m

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        """Largest ``alpha`` keeping ``u + alpha du`` in the cone."""
        alpha = math.inf
        l = self.l
        if l:
            neg = du[:l] < 0
            if neg.any():
                alpha = float(np.min(-u[:l][neg] / du[:l][neg]))
        if self.q:
            alpha = min(alpha, _soc_step(u[l], u[l + 1 :], du[l], du[l + 1 :]))
        return alpha


def _soc_step(x0: float, x1: np.ndarray, d0: float, d1: np.ndarray) -> float:
    # first positive root of det(x + alpha d) = qa alpha^2 + 2 qb alpha + qc
    n1 = float(np.linalg.norm(x1))
    qc = (x0 - n1) * (x0 + n1)
    qa = d0 * d0 - float(d1 @ d1)
    qb = x0 * d0 - float(x1 @ d1)
    if qa == 0.0:
        return -qc / (2.0 * qb) if qb < 0 else math.inf
    disc = qb * qb - qa * qc
    if disc < 0:
        return math.inf
    q = -(qb + math.copysign(math.sqrt(disc), qb))
    roots = [r for r in (q / qa, qc / q if q != 0 else math.inf) if r > 0]
    return min(roots, default=math.inf)


class _NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-1} s = lambda``."""

    def __init__(self, cone: _Cone, s: np.ndarray, z: np.ndarray):
        self.cone = cone
        l = cone.l
        self.dl = np.sqrt(s[:l] / z[:l])
        if cone.q:
            ss, zs = s[l:], z[l:]
            sdet = math.sqrt(cone.soc_det(s))
            zdet = math.sqrt(cone.soc_det(z))
            sb, zb = ss / sdet, zs / zdet
            gamma = math.sqrt((1.0 + sb @ zb) / 2.0)
            wb = np.empty_like(sb)
            wb[0] = (sb[0] + zb[0]) / (2 * gamma)
            wb[1:] = (sb[1:] - zb[1:]) / (2 * gamma)
            # wb is the scaling point; W uses its Jordan square root
            v = wb.copy()
            v[0] += 1.0
            self.wb = v / math.sqrt(2.0 * (wb[0] + 1.0))
            self.eta = math.sqrt(sdet / zdet)

    def _soc_apply(self, v: np.ndarray, inverse: bool) -> np.ndarray:
        # W = eta (2 w w^T - J), W^{-1} = (2 J w w^T J - J) / eta
        w = self.wb.copy()
        if inverse:
            w[1:] = -w[1:]
        jv = v.copy()
        jv[1:] = -jv[1:]
        out = 2.0 * w * (w @ v) - jv
        return out / self.eta if inverse else out * self.eta

    def apply(self, v: np.ndarray, inverse: bool = False) -> np.ndarray:
        l = self.cone.l
        out = np.empty_like(v)
        out[:l] = v[:l] / self.dl if inverse else v[:l] * self.dl
        if self.cone.q:
            out[l:] = self._soc_apply(v[l:], inverse)
        return out



def solve_cone_program(
    prog: ConeProgram,
    tol: float = 1e-8,
    max_iters: int = 100,
    step_fraction: float = 0.99,
    refine_steps: int = 2,
    trace: Optional[list] = None,
) -> ConeSolution:
    """Primal-dual path following with Mehrotra correction.

    ``status`` is ``"optimal"`` when relative residuals and the relative
    duality gap fall below ``tol``. When progress stalls first (finite
    precision), the best iterate is returned with status ``"inaccurate"``
    if its residuals are within ``sqrt(tol)``, else ``"failed"``;
    ``"max_iters"`` marks an exhausted iteration budget. Per-iteration
    residuals are appended to ``trace`` when given.
    """
    c, g, h, a, b = prog.c, prog.g, prog.h, prog.a, prog.b
    cone = _Cone(prog.n_lin, prog.soc_dim)
    nx, ny, nc = c.size, b.size, h.size
    e = cone.e()
    l = cone.l

    # constant pieces of G^T W^{-2} G
    g_lin = scipy.sparse.csr_matrix(g[:l])
    g_soc = g[l:]
    soc_gram = g_soc.T @ g_soc if cone.q else None

    def factor(scaling: _NTScaling):
        hmat = (g_lin.T @ scipy.sparse.diags(scaling.dl**-2) @ g_lin).toarray()
        if cone.q:
            # W^{-1} = (2 u u^T - J) / eta with u = J v; (2uu^T - J)^2 expands to
            # I + 4 (u.u) u u^T - 2 u (J u)^T - 2 (J u) u^T
            u = scaling.wb.copy()
            u[1:] = -u[1:]
            ju = scaling.wb
            gu, gju = g_soc.T @ u, g_soc.T @ ju
            hmat += (
                soc_gram + 4.0 * (u @ u) * np.outer(gu, gu) - 2.0 * np.outer(gu, gju) - 2.0 * np.outer(gju, gu)
            ) / scaling.eta**2
        reg = 1e-14 * max(1.0, float(np.abs(np.diag(hmat)).max()))
        hmat[np.diag_indices(nx)] += reg
        cf = scipy.linalg.cho_factor(hmat, check_finite=False)
        hinv_at = scipy.linalg.cho_solve(cf, a.T, check_finite=False) if ny else None
        schur = scipy.linalg.lu_factor(a @ hinv_at) if ny else None
        return cf, hinv_at, schur

    def w2inv(scaling, v):
        return scaling.apply(scaling.apply(v, inverse=True), inverse=True)

    def reduced(fac, scaling, r1, r2, r3):
        # G^T dz + A^T dy = r1 ; A dx = r2 ; G dx - W^2 dz = r3
        cf, hinv_at, schur = fac
        rhs = r1 + g.T @ w2inv(scaling, r3)
        hinv_rhs = scipy.linalg.cho_solve(cf, rhs, check_finite=False)
        if ny:
            dy = scipy.linalg.lu_solve(schur, a @ hinv_rhs - r2)
            dx = hinv_rhs - hinv_at @ dy
        else:
            dy = np.zeros(0)
            dx = hinv_rhs
        dz = w2inv(scaling, g @ dx - r3)
        return dx, dy, dz

    def solve_kkt(fac, scaling, r1, r2, r3):
        dx, dy, dz = reduced(fac, scaling, r1, r2, r3)
        for _ in range(refine_steps):
            e1 = r1 - g.T @ dz - a.T @ dy
            e2 = r2 - a @ dx
            e3 = r3 - g @ dx + scaling.apply(scaling.apply(dz))
            cx, cy, cz = reduced(fac, scaling, e1, e2, e3)
            dx, dy, dz = dx + cx, dy + cy, dz + cz
        return dx, dy, dz

    # starting point: least-squares x, then push s and z into the cone
    kkt = np.block([[g.T @ g, a.T], [a, np.zeros((ny, ny))]])
    sol = np.linalg.lstsq(kkt, np.concatenate([g.T @ h, b]), rcond=None)[0]
    x = sol[:nx]
    s = h - g @ x
    zy = np.linalg.lstsq(np.hstack([g.T, a.T]), -c, rcond=None)[0]
    z, y = zy[:nc], zy[nc:]
    for v in (s, z):
        margin = cone.interior_margin(v)
        if margin <= 0:
            v += (1.0 - margin) * e

    h_norm = max(1.0, float(np.linalg.norm(h)), float(np.linalg.norm(b)))
    c_norm = max(1.0, float(np.linalg.norm(c)))
    status = "max_iters"
    best = None
    stall = tiny_steps = 0
    it = 0
    for it in range(1, max_iters + 1):
        rx = g.T @ z + a.T @ y + c
        ry = a @ x - b
        rz = g @ x + s - h
        gap = float(s @ z)
        mu = gap / cone.degree
        pobj, dobj = float(c @ x), float(-h @ z - b @ y)
        pres = max(float(np.linalg.norm(rz)), float(np.linalg.norm(ry)) if ny else 0.0) / h_norm
        dres = float(np.linalg.norm(rx)) / c_norm
        rel_gap = gap / max(1.0, min(abs(pobj), abs(dobj)))
        merit = max(pres, dres, rel_gap)
        if trace is not None:
            trace.append({"pres": pres, "dres": dres, "gap": gap, "pobj": pobj, "dobj": dobj})
        if not math.isfinite(merit):
            status = "stalled"
            break
        if best is None or merit < 0.99 * best[0]:
            stall = 0
        else:
            stall += 1
        if best is None or merit < best[0]:
            best = (merit, x, s, z, y, pres, dres, gap)
        if merit <= tol:
            status = "optimal"
            break
        if stall >= 8 or tiny_steps >= 3:
            status = "stalled"
            break

        try:
            with np.errstate(all="raise"):
                scaling = _NTScaling(cone, s, z)
                lam = scaling.apply(z)
                lam_sq = cone.prod(lam, lam)
                fac = factor(scaling)

                def direction(d):
                    # complementarity rhs d = lambda o (W^{-1} ds + W dz)
                    ld = cone.div(lam, d)
                    dx, dy, dz = solve_kkt(fac, scaling, -rx, -ry, -rz - scaling.apply(ld))
                    ds = scaling.apply(ld - scaling.apply(dz))
                    return dx, dy, dz, ds

                dxa, dya, dza, dsa = direction(-lam_sq)
                alpha_a = min(1.0, cone.max_step(s, dsa), cone.max_step(z, dza))
                mu_a = float((s + alpha_a * dsa) @ (z + alpha_a * dza)) / cone.degree
                sigma = min(1.0, max(0.0, mu_a / mu)) ** 3
                ws_a = scaling.apply(dsa, inverse=True)
                wz_a = scaling.apply(dza)
                d = -lam_sq - cone.prod(ws_a, wz_a) + sigma * mu * e
                dx, dy, dz, ds = direction(d)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError, ZeroDivisionError):
            status = "stalled"
            break
        alpha = min(1.0, step_fraction * cone.max_step(s, ds), step_fraction * cone.max_step(z, dz))
        if trace is not None:
            trace[-1].update(alpha=alpha, sigma=sigma)
        tiny_steps = tiny_steps + 1 if alpha < 1e-10 else 0
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds

    merit, x, s, z, y, pres, dres, gap = best
    if status == "stalled":
        status = "inaccurate" if merit <= math.sqrt(tol) else "failed"
    return ConeSolution(
        x=x, s=s, z=z, y=y, status=status, iterations=it,
        primal_residual=pres, dual_residual=dres, gap=gap,
    )
