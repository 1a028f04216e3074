"""Adaptive cubature for the Agard integral over the whole plane.

The integrand

    F(w) = |(z-a)(z-b)(z-c)| / |(w-a)(w-b)(w-c)(w-z)|

has four integrable poles of modulus order one and decays like |w|**-4.
The plane is covered by a smooth partition of unity:

* a polar chart around each pole, where the Jacobian ``r`` cancels the
  pole and the integrand becomes smooth in ``(r, theta)``;
* a far chart in the inverted radial variable ``s = 1/|w - center|``, where
  the integrand behaves like ``s`` near ``s = 0``;
* a Cartesian midfield square carrying whatever weight the other charts
  leave over.

Every chart is integrated with the same adaptive tensor Gauss-Legendre
engine: each leaf cell is compared against the sum over its four children
and cells whose difference exceeds their share of the global tolerance are
split.  All reductions run in a fixed order so results are bit-for-bit
reproducible for a given tolerance and budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

GL_ORDER = 8
DEFAULT_BUDGET = 2_000_000
DEFAULT_REL_TOL = 1e-6

# inner fraction of a pole disc where the pole weight is exactly one
_CORE = 0.3

_xi, _wi = np.polynomial.legendre.leggauss(GL_ORDER)
_NODES = 0.5 * (_xi + 1.0)
_WEIGHTS = 0.5 * _wi
_W2 = np.outer(_WEIGHTS, _WEIGHTS)


@dataclass(frozen=True)
class QuadratureResult:
    """Value of ``(1/pi) * integral`` with its error bookkeeping.

    ``tail`` is the part contributed by the inverted far chart.
    ``converged`` is False when the evaluation budget ran out before the
    requested tolerance was met; the value is then the best estimate found.
    """

    value: float
    error: float
    cells: int
    tail: float
    evaluations: int
    converged: bool = True

    @property
    def rel_error(self) -> float:
        return self.error / self.value if self.value else math.inf

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "cells": self.cells,
            "tail": self.tail,
            "evaluations": self.evaluations,
            "converged": self.converged,
        }


def smooth_step(x):
    """C-infinity step: 1 for x <= 0, 0 for x >= 1."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        t = x[mid]
        f0 = np.exp(-1.0 / (1.0 - t))
        f1 = np.exp(-1.0 / t)
        out[mid] = f0 / (f0 + f1)
    return out


class _Layout:
    """Chart geometry for one configuration of poles."""

    def __init__(self, poles: np.ndarray, numerator: float):
        self.poles = poles
        self.numerator = numerator
        gaps = np.abs(poles[:, None] - poles[None, :])
        np.fill_diagonal(gaps, np.inf)
        self.nearest = gaps.min(axis=1)
        self.radii = 0.45 * self.nearest
        self.center = complex(poles.mean())
        reach = np.abs(poles - self.center) + self.radii
        self.r_inner = 1.1 * float(reach.max())
        self.r_outer = 2.0 * self.r_inner

    def pole_weight(self, k: int, w: np.ndarray) -> np.ndarray:
        t = np.abs(w - self.poles[k]) / self.radii[k]
        return smooth_step((t - _CORE) / (1.0 - _CORE))

    def far_weight(self, w: np.ndarray) -> np.ndarray:
        rho = np.abs(w - self.center)
        return 1.0 - smooth_step((rho - self.r_inner) / (self.r_outer - self.r_inner))

    # chart integrands; each takes parameter arrays and returns density*Jacobian

    def pole_chart(self, k: int):
        p = self.poles[k]
        others = np.delete(self.poles, k)
        radius = self.radii[k]

        def f(r, theta):
            w = p + r * np.exp(1j * theta)
            den = np.ones_like(r)
            for q in others:
                den = den * np.abs(w - q)
            t = r / radius
            return smooth_step((t - _CORE) / (1.0 - _CORE)) * self.numerator / den

        return f

    def far_chart(self):
        shifted = self.poles - self.center

        def f(s, theta):
            u = np.exp(-1j * theta)
            den = np.ones_like(s)
            for q in shifted:
                den = den * np.abs(1.0 - q * s * u)
            with np.errstate(divide="ignore"):
                rho = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), np.inf)
            weight = 1.0 - smooth_step(
                (rho - self.r_inner) / (self.r_outer - self.r_inner)
            )
            return weight * self.numerator * s / den

        return f

    def mid_chart(self):
        def f(x, y):
            w = x + 1j * y
            keep = 1.0 - self.far_weight(w)
            for k in range(len(self.poles)):
                keep = keep - self.pole_weight(k, w)
            keep = np.clip(keep, 0.0, 1.0)
            den = np.ones_like(x)
            for q in self.poles:
                den = den * np.abs(w - q)
            live = keep > 0.0
            out = np.zeros_like(x)
            out[live] = keep[live] * self.numerator / den[live]
            return out

        return f

    def charts(self):
        """List of (name, integrand, initial cells)."""
        out = []
        two_pi = 2.0 * math.pi
        for k in range(len(self.poles)):
            R = self.radii[k]
            cells = []
            for r0, r1 in ((0.0, _CORE * R), (_CORE * R, R)):
                for j in range(4):
                    cells.append((r0, r1, j * two_pi / 4, (j + 1) * two_pi / 4))
            out.append((f"pole{k}", self.pole_chart(k), cells))
        cells = []
        s_mid = 1.0 / self.r_outer
        for s0, s1 in ((0.0, s_mid), (s_mid, 1.0 / self.r_inner)):
            for j in range(4):
                cells.append((s0, s1, j * two_pi / 4, (j + 1) * two_pi / 4))
        out.append(("far", self.far_chart(), cells))
        cx, cy = self.center.real, self.center.imag
        L = self.r_outer
        edges = np.linspace(-L, L, 5)
        cells = [
            (cx + edges[i], cx + edges[i + 1], cy + edges[j], cy + edges[j + 1])
            for i in range(4)
            for j in range(4)
        ]
        out.append(("mid", self.mid_chart(), cells))
        return out


def _cell_values(f, rects: np.ndarray) -> np.ndarray:
    """Tensor Gauss-Legendre value of ``f`` on each rectangle (m, 4)."""
    x0, x1, y0, y1 = rects.T
    dx = (x1 - x0)[:, None]
    dy = (y1 - y0)[:, None]
    xs = x0[:, None] + dx * _NODES[None, :]
    ys = y0[:, None] + dy * _NODES[None, :]
    X = np.broadcast_to(xs[:, :, None], (len(rects), GL_ORDER, GL_ORDER))
    Y = np.broadcast_to(ys[:, None, :], (len(rects), GL_ORDER, GL_ORDER))
    vals = f(np.ascontiguousarray(X), np.ascontiguousarray(Y))
    return np.einsum("mij,ij->m", vals, _W2) * (dx[:, 0] * dy[:, 0])


def _children(rects: np.ndarray) -> np.ndarray:
    """Quadrisect each rectangle; children of cell i are rows 4i..4i+3."""
    x0, x1, y0, y1 = rects.T
    xm = 0.5 * (x0 + x1)
    ym = 0.5 * (y0 + y1)
    kids = np.stack(
        [
            np.stack([x0, xm, y0, ym], axis=1),
            np.stack([x0, xm, ym, y1], axis=1),
            np.stack([xm, x1, y0, ym], axis=1),
            np.stack([xm, x1, ym, y1], axis=1),
        ],
        axis=1,
    )
    return kids.reshape(-1, 4)


def adaptive_cubature(charts, rel_tol: float, budget: int = DEFAULT_BUDGET):
    """Integrate a sum of charts to a global relative tolerance.

    ``charts`` is a list of ``(name, f, cells)``.  Returns
    ``(total, error, leaves, evaluations, converged, per_chart_totals)``.
    """
    per_cell = GL_ORDER * GL_ORDER
    names = [c[0] for c in charts]
    funcs = [c[1] for c in charts]
    rects, coarse, fine, kid_vals, kid_rects = [], [], [], [], []
    evals = 0
    for _, f, cells in charts:
        r = np.asarray(cells, dtype=float)
        v = _cell_values(f, r)
        kr = _children(r)
        kv = _cell_values(f, kr).reshape(-1, 4)
        evals += 5 * per_cell * len(r)
        rects.append(r)
        coarse.append(v)
        kid_rects.append(kr.reshape(-1, 4, 4))
        kid_vals.append(kv)
        fine.append(kv.sum(axis=1))

    eps = np.finfo(float).eps
    converged = True
    while True:
        total = float(sum(np.sum(fv) for fv in fine))
        errs = []
        for cv, fv in zip(coarse, fine):
            diff = np.abs(cv - fv)
            diff[diff <= 64 * eps * np.abs(fv)] = 0.0
            errs.append(diff)
        err_total = float(sum(np.sum(e) for e in errs))
        n_leaves = sum(len(r) for r in rects)
        target = rel_tol * abs(total)
        if err_total <= target:
            break
        if evals >= budget:
            converged = False
            break
        share = 0.5 * target / n_leaves
        for i, f in enumerate(funcs):
            split = errs[i] > share
            if not np.any(split):
                continue
            keep = ~split
            new_rects = kid_rects[i][split].reshape(-1, 4)
            new_coarse = kid_vals[i][split].reshape(-1)
            grand = _children(new_rects)
            grand_vals = _cell_values(f, grand).reshape(-1, 4)
            evals += 4 * per_cell * len(new_rects)
            rects[i] = np.concatenate([rects[i][keep], new_rects])
            coarse[i] = np.concatenate([coarse[i][keep], new_coarse])
            kid_rects[i] = np.concatenate(
                [kid_rects[i][keep], grand.reshape(-1, 4, 4)]
            )
            kid_vals[i] = np.concatenate([kid_vals[i][keep], grand_vals])
            fine[i] = kid_vals[i].sum(axis=1)

    per_chart = {name: float(np.sum(fv)) for name, fv in zip(names, fine)}
    leaves = sum(len(r) for r in rects)
    return total, err_total, leaves, evals, converged, per_chart


def _check_points(points) -> np.ndarray:
    pts = np.array([complex(p) for p in points])
    if not np.all(np.isfinite(pts)):
        raise DomainError("punctures and evaluation point must be finite")
    gaps = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() == 0.0:
        raise DomainError("punctures and evaluation point must be pairwise distinct")
    return pts


def agard_integral(
    a: complex,
    b: complex,
    c: complex,
    z: complex,
    rel_tol: float = DEFAULT_REL_TOL,
    budget: int = DEFAULT_BUDGET,
) -> QuadratureResult:
    """Reciprocal hyperbolic density of the sphere punctured at a, b, c.

    Computes ``(1/pi) * iint_C |(z-a)(z-b)(z-c)| / |(w-a)(w-b)(w-c)(w-z)| dA(w)``
    with curvature -4 normalisation.  The budget counts integrand
    evaluations; exceeding it returns a result with ``converged=False``.
    """
    if not (0.0 < rel_tol <= 0.1):
        raise DomainError(f"rel_tol must lie in (0, 0.1], got {rel_tol}")
    pts = _check_points((a, b, c, z))
    numerator = float(np.prod(np.abs(pts[3] - pts[:3])))
    layout = _Layout(pts, numerator)
    total, err, leaves, evals, ok, per_chart = adaptive_cubature(
        layout.charts(), rel_tol, budget
    )
    return QuadratureResult(
        value=total / math.pi,
        error=err / math.pi,
        cells=leaves,
        tail=per_chart["far"] / math.pi,
        evaluations=evals,
        converged=ok,
    )
