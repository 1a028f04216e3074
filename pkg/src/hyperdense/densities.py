"""Hyperbolic densities (curvature -4) on the domains used in the rate experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from . import quadrature
from .errors import DomainError
from .geometry import Disc, PuncturedSphere, SampledDomain, dist_to_set
from .mobius import MobiusMap, normalize_triple
from .rho01_table import rho01_fast

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"
MOBIUS_REDUCTION = "mobius-reduction"
OPTIMIZATION = "optimization"
BOUND = "bound"

__all__ = [
    "DensityValue",
    "TripleGeometry",
    "MobiusMap",
    "normalize_triple",
    "rho_disc",
    "rho_triple",
    "rho_pair",
    "rho01_quadrature",
    "rho01_distant_puncture",
    "rho01_lower_bound",
    "rho01_upper_reciprocal_bound",
    "rho_triple_fast",
    "triple_geometry",
    "density",
    "three_point_density",
]


@dataclass(frozen=True)
class DensityValue:
    value: float
    method: str
    error: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.value > 0:
            raise DomainError(f"density must be positive, got {self.value}")
        if self.error < 0:
            raise DomainError("error estimate must be non-negative")

    def to_dict(self) -> dict:
        out = {"density": self.value, "method": self.method, "error": self.error}
        if self.info:
            out["info"] = self.info
        return out


@dataclass(frozen=True)
class TripleGeometry:
    """Constants controlling the moving-puncture estimate on a compact set K.

    M: largest distance from K to a puncture; d: distance from K to the
    punctures; m: the smaller of d and the closest pair of punctures.
    """

    M: float
    d: float
    m: float


def triple_geometry(K, a: complex, b: complex, c: complex) -> TripleGeometry:
    K = np.atleast_1d(np.asarray(K, dtype=complex))
    punct = np.array([a, b, c], dtype=complex)
    dist = np.abs(K[:, None] - punct[None, :])
    M = float(dist.max())
    d = float(dist.min())
    gaps = [abs(a - b), abs(b - c), abs(a - c)]
    if d == 0 or min(gaps) == 0:
        raise DomainError("K must avoid the punctures and punctures must be distinct")
    return TripleGeometry(M=M, d=d, m=float(min(min(gaps), d)))


def rho_disc(z: complex, r: float = 1.0, center: complex = 0) -> DensityValue:
    """r / (r**2 - |z - center|**2), the density of a disc of radius r."""
    if not r > 0:
        raise DomainError("disc radius must be positive")
    s2 = abs(complex(z) - complex(center)) ** 2
    if s2 >= r * r:
        raise DomainError("point outside domain")
    return DensityValue(r / (r * r - s2), CLOSED_FORM, 0.0)


def rho_triple(
    a: complex,
    b: complex,
    c: complex,
    z: complex,
    rel_tol: float = quadrature.DEFAULT_REL_TOL,
    budget: int = quadrature.DEFAULT_BUDGET,
) -> DensityValue:
    """Density of the sphere punctured at finite a, b, c, via the Agard integral."""
    q = quadrature.agard_integral(a, b, c, z, rel_tol=rel_tol, budget=budget)
    value = 1.0 / q.value
    return DensityValue(
        value,
        QUADRATURE,
        value * q.rel_error,
        {"converged": q.converged, "cells": q.cells, "evaluations": q.evaluations},
    )


def _inversion_center(a: complex, b: complex, z: complex) -> complex:
    nearest = a if abs(z - a) <= abs(z - b) else b
    return 0.5 * (z + nearest)


def rho_pair(
    a: complex,
    b: complex,
    z: complex,
    rel_tol: float = quadrature.DEFAULT_REL_TOL,
    center: complex | None = None,
    budget: int = quadrature.DEFAULT_BUDGET,
) -> DensityValue:
    """Density of the plane minus {a, b} (punctures a, b, infinity).

    The inversion g(w) = 1/(w - r) sends infinity to 0 and reduces the
    problem to three finite punctures.  ``r`` defaults to the midpoint
    between z and the nearer puncture; a user-supplied centre that is too
    close to z, a or b is replaced by that default.
    """
    a, b, z = complex(a), complex(b), complex(z)
    if a == b:
        raise DomainError("punctures must be distinct")
    if z in (a, b):
        raise DomainError("point outside domain")
    scale = min(abs(z - a), abs(z - b))
    r = _inversion_center(a, b, z)
    if center is not None:
        center = complex(center)
        if min(abs(center - a), abs(center - b), abs(center - z)) > 1e-3 * scale:
            r = center
    g = MobiusMap(0j, 1 + 0j, 1 + 0j, -r)
    inner = rho_triple(g(a), g(b), 0j, g(z), rel_tol=rel_tol, budget=budget)
    jac = 1.0 / abs(z - r) ** 2
    info = dict(inner.info, center=[r.real, r.imag])
    return DensityValue(inner.value * jac, MOBIUS_REDUCTION, inner.error * jac, info)


def rho01_quadrature(w: complex, rel_tol: float = quadrature.DEFAULT_REL_TOL) -> DensityValue:
    """rho_{0,1,inf}(w) by the inversion reduction."""
    return rho_pair(0j, 1 + 0j, w, rel_tol=rel_tol)


def rho01_distant_puncture(
    w: complex, moduli=(1e4, 1e6, 1e8), rel_tol: float = 1e-11, direction: complex = -1
) -> float:
    """rho_{0,1}(w) as the limit of rho_{0,1,c}(w) for a receding third puncture.

    The values at |c| in ``moduli`` are extrapolated to 1/|c| = 0 with the
    interpolating polynomial in 1/|c|.  This path never uses the inversion
    reduction, so it serves as an independent check of ``rho_pair``.
    """
    direction = complex(direction) / abs(direction)
    h = np.array([1.0 / m for m in moduli])
    vals = np.array(
        [rho_triple(0j, 1 + 0j, m * direction, w, rel_tol=rel_tol).value for m in moduli]
    )
    coef = np.polyfit(h, vals, len(h) - 1)
    return float(coef[-1])


def rho01_lower_bound(w: complex) -> DensityValue:
    """1 / (2 s log s + 10 s) with s = |w| > 1."""
    s = abs(complex(w))
    if not s > 1:
        raise DomainError("lower bound is stated for |w| > 1 only")
    return DensityValue(1.0 / (2.0 * s * math.log(s) + 10.0 * s), BOUND, 0.0)


def rho01_upper_reciprocal_bound(w: complex) -> float:
    """17 |w| log(1/|w|), an upper bound for 1/rho_{0,1}(w) when 0 < |w| < 1/2."""
    s = abs(complex(w))
    if not 0 < s < 0.5:
        raise DomainError("reciprocal bound is stated for 0 < |w| < 1/2 only")
    return 17.0 * s * math.log(1.0 / s)


def rho_triple_fast(a, b, c, z):
    """Vectorised rho_{a,b,c}(z) through the normalising map and the rho_{0,1} table."""
    a, b, c, z = (np.asarray(x, dtype=complex) for x in (a, b, c, z))
    w = (z - c) * (a - b) / ((z - b) * (a - c))
    jac = np.abs((a - b) * (b - c)) / np.abs((a - c) * (z - b) ** 2)
    return rho01_fast(w) * jac


def density(U, z: complex, rel_tol: float = quadrature.DEFAULT_REL_TOL) -> DensityValue:
    """Hyperbolic density of a domain with a known evaluator."""
    z = complex(z)
    if isinstance(U, Disc):
        return rho_disc(z - U.center, U.radius)
    if isinstance(U, PuncturedSphere):
        if not bool(U.contains(z)):
            raise DomainError("point outside domain")
        p = U.punctures
        if len(p) == 3 and not U.infinity:
            return rho_triple(*p, z, rel_tol=rel_tol)
        if len(p) == 2 and U.infinity:
            return rho_pair(*p, z, rel_tol=rel_tol)
        raise DomainError("only thrice-punctured spheres have an evaluator")
    raise DomainError(f"no hyperbolic density evaluator for {U.kind} domains")


# ---------------------------------------------------------------------------
# three-point density


def _boundary_param(U):
    """Return (curves, lengths) parametrising a bounded domain's boundary."""
    if isinstance(U, (Disc, SampledDomain)):
        curves = U.curves()
        lengths = [2 * math.pi * c.radius if hasattr(c, "radius") else c.length for c in curves]
        return curves, lengths
    raise DomainError("three-point search needs a bounded domain with a boundary curve")


def _allocate(n: int, lengths) -> list:
    total = sum(lengths)
    counts = [max(3, int(round(n * L / total))) for L in lengths]
    return counts


def three_point_density(
    U,
    z: complex,
    budget: int = 400_000,
    n_samples: int = 48,
    rel_tol: float = 1e-6,
    offset: float = 0.0,
    refine_top: int = 3,
) -> DensityValue:
    """Best rho_{a,b,c}(z) over punctures a, b, c on the boundary of U.

    A coarse pass scores every triple of ``n_samples`` boundary samples with
    the tabulated evaluator; the ``refine_top`` best triples are then moved
    along the boundary with Nelder-Mead, and the winner is re-evaluated by
    quadrature.  The result is a lower bound for the three-point density.
    ``budget`` caps the number of tabulated evaluations.
    """
    z = complex(z)
    if not bool(U.contains(z)):
        raise DomainError("point outside domain")

    if isinstance(U, PuncturedSphere):
        if U.infinity:
            raise DomainError("three-point search needs a bounded boundary")
        pts = np.array(U.punctures)
        idx = np.array(list(combinations(range(len(pts)), 3)))
        vals = rho_triple_fast(pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]], z)
        best = idx[int(np.argmax(vals))]
        a, b, c = pts[best]
        final = rho_triple(a, b, c, z, rel_tol=rel_tol)
        return _three_point_value(final, (a, b, c), len(idx), False)

    curves, lengths = _boundary_param(U)
    counts = _allocate(n_samples, lengths)
    owner = np.concatenate([np.full(k, i) for i, k in enumerate(counts)])
    tpar = np.concatenate([(np.arange(k) + offset) / k for k in counts])
    samples = np.concatenate([curves[i].at(tpar[owner == i]) for i in range(len(curves))])

    diam = U.diameter
    idx = np.array(list(combinations(range(len(samples)), 3)))
    pa, pb, pc = samples[idx[:, 0]], samples[idx[:, 1]], samples[idx[:, 2]]
    gap = np.minimum(np.minimum(np.abs(pa - pb), np.abs(pb - pc)), np.abs(pa - pc))
    ok = gap >= 1e-3 * diam
    exhausted = False
    limit = budget
    if ok.sum() > limit:
        exhausted = True
        ok &= np.cumsum(ok) <= limit
    vals = np.full(len(idx), -np.inf)
    live = np.nonzero(ok)[0]
    for s in range(0, len(live), 50_000):
        sel = live[s : s + 50_000]
        vals[sel] = rho_triple_fast(pa[sel], pb[sel], pc[sel], z)
    used = len(live)

    # argsort is stable, so ties keep lexicographic index order
    order = np.argsort(-vals, kind="stable")[: max(1, refine_top)]
    best_val, best_t = -np.inf, None
    coarse_best = float(vals[order[0]])
    per_start = max(0, (budget - used) // max(1, len(order)))
    for k in order:
        trip = idx[k]
        owners = owner[trip]
        t0 = tpar[trip]

        def objective(t, owners=owners):
            pts = [curves[o].at(ti) for o, ti in zip(owners, t)]
            g = min(abs(pts[0] - pts[1]), abs(pts[1] - pts[2]), abs(pts[0] - pts[2]))
            if g < 1e-3 * diam:
                return 0.0
            return -float(rho_triple_fast(pts[0], pts[1], pts[2], z))

        if per_start >= 10:
            res = minimize(
                objective,
                t0,
                method="Nelder-Mead",
                options={"maxfev": int(per_start), "xatol": 1e-9, "fatol": 1e-13},
            )
            used += int(res.nfev)
            t_best, v_best = res.x, -float(res.fun)
            if not res.success:
                exhausted = True
        else:
            t_best, v_best = t0, float(vals[k])
        if v_best > best_val:
            best_val, best_t, best_owners = v_best, t_best, owners

    a, b, c = (complex(curves[o].at(t)) for o, t in zip(best_owners, best_t))
    final = rho_triple(a, b, c, z, rel_tol=rel_tol)
    out = _three_point_value(final, (a, b, c), used, exhausted)
    out.info["coarse_best"] = coarse_best
    out.info["samples"] = int(len(samples))
    return out


def _three_point_value(final: DensityValue, triple, evaluations, exhausted) -> DensityValue:
    a, b, c = triple
    gap = min(abs(a - b), abs(b - c), abs(a - c))
    info = {
        "lower_bound": True,
        "triple": [[p.real, p.imag] for p in triple],
        "min_gap": gap,
        "evaluations": int(evaluations),
        "budget_exhausted": bool(exhausted),
    }
    return DensityValue(final.value, OPTIMIZATION, final.error, info)
