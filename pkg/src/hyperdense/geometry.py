"""Plane sets, Euclidean distance functionals and plane domains.

Every plane set decomposes into primitives (points, circles, segments):
a polyline is a union of segments and a sample cloud a union of points.
Distances between primitives use closed forms.  The one-sided Hausdorff
term ``sup_{x in A} d(x, B)`` is closed-form whenever ``B`` is a single
primitive or ``A`` is finite; otherwise ``A`` is sampled densely, local
maxima are polished with a bounded scalar search, and a Lipschitz
tolerance (half the sample spacing) is reported with the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError

_SAMPLES_PER_PRIMITIVE = 2048


def _c(z) -> complex:
    if isinstance(z, (list, tuple)) and len(z) == 2:
        return complex(float(z[0]), float(z[1]))
    return complex(z)


def _pair(z: complex) -> list:
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# plane sets


@dataclass(frozen=True)
class Point:
    z: complex

    kind = "point"

    def primitives(self):
        return [self]

    def params(self):
        return {"z": _pair(self.z)}


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("circle radius must be positive")

    def primitives(self):
        return [self]

    def params(self):
        return {"center": _pair(self.center), "radius": self.radius}

    def at(self, t):
        return self.center + self.radius * np.exp(2j * math.pi * np.asarray(t))


@dataclass(frozen=True)
class Segment:
    p: complex
    q: complex

    kind = "segment"

    def primitives(self):
        return [self]

    def params(self):
        return {"endpoints": [_pair(self.p), _pair(self.q)]}

    def at(self, t):
        return self.p + (self.q - self.p) * np.asarray(t)


@dataclass(frozen=True)
class Polyline:
    vertices: tuple
    closed: bool = False

    kind = "polyline"

    def __post_init__(self):
        verts = tuple(_c(v) for v in self.vertices)
        if len(verts) < 2:
            raise DomainError("polyline needs at least two vertices")
        object.__setattr__(self, "vertices", verts)

    def segments(self):
        v = list(self.vertices)
        if self.closed and v[0] != v[-1]:
            v.append(v[0])
        return [Segment(v[i], v[i + 1]) for i in range(len(v) - 1)]

    def primitives(self):
        return self.segments()

    def params(self):
        return {"vertices": [_pair(v) for v in self.vertices], "closed": self.closed}

    @property
    def length(self) -> float:
        return float(sum(abs(s.q - s.p) for s in self.segments()))

    def at(self, t):
        """Point at arclength fraction ``t`` (periodic when closed)."""
        segs = self.segments()
        lengths = np.array([abs(s.q - s.p) for s in segs])
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        t = np.asarray(t, dtype=float)
        if self.closed:
            t = np.mod(t, 1.0)
        s = np.clip(t, 0.0, 1.0) * cum[-1]
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(segs) - 1)
        p = np.array([g.p for g in segs])[k]
        q = np.array([g.q for g in segs])[k]
        frac = np.where(lengths[k] > 0, (s - cum[k]) / np.where(lengths[k] > 0, lengths[k], 1), 0)
        return p + (q - p) * frac


@dataclass(frozen=True)
class Cloud:
    points: tuple

    kind = "cloud"

    def __post_init__(self):
        pts = tuple(_c(p) for p in self.points)
        if not pts:
            raise DomainError("sample cloud must be non-empty")
        object.__setattr__(self, "points", pts)

    def primitives(self):
        return [Point(p) for p in self.points]

    def params(self):
        return {"points": [_pair(p) for p in self.points]}

    def nn_gap(self) -> float:
        """Largest nearest-neighbour distance inside the cloud."""
        pts = np.array(self.points)
        if len(pts) < 2:
            return 0.0
        d = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min(axis=1).max())


PlaneSet = Union[Point, Circle, Segment, Polyline, Cloud]
SetLike = Union[PlaneSet, Sequence[PlaneSet]]

_KINDS = {"point": Point, "circle": Circle, "segment": Segment, "polyline": Polyline, "cloud": Cloud}


def set_to_json(s: PlaneSet) -> dict:
    return {"kind": s.kind, "params": s.params()}


def set_from_json(obj: dict) -> PlaneSet:
    kind = obj.get("kind")
    p = obj.get("params", {})
    if kind == "point":
        return Point(_c(p["z"]))
    if kind == "circle":
        return Circle(_c(p["center"]), float(p["radius"]))
    if kind == "segment":
        a, b = p["endpoints"]
        return Segment(_c(a), _c(b))
    if kind == "polyline":
        return Polyline(tuple(_c(v) for v in p["vertices"]), bool(p.get("closed", False)))
    if kind in ("cloud", "sample-cloud"):
        return Cloud(tuple(_c(v) for v in p["points"]))
    raise DomainError(f"unknown plane set kind {kind!r}")


def _as_list(s: SetLike) -> list:
    if isinstance(s, (Point, Circle, Segment, Polyline, Cloud)):
        return [s]
    out = list(s)
    if not out:
        raise DomainError("empty set")
    return out


def _primitives(s: SetLike) -> list:
    return [p for part in _as_list(s) for p in part.primitives()]


# ---------------------------------------------------------------------------
# distances from points


def _dist_point_segment(z, p: complex, q: complex):
    z = np.asarray(z, dtype=complex)
    d = q - p
    L2 = abs(d) ** 2
    if L2 == 0:
        return np.abs(z - p)
    t = np.clip(((z - p) * np.conj(d)).real / L2, 0.0, 1.0)
    return np.abs(z - (p + t * d))


def _dist_to_primitive(z, prim):
    z = np.asarray(z, dtype=complex)
    if isinstance(prim, Point):
        return np.abs(z - prim.z)
    if isinstance(prim, Circle):
        return np.abs(np.abs(z - prim.center) - prim.radius)
    return _dist_point_segment(z, prim.p, prim.q)


def dist_to_set(z, s: SetLike):
    """Exact Euclidean distance from point(s) ``z`` to a plane set."""
    z = np.asarray(z, dtype=complex)
    prims = _primitives(s)
    pts = [p.z for p in prims if isinstance(p, Point)]
    out = np.full(z.shape, np.inf)
    if pts:
        arr = np.array(pts)
        flat = z.reshape(-1)
        best = np.empty(flat.shape)
        for i in range(0, flat.size, 4096):
            chunk = flat[i : i + 4096]
            best[i : i + 4096] = np.abs(chunk[:, None] - arr[None, :]).min(axis=1)
        out = np.minimum(out, best.reshape(z.shape))
    for p in prims:
        if not isinstance(p, Point):
            out = np.minimum(out, _dist_to_primitive(z, p))
    return out


# ---------------------------------------------------------------------------
# primitive pair distances (closed forms)


def _segments_intersect(a: Segment, b: Segment) -> bool:
    def cross(o, u, v):
        return ((u - o).conjugate() * (v - o)).imag

    d1 = cross(b.p, b.q, a.p)
    d2 = cross(b.p, b.q, a.q)
    d3 = cross(a.p, a.q, b.p)
    d4 = cross(a.p, a.q, b.q)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 != 0 and d3 * d4 != 0:
        return True
    # collinear or touching cases reduce to endpoint distances being zero
    return False


def _pair_distance(a, b) -> float:
    if isinstance(a, Point):
        return float(_dist_to_primitive(a.z, b))
    if isinstance(b, Point):
        return float(_dist_to_primitive(b.z, a))
    if isinstance(a, Circle) and isinstance(b, Circle):
        D = abs(a.center - b.center)
        big, small = max(a.radius, b.radius), min(a.radius, b.radius)
        if D + small <= big:
            return big - small - D
        return max(0.0, D - a.radius - b.radius)
    if isinstance(a, Segment) and isinstance(b, Circle):
        a, b = b, a
    if isinstance(a, Circle) and isinstance(b, Segment):
        dmin = float(_dist_point_segment(a.center, b.p, b.q))
        dmax = max(abs(b.p - a.center), abs(b.q - a.center))
        if dmin <= a.radius <= dmax:
            return 0.0
        return dmin - a.radius if a.radius < dmin else a.radius - dmax
    if _segments_intersect(a, b):
        return 0.0
    return float(
        min(
            _dist_point_segment(a.p, b.p, b.q),
            _dist_point_segment(a.q, b.p, b.q),
            _dist_point_segment(b.p, a.p, a.q),
            _dist_point_segment(b.q, a.p, a.q),
        )
    )


def set_distance(A: SetLike, B: SetLike) -> float:
    """d(A, B) = inf of |z - w| over z in A, w in B."""
    pa, pb = _primitives(A), _primitives(B)
    pts_a = np.array([p.z for p in pa if isinstance(p, Point)])
    pts_b = np.array([p.z for p in pb if isinstance(p, Point)])
    best = math.inf
    if len(pts_a) and len(pts_b):
        for i in range(0, len(pts_a), 2048):
            best = min(best, float(np.abs(pts_a[i : i + 2048, None] - pts_b[None, :]).min()))
    others_b = [p for p in pb if not isinstance(p, Point)]
    others_a = [p for p in pa if not isinstance(p, Point)]
    if len(pts_a) and others_b:
        best = min(best, float(dist_to_set(pts_a, others_b).min()))
    if len(pts_b) and others_a:
        best = min(best, float(dist_to_set(pts_b, others_a).min()))
    for a in others_a:
        for b in others_b:
            best = min(best, _pair_distance(a, b))
    return best


# ---------------------------------------------------------------------------
# one-sided Hausdorff terms


def _sup_closed_form(a, b):
    """sup_{x in a} d(x, b) for primitives, or None if no closed form."""
    if isinstance(a, Point):
        return float(_dist_to_primitive(a.z, b))
    if isinstance(a, Segment):
        cands = [a.p, a.q]
        if isinstance(b, Circle):
            d = a.q - a.p
            L2 = abs(d) ** 2
            if L2 > 0:
                t = min(1.0, max(0.0, ((b.center - a.p) * d.conjugate()).real / L2))
                cands.append(a.p + t * d)
        return float(np.max(_dist_to_primitive(np.array(cands), b)))
    # a is a circle
    if isinstance(b, Point):
        return abs(b.z - a.center) + a.radius
    if isinstance(b, Circle):
        D = abs(a.center - b.center)
        return max(D + a.radius - b.radius, b.radius - abs(D - a.radius))
    # circle vs segment: critical points of each distance regime plus regime borders
    c, r = a.center, a.radius
    d = b.q - b.p
    cands = []
    for e in (b.p, b.q):
        u = c - e
        cands.append(c + r * (u / abs(u)) if abs(u) > 0 else c + r)
    if abs(d) > 0:
        n = 1j * d / abs(d)
        cands += [c + r * n, c - r * n]
        tdir = d / abs(d)
        for e in (b.p, b.q):
            # circle points whose projection onto the segment line is the endpoint e
            off = ((e - c) * tdir.conjugate()).real
            if abs(off) <= r:
                h = math.sqrt(max(r * r - off * off, 0.0))
                cands += [c + off * tdir + h * n, c + off * tdir - h * n]
    return float(np.max(_dist_to_primitive(np.array(cands), b)))


def _sample_prim(a, n):
    t = (np.arange(n) + 0.5) / n if isinstance(a, Circle) else np.linspace(0.0, 1.0, n)
    if isinstance(a, Circle):
        spacing = 2 * math.pi * a.radius / n
    else:
        spacing = abs(a.q - a.p) / max(n - 1, 1)
    return t, a.at(t), spacing


def _sup_sampled(a, B_prims, n=_SAMPLES_PER_PRIMITIVE):
    t, pts, spacing = _sample_prim(a, n)
    vals = dist_to_set(pts, B_prims)
    best = float(vals.max())
    dt = 1.0 / n if isinstance(a, Circle) else 1.0 / max(n - 1, 1)
    order = np.argsort(-vals, kind="stable")[:4]
    for i in order:
        lo, hi = t[i] - dt, t[i] + dt
        if not isinstance(a, Circle):
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        res = minimize_scalar(
            lambda s: -float(dist_to_set(a.at(s), B_prims)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best, 0.5 * spacing


def directed_hausdorff(A: SetLike, B: SetLike):
    """(sup_{x in A} d(x, B), tolerance)."""
    pa, pb = _primitives(A), _primitives(B)
    pts = np.array([p.z for p in pa if isinstance(p, Point)])
    best, tol = 0.0, 0.0
    if len(pts):
        best = float(dist_to_set(pts, pb).max())
    for a in pa:
        if isinstance(a, Point):
            continue
        if len(pb) == 1:
            v = _sup_closed_form(a, pb[0])
        else:
            v, t = _sup_sampled(a, pb)
            tol = max(tol, t)
        best = max(best, v)
    return best, tol


@dataclass(frozen=True)
class HausdorffResult:
    value: float
    tolerance: float

    def to_dict(self):
        return {"hausdorff": self.value, "tolerance": self.tolerance}


def _cloud_gap(s: SetLike) -> float:
    return max((p.nn_gap() for p in _as_list(s) if isinstance(p, Cloud)), default=0.0)


def hausdorff_report(A: SetLike, B: SetLike) -> HausdorffResult:
    """Hausdorff distance with its sampling tolerance.

    The tolerance combines the Lipschitz bound of any sampled supremum with
    the largest nearest-neighbour gap of any sample cloud involved.
    """
    ab, t1 = directed_hausdorff(A, B)
    ba, t2 = directed_hausdorff(B, A)
    tol = max(t1, t2, _cloud_gap(A), _cloud_gap(B))
    return HausdorffResult(max(ab, ba), tol)


def hausdorff_distance(A: SetLike, B: SetLike) -> float:
    return hausdorff_report(A, B).value


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    kind = "disc"

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not self.radius > 0:
            raise DomainError("disc radius must be positive")

    def boundary(self):
        return [Circle(self.center, self.radius)]

    def contains(self, z):
        return np.abs(np.asarray(z, dtype=complex) - self.center) < self.radius

    def dist_to_boundary(self, z):
        return np.abs(self.radius - np.abs(np.asarray(z, dtype=complex) - self.center))

    def bbox(self):
        c, r = self.center, self.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    @property
    def diameter(self):
        return 2.0 * self.radius

    def curves(self):
        return self.boundary()

    def medial_distance(self, z):
        """Distance to the set where the nearest boundary point is not unique."""
        return np.abs(np.asarray(z, dtype=complex) - self.center)

    def params(self):
        return {"center": _pair(self.center), "radius": self.radius}

    def scaled(self, alpha: complex, beta: complex = 0):
        return Disc(alpha * self.center + beta, abs(alpha) * self.radius)


class ScaledDisc(Disc):
    """The disc of radius r about the origin."""

    kind = "scaled-disc"

    def __init__(self, r: float):
        object.__setattr__(self, "center", 0j)
        object.__setattr__(self, "radius", float(r))
        self.__post_init__()

    @property
    def r(self):
        return self.radius

    def params(self):
        return {"r": self.radius}


@dataclass(frozen=True)
class PuncturedSphere:
    """The Riemann sphere minus finitely many points.

    With ``infinity=True`` the point at infinity is removed as well, so
    ``PuncturedSphere((a, b), infinity=True)`` is the plane minus a and b.
    """

    punctures: tuple
    infinity: bool = False

    kind = "punctured-sphere"

    def __post_init__(self):
        pts = tuple(_c(p) for p in self.punctures)
        object.__setattr__(self, "punctures", pts)
        if len(pts) < 2:
            raise DomainError("need at least two finite punctures")
        if len(set(pts)) != len(pts):
            raise DomainError("punctures must be pairwise distinct")
        if len(pts) + int(self.infinity) < 3:
            raise DomainError("fewer than three punctures: not hyperbolic")

    def boundary(self):
        # an exact finite set, not a sample of a curve
        return [Point(p) for p in self.punctures]

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return np.isfinite(z) & (dist_to_set(z, self.boundary()) > 0)

    def dist_to_boundary(self, z):
        return dist_to_set(z, self.boundary())

    def bbox(self):
        p = np.array(self.punctures)
        return p.real.min(), p.real.max(), p.imag.min(), p.imag.max()

    @property
    def diameter(self):
        p = np.array(self.punctures)
        return float(np.abs(p[:, None] - p[None, :]).max())

    def curves(self):
        return []

    def params(self):
        return {"punctures": [_pair(p) for p in self.punctures], "infinity": self.infinity}


def _inside_polygon(z, verts):
    """Even-odd rule for one closed polygon."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    vx, vy = verts.real, verts.imag
    inside = np.zeros(z.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = vx[i], vy[i]
        x2, y2 = vx[(i + 1) % n], vy[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


@dataclass(frozen=True)
class SampledDomain:
    """Domain bounded by closed sampled curves, identified by an interior point.

    The domain is the set of points on the same side of every boundary curve
    as ``z0``; this is the component of the complement containing ``z0`` when
    the curves are disjoint Jordan polygons.
    """

    components: tuple
    z0: complex

    kind = "sampled"

    def __post_init__(self):
        comps = tuple(tuple(_c(v) for v in comp) for comp in self.components)
        if not comps or any(len(c) < 3 for c in comps):
            raise DomainError("each boundary component needs at least three samples")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "z0", _c(self.z0))
        if not float(self.dist_to_boundary(self.z0)) > 0:
            raise DomainError("reference point z0 lies on the boundary")

    def boundary(self):
        return [Polyline(c, closed=True) for c in self.components]

    def curves(self):
        return self.boundary()

    def _sides(self, z):
        return [_inside_polygon(z, np.array(c)) for c in self.components]

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        ref = self._sides(self.z0)
        ok = self.dist_to_boundary(z) > 0
        for side, r in zip(self._sides(z), ref):
            ok &= side == bool(r)
        return ok

    def dist_to_boundary(self, z):
        return dist_to_set(z, self.boundary())

    def bbox(self):
        p = np.concatenate([np.array(c) for c in self.components])
        return p.real.min(), p.real.max(), p.imag.min(), p.imag.max()

    @property
    def diameter(self):
        p = np.concatenate([np.array(c) for c in self.components])
        return float(np.abs(p[:, None] - p[None, :]).max())

    def medial_distance(self, z, tol=1e-6):
        """0 where two non-adjacent boundary segments are (nearly) equally close, else inf."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        segs = [s for poly in self.boundary() for s in poly.segments()]
        d = np.stack([_dist_point_segment(z, s.p, s.q) for s in segs])
        order = np.sort(d, axis=0)
        idx = np.argsort(d, axis=0, kind="stable")
        out = np.full(z.shape, np.inf)
        m = len(segs)
        for k in range(z.size):
            first = idx[0, k]
            close = np.nonzero(d[:, k] <= order[0, k] + tol)[0]
            for j in close:
                if j != first and abs(int(j) - int(first)) not in (1, m - 1):
                    out[k] = 0.0
        return out

    def params(self):
        return {
            "components": [[_pair(v) for v in c] for c in self.components],
            "z0": _pair(self.z0),
        }


Domain = Union[Disc, ScaledDisc, PuncturedSphere, SampledDomain]


def circle_samples(center: complex, radius: float, n: int, offset: float = 0.0):
    t = (np.arange(n) + offset) / n
    return tuple(center + radius * np.exp(2j * math.pi * t))


def annulus(r_in: float, r_out: float, n: int = 256) -> SampledDomain:
    """Round annulus {r_in < |z| < r_out} as a sampled domain."""
    if not 0 < r_in < r_out:
        raise DomainError("need 0 < r_in < r_out")
    z0 = 0.5 * (r_in + r_out)
    return SampledDomain((circle_samples(0, r_out, n), circle_samples(0, r_in, n)), z0)


def domain_to_json(U: Domain) -> dict:
    return {"kind": U.kind, "params": U.params()}


def domain_from_json(obj: dict) -> Domain:
    kind = obj.get("kind")
    p = obj.get("params", {})
    if kind == "disc":
        return Disc(_c(p.get("center", 0)), float(p["radius"]))
    if kind == "scaled-disc":
        return ScaledDisc(float(p["r"]))
    if kind == "punctured-sphere":
        return PuncturedSphere(tuple(_c(v) for v in p["punctures"]), bool(p.get("infinity", False)))
    if kind == "sampled":
        comps = tuple(tuple(_c(v) for v in c) for c in p["components"])
        return SampledDomain(comps, _c(p["z0"]))
    raise DomainError(f"unknown domain kind {kind!r}")


def dist_to_boundary(z, U: Domain):
    """d_U(z): Euclidean distance from z to the boundary of U."""
    out = U.dist_to_boundary(z)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# convergence in boundary


@dataclass
class BoundaryConvergenceReport:
    hausdorff: list
    tolerances: list
    monotone: bool
    tends_to_zero: bool
    z0_in_limit: bool
    z0_in_all: bool
    violations: list

    @property
    def passed(self) -> bool:
        return self.monotone and self.tends_to_zero and self.z0_in_limit and self.z0_in_all

    def to_dict(self):
        return {
            "hausdorff": self.hausdorff,
            "tolerances": self.tolerances,
            "monotone": self.monotone,
            "tends_to_zero": self.tends_to_zero,
            "z0_in_limit": self.z0_in_limit,
            "z0_in_all": self.z0_in_all,
            "passed": self.passed,
            "violations": self.violations,
        }


def converges_in_boundary(
    U_seq: Iterable[Domain], U: Domain, z0: complex, wiggle: float = 0.05, drop: float = 0.1
) -> BoundaryConvergenceReport:
    """Finite-prefix check of convergence in boundary.

    Condition (a) is accepted when the Hausdorff distances never grow by more
    than ``wiggle`` (relative) between consecutive terms and the last value
    is below ``drop`` times the first.  Condition (b) needs ``z0`` in the
    limit domain and in every supplied term.
    """
    U_seq = list(U_seq)
    reports = [hausdorff_report(U.boundary(), Un.boundary()) for Un in U_seq]
    H = [r.value for r in reports]
    violations = []
    monotone = all(H[i + 1] <= H[i] * (1 + wiggle) for i in range(len(H) - 1))
    tends = len(H) >= 2 and H[-1] < H[0] * drop
    if not monotone:
        violations.append("hausdorff distances are not monotone within wiggle")
    if not tends:
        violations.append("hausdorff distances do not drop toward zero")
    z0 = complex(z0)
    in_limit = bool(U.contains(z0))
    if not in_limit:
        violations.append("z0 is not in the limit domain")
    missing = [i for i, Un in enumerate(U_seq) if not bool(Un.contains(z0))]
    if missing:
        violations.append(f"z0 is outside terms {missing}")
    return BoundaryConvergenceReport(
        hausdorff=H,
        tolerances=[r.tolerance for r in reports],
        monotone=monotone,
        tends_to_zero=tends,
        z0_in_limit=in_limit,
        z0_in_all=not missing,
        violations=violations,
    )
