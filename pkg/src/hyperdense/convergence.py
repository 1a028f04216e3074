"""Domain families converging in boundary, density gaps and rate fits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import densities
from .errors import BudgetExceeded, DomainError
from .geometry import Disc, PuncturedSphere, ScaledDisc, dist_to_boundary, hausdorff_distance
from .teichmuller import teich_upper_estimate

FAMILY_TAGS = ("moving-puncture", "moving-pair", "scaled-disc", "perturbed-boundary")
MODELS = ("eps", "eps-log", "loglog-inverse")
DEFAULT_SCHEDULE = tuple(2.0**-k for k in range(3, 10))


def phi(model: str, eps):
    """Rate function of a model tag."""
    eps = np.asarray(eps, dtype=float)
    if model == "eps":
        return eps
    if model == "eps-log":
        return eps * np.log(1.0 / eps)
    if model == "loglog-inverse":
        if np.any(eps >= math.exp(-1.0)):
            raise DomainError("loglog-inverse model needs eps < 1/e")
        return 1.0 / np.log(np.log(1.0 / eps))
    raise DomainError(f"unknown rate model {model!r}")


def disc_samples(center: complex = 0, radius: float = 0.5, n: int = 25, seed: int | None = None):
    """n points in a closed disc: a sunflower pattern, or uniform draws when seeded."""
    if n < 1:
        raise DomainError("need at least one sample")
    if seed is None:
        k = np.arange(n)
        r = radius * np.sqrt(k / max(n - 1, 1))
        t = k * math.pi * (3.0 - math.sqrt(5.0))
    else:
        rng = np.random.default_rng(seed)
        r = radius * np.sqrt(rng.random(n))
        t = 2 * math.pi * rng.random(n)
    return tuple(complex(center) + r * np.exp(1j * t))


@dataclass
class DomainFamily:
    """U_eps -> U as eps -> 0, with a finite compact sample K."""

    tag: str
    generator: Callable[[float], object]
    limit: object
    K: tuple
    evaluator: Callable | None = None
    eps_max: float = 0.5
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise DomainError(f"unknown family tag {self.tag!r}")
        self.K = tuple(complex(k) for k in self.K)
        if not self.K:
            raise DomainError("compact sample K is empty")
        if np.min(dist_to_boundary(np.array(self.K), self.limit)) <= 0:
            raise DomainError("K must stay away from the limit boundary")

    def domain(self, eps: float):
        if not 0 <= eps <= self.eps_max:
            raise DomainError(f"eps={eps} outside the admissible range [0, {self.eps_max}]")
        U = self.limit if eps == 0 else self.generator(eps)
        if not np.all(U.contains(np.array(self.K))):
            raise DomainError(f"U_eps for eps={eps} does not contain K")
        return U

    def boundary_distance(self, eps: float) -> float:
        return hausdorff_distance(self.domain(eps).boundary(), self.limit.boundary())

    def evaluate(self, U, z: complex, rel_tol: float):
        """(value, error) of the family's density at z."""
        if self.evaluator is not None:
            return self.evaluator(U, z, rel_tol)
        d = densities.density(U, z, rel_tol=rel_tol)
        if d.info.get("converged") is False:
            raise BudgetExceeded(f"quadrature budget exhausted at z={z}")
        return d.value, d.error

    def describe(self) -> dict:
        return {
            "tag": self.tag,
            "K": [[k.real, k.imag] for k in self.K],
            "limit": {"kind": self.limit.kind, "params": self.limit.params()},
            **self.meta,
        }


def scaled_disc_family(K: Sequence[complex] = (0j,)) -> DomainFamily:
    return DomainFamily(
        "scaled-disc", lambda e: ScaledDisc(1.0 - e), Disc(0, 1.0), tuple(K), eps_max=0.5
    )


def moving_puncture_family(
    punctures=(0, 1, 2), index: int = 2, direction: complex = 1, K=(1j,)
) -> DomainFamily:
    """The sphere minus three points, one of which moves by eps * direction."""
    base = tuple(complex(p) for p in punctures)
    if len(base) != 3:
        raise DomainError("moving-puncture family needs three finite punctures")
    u = complex(direction) / abs(direction)

    def gen(e):
        pts = list(base)
        pts[index] = pts[index] + e * u
        return PuncturedSphere(tuple(pts))

    gaps = [abs(p - q) for i, p in enumerate(base) for q in base[i + 1 :]]
    meta = {"punctures": [[p.real, p.imag] for p in base], "index": index, "direction": [u.real, u.imag]}
    return DomainFamily("moving-puncture", gen, PuncturedSphere(base), tuple(K), eps_max=0.5 * min(gaps), meta=meta)


def moving_pair_family(punctures=(0, 1), index: int = 1, direction: complex = 1, K=(1j,)) -> DomainFamily:
    """The plane minus two points, one of which moves by eps * direction."""
    base = tuple(complex(p) for p in punctures)
    u = complex(direction) / abs(direction)

    def gen(e):
        pts = list(base)
        pts[index] = pts[index] + e * u
        return PuncturedSphere(tuple(pts), infinity=True)

    meta = {"punctures": [[p.real, p.imag] for p in base], "index": index, "direction": [u.real, u.imag]}
    return DomainFamily(
        "moving-pair", gen, PuncturedSphere(base, infinity=True), tuple(K),
        eps_max=0.5 * abs(base[0] - base[1]), meta=meta,
    )


def perturbed_boundary_family(h: float = 1 / 16, K=(0j,)) -> DomainFamily:
    """Discs (1 - eps)D -> D measured with the grid Teichmüller estimate."""

    def teich(U, z, rel_tol):
        est = teich_upper_estimate(U, z, h)
        return est.value, est.residual

    return DomainFamily(
        "perturbed-boundary", lambda e: Disc(0, 1.0 - e), Disc(0, 1.0), tuple(K),
        evaluator=teich, eps_max=0.3, meta={"h": h, "evaluator": "teich"},
    )


FAMILIES = {
    "scaled-disc": scaled_disc_family,
    "moving-puncture": moving_puncture_family,
    "moving-pair": moving_pair_family,
    "perturbed-boundary": perturbed_boundary_family,
}


# ---------------------------------------------------------------------------
# gaps and sweeps


@dataclass(frozen=True)
class GapResult:
    eps: float
    gap: float
    error: float
    z: complex


def density_gap_detail(family: DomainFamily, eps: float, rel_tol: float = 1e-10, _limit_cache=None) -> GapResult:
    """sup over K of |rho_{U_eps} - rho_U| with the worst point and an error bar."""
    eps = float(eps)
    if eps == 0:
        family.domain(0)
        return GapResult(0.0, 0.0, 0.0, family.K[0])
    U_eps = family.domain(eps)
    best = None
    for z in family.K:
        try:
            if _limit_cache is not None and z in _limit_cache:
                v0, e0 = _limit_cache[z]
            else:
                v0, e0 = family.evaluate(family.limit, z, rel_tol)
                if _limit_cache is not None:
                    _limit_cache[z] = (v0, e0)
            v1, e1 = family.evaluate(U_eps, z, rel_tol)
        except DomainError as exc:
            raise DomainError(f"evaluation failed at z={z}: {exc}") from exc
        cand = GapResult(eps, abs(v1 - v0), e0 + e1, z)
        if best is None or cand.gap > best.gap:
            best = cand
    return best


def density_gap(family: DomainFamily, eps: float, rel_tol: float = 1e-10) -> float:
    return density_gap_detail(family, eps, rel_tol).gap


@dataclass
class SweepRow:
    eps: float
    gap: float
    gap_error: float
    ok: bool = True
    message: str = ""


@dataclass
class SweepTable:
    family: str
    rel_tol: float
    rows: list

    @property
    def empty(self) -> bool:
        return not self.rows

    @property
    def complete(self) -> bool:
        return all(r.ok for r in self.rows)

    def eps(self):
        return np.array([r.eps for r in self.rows])

    def gaps(self):
        return np.array([r.gap for r in self.rows])

    def to_csv(self, fits=None) -> str:
        """eps, gap, gap_error, then one gap/phi column per fitted model."""
        fits = fits or []
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "gap", "gap_error", "ok"] + [f"ratio_{f.model}" for f in fits])
        for r in self.rows:
            extra = []
            for f in fits:
                extra.append(repr(float(r.gap / phi(f.model, r.eps))) if r.ok and r.gap > 0 else "")
            w.writerow([repr(r.eps), repr(r.gap), repr(r.gap_error), int(r.ok)] + extra)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "rel_tol": self.rel_tol,
            "empty": self.empty,
            "complete": self.complete,
            "rows": [
                {"eps": r.eps, "gap": r.gap, "gap_error": r.gap_error, "ok": r.ok, "message": r.message}
                for r in self.rows
            ],
        }


def rate_sweep(family: DomainFamily, eps_list: Sequence[float], rel_tol: float = 1e-10) -> SweepTable:
    """density_gap for each eps in order; failures are marked, not raised."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps list must be strictly decreasing")
    cache = {}
    rows = []
    for e in eps_list:
        try:
            g = density_gap_detail(family, e, rel_tol, _limit_cache=cache)
            rows.append(SweepRow(e, g.gap, g.error))
        except (DomainError, BudgetExceeded) as exc:
            rows.append(SweepRow(e, math.nan, math.nan, False, str(exc)))
    return SweepTable(family.tag, rel_tol, rows)


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class RateFit:
    """C is the certified empirical constant max(gap / phi); slope and
    residual come from least squares of log gap against log phi."""

    model: str
    C: float
    max_ratio: float
    residual: float
    slope: float
    ratio_first: float
    ratio_last: float
    n: int
    excluded: tuple = ()

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "C": self.C,
            "max_ratio": self.max_ratio,
            "residual": self.residual,
            "slope": self.slope,
            "ratio_first": self.ratio_first,
            "ratio_last": self.ratio_last,
            "n": self.n,
            "excluded": list(self.excluded),
        }


def fit_rate(table, models: Sequence[str] = ("eps", "eps-log")) -> list:
    """One RateFit per model.  ``table`` is a SweepTable or (eps, gap) pairs."""
    if isinstance(table, SweepTable):
        pairs = [(r.eps, r.gap) for r in table.rows if r.ok]
    else:
        pairs = [(float(e), float(g)) for e, g in table]
    excluded = tuple(e for e, g in pairs if not (g > 0 and math.isfinite(g)))
    pairs = [(e, g) for e, g in pairs if g > 0 and math.isfinite(g)]
    if len(pairs) < 4:
        raise DomainError(f"need at least 4 rows with positive gaps, got {len(pairs)}")
    eps = np.array([p[0] for p in pairs])
    gap = np.array([p[1] for p in pairs])
    out = []
    for m in models:
        f = phi(m, eps)
        ratio = gap / f
        X = np.log(f)
        Y = np.log(gap)
        slope, icpt = np.polyfit(X, Y, 1)
        res = float(np.sqrt(np.mean((Y - (slope * X + icpt)) ** 2)))
        out.append(
            RateFit(
                m, float(ratio.max()), float(ratio.max()), res, float(slope),
                float(ratio[0]), float(ratio[-1]), len(pairs), excluded,
            )
        )
    return out


def best_fit(fits) -> RateFit:
    """Smallest residual; the first listed model wins ties."""
    return min(fits, key=lambda f: f.residual)


def sweep_report(family: DomainFamily, table: SweepTable, fits, extra: dict | None = None) -> dict:
    return {
        "family": family.describe(),
        "table": table.to_dict(),
        "fits": [f.to_dict() for f in fits],
        "best_model": best_fit(fits).model if fits else None,
        **(extra or {}),
    }


# ---------------------------------------------------------------------------
# three-point lower estimate


@dataclass(frozen=True)
class ThreePointGapReport:
    h_U: float
    h_U_eps: float
    H: float
    ratio: float
    constant: float | None
    holds: bool | None
    budget_exhausted: bool

    def to_dict(self) -> dict:
        return {
            "h_U": self.h_U,
            "h_U_eps": self.h_U_eps,
            "H": self.H,
            "ratio": self.ratio,
            "constant": self.constant,
            "holds": self.holds,
            "budget_exhausted": self.budget_exhausted,
        }


def three_point_gap_check(U, U_eps, z: complex, constant: float | None = None, **search) -> ThreePointGapReport:
    """(h_U - h_{U_eps}) / sqrt(H(bd U, bd U_eps)).

    With ``constant`` given, ``holds`` reports h_{U_eps} >= h_U - constant * sqrt(H).
    """
    z = complex(z)
    H = hausdorff_distance(U.boundary(), U_eps.boundary())
    for V in (U, U_eps):
        if not bool(V.contains(z)):
            raise DomainError("point outside domain")
        if H > 0 and dist_to_boundary(z, V) < H:
            raise DomainError("z must be farther from the boundary than H")
    hu = densities.three_point_density(U, z, **search)
    he = hu if U_eps == U else densities.three_point_density(U_eps, z, **search)
    diff = hu.value - he.value
    ratio = 0.0 if H == 0 else diff / math.sqrt(H)
    holds = None if constant is None else bool(he.value >= hu.value - constant * math.sqrt(H))
    exhausted = bool(hu.info.get("budget_exhausted") or he.info.get("budget_exhausted"))
    return ThreePointGapReport(hu.value, he.value, H, ratio, constant, holds, exhausted)
