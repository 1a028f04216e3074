"""Tabulated density of the sphere punctured at 0, 1, infinity.

The density is invariant under the twelve anharmonic symmetries generated by
w -> 1-w, w -> 1/w and complex conjugation, so it suffices to know it on the
fundamental triangle

    T = {Im w >= 0, Re w <= 1/2, |w - 1| <= 1},

whose only cusp sits at w = 0.  On T we tabulate

    g(w) = log(rho(w) * 2|w| * log(16/|w|)),

which tends to 0 at the cusp and is smooth in (log|w|, angle).  Nodes are
produced by the Agard quadrature, so the table inherits its accuracy; it
exists only to make the many-triple search of the three-point density
affordable.  Interpolation error is below 1e-5 relative.
"""

from __future__ import annotations

import math
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DomainError

R_MIN = 1e-7
_TABLE_FILE = "rho01_table.npz"

_PHI_NODES = 21


def _theta_a_hi(r):
    return np.arccos(np.clip(r / 2.0, -1.0, 1.0))


def _theta_b_lo(r):
    return (math.pi / 6.0) * (2.0 * r - 1.0)


def _grid_a():
    # coarse toward the cusp, fine where T comes within 1/2 of the puncture at 1
    far = np.linspace(math.log(R_MIN), math.log(0.05), 41)
    near = np.linspace(math.log(0.05), math.log(0.5), 61)
    return np.concatenate([far[:-1], near]), np.linspace(0.0, 1.0, _PHI_NODES)


def _grid_b():
    return np.linspace(math.log(0.5), 0.0, 41), np.linspace(0.0, 1.0, _PHI_NODES)


def _points_a(s, phi):
    r = np.exp(s)[:, None]
    theta = phi[None, :] * _theta_a_hi(r)
    return r * np.exp(1j * theta)


def _points_b(s, phi):
    r = np.exp(s)[:, None]
    lo = _theta_b_lo(r)
    theta = lo + phi[None, :] * (_theta_a_hi(r) - lo)
    return r * np.exp(1j * theta)


def _log_scaled(w, rho):
    r = np.abs(w)
    return np.log(rho * 2.0 * r * np.log(16.0 / r))


def reduce_to_fundamental(w):
    """Map points into T.

    Returns ``(w_t, factor)`` with ``rho(w) = rho(w_t) * factor``.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if np.any((w == 0) | (w == 1) | ~np.isfinite(w)):
        raise DomainError("rho_{0,1} is undefined at 0, 1 and infinity")
    one_minus = 1.0 - w
    images = np.stack(
        [w, one_minus, 1.0 / w, 1.0 / one_minus, w / (w - 1.0), (w - 1.0) / w]
    )
    aw2 = np.abs(w) ** 2
    a1w2 = np.abs(one_minus) ** 2
    factors = np.stack([np.ones_like(aw2), np.ones_like(aw2), 1 / aw2, 1 / a1w2, 1 / a1w2, 1 / aw2])
    images = np.where(images.imag < 0, np.conj(images), images)
    tol = 1e-12
    inside = (images.real <= 0.5 + tol) & (np.abs(images - 1.0) <= 1.0 + tol)
    pick = np.argmax(inside, axis=0)
    cols = np.arange(w.size)
    return images[pick, cols], factors[pick, cols]


def build_table(evaluate=None, rel_tol: float = 1e-11):
    """Tabulate ``g`` on both pieces of T.

    ``evaluate(w)`` returns rho_{0,1}(w) for a 1-d array; by default the
    Agard quadrature with a distant-free (0, 1, inf) reduction is used.
    """
    if evaluate is None:
        evaluate = _quadrature_rho01(rel_tol)
    out = {}
    for name, grid, points in (("a", _grid_a, _points_a), ("b", _grid_b, _points_b)):
        s, phi = grid()
        w = points(s, phi)
        rho = np.asarray(evaluate(w.ravel()), dtype=float).reshape(w.shape)
        out[f"{name}_s"] = s
        out[f"{name}_phi"] = phi
        out[f"{name}_g"] = _log_scaled(w, rho)
    out["rel_tol"] = np.array(rel_tol)
    return out


def _quadrature_rho01(rel_tol):
    from .densities import rho01_quadrature

    def evaluate(ws):
        return np.array([rho01_quadrature(complex(w), rel_tol).value for w in ws])

    return evaluate


class Rho01Table:
    def __init__(self, data):
        self.rel_tol = float(data["rel_tol"])
        self._a = RectBivariateSpline(data["a_s"], data["a_phi"], data["a_g"], kx=3, ky=3)
        self._b = RectBivariateSpline(data["b_s"], data["b_phi"], data["b_g"], kx=3, ky=3)

    def __call__(self, w):
        """Vectorised rho_{0,1}(w)."""
        scalar = np.ndim(w) == 0
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        wt, factor = reduce_to_fundamental(w.ravel())
        r = np.abs(wt)
        theta = np.angle(wt)
        g = np.empty(r.shape)
        in_a = r <= 0.5
        if np.any(in_a):
            ra = np.maximum(r[in_a], R_MIN)
            phi = np.clip(theta[in_a] / _theta_a_hi(ra), 0.0, 1.0)
            g[in_a] = self._a.ev(np.log(ra), phi)
        if np.any(~in_a):
            rb = np.minimum(r[~in_a], 1.0)
            lo = _theta_b_lo(rb)
            span = _theta_a_hi(rb) - lo
            phi = np.clip((theta[~in_a] - lo) / span, 0.0, 1.0)
            g[~in_a] = self._b.ev(np.log(rb), phi)
        rho_t = np.exp(g) / (2.0 * r * np.log(16.0 / r))
        out = (rho_t * factor).reshape(shape)
        return float(out) if scalar else out


@lru_cache(maxsize=1)
def default_table() -> Rho01Table:
    path = resources.files("hyperdense").joinpath("data").joinpath(_TABLE_FILE)
    with resources.as_file(path) as p, np.load(p) as data:
        return Rho01Table({k: data[k] for k in data.files})


def rho01_fast(w):
    """rho_{0,1}(w) from the packaged table."""
    return default_table()(w)


def write_table(path, rel_tol: float = 1e-11) -> None:
    np.savez(path, **build_table(rel_tol=rel_tol))
