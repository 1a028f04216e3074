"""Möbius transformations z -> (alpha z + beta) / (gamma z + delta)."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

INF = complex("inf")


@dataclass(frozen=True)
class MobiusMap:
    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def __post_init__(self):
        if self.det == 0:
            raise DomainError("Möbius map with zero determinant")

    @property
    def det(self) -> complex:
        return self.alpha * self.delta - self.beta * self.gamma

    @classmethod
    def affine(cls, scale: complex, shift: complex = 0) -> "MobiusMap":
        return cls(complex(scale), complex(shift), 0j, 1 + 0j)

    def __call__(self, z):
        if np.ndim(z) == 0 and not isinstance(z, np.ndarray):
            return self._apply_scalar(complex(z))
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.alpha * z + self.beta) / (self.gamma * z + self.delta)

    def _apply_scalar(self, z: complex) -> complex:
        if cmath.isinf(z):
            return self.alpha / self.gamma if self.gamma != 0 else INF
        den = self.gamma * z + self.delta
        if den == 0:
            return INF
        return (self.alpha * z + self.beta) / den

    def derivative(self, z):
        """Complex derivative det / (gamma z + delta)**2."""
        z = np.asarray(z, dtype=complex)
        out = self.det / (self.gamma * z + self.delta) ** 2
        return complex(out) if out.ndim == 0 else out

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.delta, -self.beta, -self.gamma, self.alpha)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """Return self o other."""
        m = np.array([[self.alpha, self.beta], [self.gamma, self.delta]])
        n = np.array([[other.alpha, other.beta], [other.gamma, other.delta]])
        (a, b), (c, d) = m @ n
        return MobiusMap(complex(a), complex(b), complex(c), complex(d))

    def to_dict(self) -> dict:
        return {k: [getattr(self, k).real, getattr(self, k).imag] for k in ("alpha", "beta", "gamma", "delta")}


def normalize_triple(a: complex, b: complex, c: complex) -> MobiusMap:
    """The map f(z) = (z-c)(a-b) / ((z-b)(a-c)), so f(c)=0, f(b)=inf, f(a)=1."""
    a, b, c = complex(a), complex(b), complex(c)
    if a == b or b == c or a == c:
        raise DomainError("normalize_triple needs three distinct points")
    k = a - b
    m = a - c
    return MobiusMap(k, -c * k, m, -b * m)
