"""Monic real polynomials, evaluation and an Aberth-Ehrlich root finder.

The root finder is deliberately independent of the determinant machinery in
:mod:`hopf_frh.frh` so it can serve as an eigenvalue oracle for it.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlphaOutOfRange, ConvergenceFailure, NotMonic

TAU_ARG = 1e-7
TAU_ZERO = 1e-10
MAX_DEGREE = 64
_EPS = np.finfo(float).eps


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 1.0 < alpha < 2.0:
        raise AlphaOutOfRange(alpha)
    return alpha


@dataclass(frozen=True)
class CharPoly:
    """``lambda**n + a1*lambda**(n-1) + ... + an`` with the leading 1 implicit."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) < 1:
            raise ValueError("a characteristic polynomial needs degree >= 1")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError(f"coefficients must be finite, got {coeffs}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    @property
    def full(self) -> np.ndarray:
        """Coefficients ``[1, a1, ..., an]``, highest power first."""
        return np.array((1.0,) + self.coeffs)

    @classmethod
    def from_full(cls, coeffs: Sequence[float]) -> "CharPoly":
        """Build from ``[1, a1, ..., an]``; any other leading coefficient is refused."""
        coeffs = [float(c) for c in coeffs]
        if not coeffs or coeffs[0] != 1.0:
            raise NotMonic(f"leading coefficient must be exactly 1, got {coeffs[:1]}")
        return cls(tuple(coeffs[1:]))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "CharPoly":
        full = np.poly(np.asarray(roots, dtype=complex))
        return cls(tuple(np.real(full[1:])))


@dataclass(frozen=True)
class ComplexRoot:
    re: float
    im: float

    def __post_init__(self):
        # -0.0 would flip atan2 to -pi on the negative real axis
        object.__setattr__(self, "re", float(self.re) + 0.0)
        object.__setattr__(self, "im", float(self.im) + 0.0)

    @property
    def modulus(self) -> float:
        return math.hypot(self.re, self.im)

    @property
    def argument(self) -> float:
        return math.atan2(self.im, self.re)

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z: complex) -> "ComplexRoot":
        return cls(z.real, z.imag)

    def conjugate(self) -> "ComplexRoot":
        return ComplexRoot(self.re, -self.im)


@dataclass(frozen=True)
class SectorVerdict:
    n_stable: int
    n_critical: int
    n_unstable: int
    n_zero: int = 0

    def counts(self):
        return (self.n_stable, self.n_critical, self.n_unstable)

    @property
    def all_stable(self) -> bool:
        return self.n_critical == self.n_unstable == self.n_zero == 0


def evaluate(p: CharPoly, z: complex) -> complex:
    """Horner evaluation of ``p`` at ``z``."""
    acc = complex(1.0)
    for a in p.coeffs:
        acc = acc * z + a
    return acc


def _horner_with_derivative(full, z):
    val = np.ones_like(z)
    der = np.zeros_like(z)
    for c in full[1:]:
        der = der * z + val
        val = val * z + c
    return val, der


def _backward_scale(absfull, z):
    az = np.abs(z)
    acc = np.zeros_like(az)
    for c in absfull:
        acc = acc * az + c
    return acc


def residual_bound(p: CharPoly, root: complex) -> float:
    return 1e-8 * (1.0 + sum(abs(a) for a in p.coeffs)) * max(1.0, abs(root)) ** float(p.degree)


def _aberth(full: np.ndarray, max_iter: int) -> np.ndarray:
    n = len(full) - 1
    # Fujiwara bound; the Cauchy radius 1 + max|a_i| overflows z**n for large n
    radius = 2.0 * max(abs(c) ** (1.0 / i) for i, c in enumerate(full[1:], start=1))
    radius = max(radius, 1e-3)
    k = np.arange(n)
    # fixed angular offset keeps starting points off the real axis and asymmetric
    angles = 2.0 * np.pi * k / n + 0.4 + 0.25 / (n + 1)
    z = radius * np.exp(1j * angles)
    absfull = np.abs(full)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        val, der = _horner_with_derivative(full, z)
        small = np.abs(val) <= 4.0 * _EPS * _backward_scale(absfull, z)
        done |= small
        if done.all():
            return z
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = val / der
            step = ratio / (1.0 - ratio * inv.sum(axis=1))
        step = np.where(done | ~np.isfinite(step), 0.0, step)
        z = z - step
        # the absolute floor stops denormal ping-pong around an exact zero root
        done |= np.abs(step) <= 2.0 * _EPS * np.maximum(np.abs(z), _EPS * radius)
    raise ConvergenceFailure(f"Aberth iteration did not settle within {max_iter} sweeps")


def _pair_conjugates(z: np.ndarray) -> list:
    """Return roots in conjugate-paired order: real roots, then (upper, lower) pairs."""
    z = [complex(w.real, 0.0) if abs(w.imag) <= 1e3 * _EPS * max(1.0, abs(w)) else complex(w)
         for w in z]
    upper = sorted((w for w in z if w.imag > 0), key=lambda w: w.imag)
    lower = sorted((w for w in z if w.imag < 0), key=lambda w: -w.imag)
    real = [w for w in z if w.imag == 0]
    # an unmatched surplus on one side can only come from near-real roots
    while len(upper) > len(lower):
        real.append(upper.pop(0))
    while len(lower) > len(upper):
        real.append(lower.pop(0))
    pairs = []
    remaining = list(lower)
    for u in sorted(upper, key=lambda w: (w.real, w.imag)):
        j = min(range(len(remaining)), key=lambda i: abs(remaining[i].conjugate() - u))
        w = remaining.pop(j)
        mid = 0.5 * (u + w.conjugate())
        pairs.append(mid)
    out = [ComplexRoot(w.real, 0.0) for w in sorted(real, key=lambda w: w.real)]
    for m in sorted(pairs, key=lambda w: (w.real, w.imag)):
        out.append(ComplexRoot(m.real, m.imag))
        out.append(ComplexRoot(m.real, -m.imag))
    return out


def roots(p: CharPoly, max_iter: int = 500) -> list:
    """All roots of ``p`` with multiplicity, conjugate pairs adjacent.

    Raises ConvergenceFailure when the simultaneous iteration does not settle
    or a root misses the residual bound.
    """
    n = p.degree
    if n > MAX_DEGREE:
        raise ValueError(f"degree {n} exceeds the supported maximum {MAX_DEGREE}")
    if n == 1:
        return [ComplexRoot(-p.coeffs[0], 0.0)]
    z = _aberth(p.full, max_iter)
    out = _pair_conjugates(z)
    for r in out:
        if not abs(evaluate(p, r.z)) <= residual_bound(p, r.z):
            raise ConvergenceFailure(f"root {r.z} misses the residual bound")
    return out


def sector_classify(rts: Sequence[ComplexRoot], alpha: float,
                    tau_arg: float = TAU_ARG, tau_zero: float = TAU_ZERO) -> SectorVerdict:
    """Count roots in the stable sector, on its boundary and in the unstable sector."""
    alpha = check_alpha(alpha)
    edge = alpha * math.pi / 2.0
    stable = critical = unstable = zero = 0
    for r in rts:
        if r.modulus < tau_zero:
            zero += 1
            continue
        gap = abs(r.argument) - edge
        if abs(gap) <= tau_arg:
            critical += 1
        elif gap > 0:
            stable += 1
        else:
            unstable += 1
    return SectorVerdict(stable, critical, unstable, zero)


def polar(modulus: float, argument: float) -> complex:
    return cmath.rect(modulus, argument)
