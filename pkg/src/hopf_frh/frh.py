"""Fractional-order Routh-Hurwitz matrix, its minors and the Hopf criterion.

Rotating the characteristic polynomial onto the ray ``r * exp(i*alpha*pi/2)``
splits it into two real polynomials ``f1`` (imaginary part) and ``f2`` (real
part). The interleaved 2n x 2n coefficient matrix of that pair carries
everything needed to decide stability and locate the critical root.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import polycore
from .errors import DegenerateMinor, NotCritical
from .polycore import CharPoly, ComplexRoot, check_alpha


@dataclass(frozen=True)
class RotatedPair:
    n: int
    alpha: float
    abar: tuple
    bbar: tuple


@dataclass(frozen=True)
class TolerancePolicy:
    """Mixed tolerance ``rel * max(1, bound)`` for every sign test.

    ``bound`` is the equilibrated Hadamard bound of the block in question.
    """

    rel: float = 1e-9

    def tau(self, scale):
        return self.rel * np.maximum(1.0, scale)


DEFAULT_TOL = TolerancePolicy()


@dataclass(frozen=True, eq=False)
class HurwitzMatrix:
    n: int
    entries: np.ndarray
    pair: RotatedPair

    def entry(self, row: int, col: int) -> float:
        """1-based accessor matching the textbook layout."""
        return float(self.entries[row - 1, col - 1])


@dataclass(frozen=True)
class MinorSequence:
    nabla: tuple
    nabla_tilde: float
    scale: tuple
    tilde_scale: float
    magnitude: tuple = ()

    @property
    def n(self) -> int:
        return len(self.nabla)

    def nabla_prev(self) -> float:
        """The minor of order n-1; the empty minor is 1 for n == 1."""
        return self.nabla[-2] if self.n > 1 else 1.0

    def prev_scale(self) -> float:
        return self.scale[-2] if self.n > 1 else 1.0


class Verdict(str, Enum):
    STABLE = "Stable"
    HOPF_CANDIDATE = "HopfCandidate"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class StabilityVerdict:
    tag: Verdict
    r0: Optional[float]
    details: tuple
    minors: MinorSequence = field(repr=False)
    alpha: float = float("nan")


def rotation_coefficients(coeffs: np.ndarray, alpha: float):
    """Vectorised rotation: ``coeffs`` has shape (..., n) holding a1..an.

    ``alpha`` is a scalar or holds one order per row (shape ``coeffs.shape[:-1]``).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    full = np.concatenate([np.ones(coeffs.shape[:-1] + (1,)), coeffs], axis=-1)
    angle = (n - np.arange(n + 1)) * np.asarray(alpha, dtype=float)[..., None] * math.pi / 2.0
    s = np.sin(angle)
    c = np.cos(angle)
    s[..., -1], c[..., -1] = 0.0, 1.0
    return full * s, full * c


def rotate(p: CharPoly, alpha: float) -> RotatedPair:
    alpha = check_alpha(alpha)
    abar, bbar = rotation_coefficients(np.array(p.coeffs), alpha)
    return RotatedPair(p.degree, alpha, tuple(abar.tolist()), tuple(bbar.tolist()))


def hurwitz_stack(abar: np.ndarray, bbar: np.ndarray) -> np.ndarray:
    """Stack of Hurwitz matrices for batched rotated coefficients of shape (m, n+1)."""
    m, n1 = abar.shape
    n = n1 - 1
    H = np.zeros((m, 2 * n, 2 * n))
    for i in range(n):
        width = min(n + 1, 2 * n - i)
        H[:, 2 * i, i:i + width] = abar[:, :width]
        H[:, 2 * i + 1, i:i + width] = bbar[:, :width]
    return H


def build_matrix(rp: RotatedPair) -> HurwitzMatrix:
    H = hurwitz_stack(np.array([rp.abar]), np.array([rp.bbar]))[0]
    H.setflags(write=False)
    return HurwitzMatrix(rp.n, H, rp)


def hadamard_bound(M: np.ndarray) -> np.ndarray:
    """Product of row norms over the last two axes."""
    return np.prod(np.linalg.norm(M, axis=-1), axis=-1)


def equilibrate(M: np.ndarray, sweeps: int = 4):
    """Power-of-two row/column scaling ``S = D M E`` of a stack of square blocks.

    Returns ``(S, log2 |det D E|)``. The scaling is exact in floating point,
    so ``det M = det S * 2**-log2det`` and ``hadamard_bound(S) * 2**-log2det``
    is an upper bound on ``|det M|`` that, unlike the raw row-norm product,
    does not degrade when the roots are rescaled.
    """
    S = np.array(M, dtype=float)
    log2det = np.zeros(S.shape[:-2])
    for _ in range(sweeps):
        for axis in (-1, -2):
            norm = np.linalg.norm(S, axis=axis)
            e = np.where(norm > 0, -np.round(np.log2(np.where(norm > 0, norm, 1.0))), 0.0)
            S = S * (np.exp2(e)[..., :, None] if axis == -1 else np.exp2(e)[..., None, :])
            log2det += e.sum(axis=-1)
    return S, log2det


def _det_and_bound(M: np.ndarray):
    S, log2det = equilibrate(M)
    back = np.exp2(-log2det)
    return np.linalg.det(S) * back, hadamard_bound(S) * back, hadamard_bound(M)


def tilde_columns(n: int) -> list:
    return list(range(2 * n - 3)) + [2 * n - 2]


def minor_stack(H: np.ndarray):
    """Batched minors of a (m, 2n, 2n) stack.

    Returns (nabla, scale, tilde, tilde_scale, magnitude), the 2-d ones of
    shape (m, n). Each block is equilibrated, then factorised by LU with
    partial pivoting. ``scale`` is the equilibrated Hadamard bound that sets
    the sign tolerances; ``magnitude`` is the plain row-norm bound, a
    measure of how large the minor can be near this point.
    """
    m, size, _ = H.shape
    n = size // 2
    nabla = np.empty((m, n))
    scale = np.empty((m, n))
    magnitude = np.empty((m, n))
    for p in range(1, n + 1):
        nabla[:, p - 1], scale[:, p - 1], magnitude[:, p - 1] = _det_and_bound(H[:, :2 * p, :2 * p])
    if n == 1:
        tilde = np.ones(m)
        tilde_scale = np.ones(m)
    else:
        tilde, tilde_scale, _ = _det_and_bound(H[:, :2 * n - 2][:, :, tilde_columns(n)])
    return nabla, scale, tilde, tilde_scale, magnitude


def minors(H: HurwitzMatrix) -> MinorSequence:
    nabla, scale, tilde, tscale, mag = minor_stack(H.entries[None])
    return MinorSequence(tuple(nabla[0].tolist()), float(tilde[0]),
                         tuple(scale[0].tolist()), float(tscale[0]), tuple(mag[0].tolist()))


def minors_of(p: CharPoly, alpha: float) -> MinorSequence:
    return minors(build_matrix(rotate(p, alpha)))


def _sign(x, tau):
    return 1 if x > tau else (-1 if x < -tau else 0)


def verdict_from_minors(ms: MinorSequence, alpha: float,
                        tol: TolerancePolicy = DEFAULT_TOL) -> StabilityVerdict:
    n = ms.n
    taus = [float(tol.tau(s)) for s in ms.scale]
    tau_t = float(tol.tau(ms.tilde_scale))
    signs = tuple(_sign(x, t) for x, t in zip(ms.nabla, taus))
    details = signs + (_sign(ms.nabla_tilde, tau_t),)
    if all(s > 0 for s in signs):
        return StabilityVerdict(Verdict.STABLE, None, details, ms, alpha)
    if signs[-1] == 0:
        prev = ms.nabla_prev()
        if n > 1 and abs(prev) <= taus[-2]:
            raise DegenerateMinor(
                f"minors of order n-1 and n both vanish (|{prev:.3e}| <= {taus[-2]:.3e}); "
                "the critical modulus is undefined")
        if all(s > 0 for s in signs[:-1]) and details[-1] < 0:
            r0 = -ms.nabla_tilde / prev
            return StabilityVerdict(Verdict.HOPF_CANDIDATE, r0, details, ms, alpha)
    return StabilityVerdict(Verdict.INDETERMINATE, None, details, ms, alpha)


def classify(p: CharPoly, alpha: float, tol: TolerancePolicy = DEFAULT_TOL) -> StabilityVerdict:
    """Generalised Routh-Hurwitz verdict for ``p`` at fractional order ``alpha``.

    Stable when every minor is positive; HopfCandidate when the top minor
    vanishes, the lower ones are positive and the auxiliary determinant is
    negative. Any other sign pattern is reported as Indeterminate.
    """
    alpha = check_alpha(alpha)
    return verdict_from_minors(minors_of(p, alpha), alpha, tol)


def critical_roots(v: StabilityVerdict, alpha: float):
    if v.tag is not Verdict.HOPF_CANDIDATE:
        raise NotCritical(f"verdict is {v.tag.value}, not HopfCandidate")
    alpha = check_alpha(alpha)
    z = cmath.rect(v.r0, alpha * math.pi / 2.0)
    return ComplexRoot.of(z), ComplexRoot.of(z.conjugate())


def _monic_roots(coeffs):
    lead = coeffs[0]
    return np.array([r.z for r in polycore.roots(CharPoly(tuple(c / lead for c in coeffs[1:])))])


def _trim(coeffs):
    coeffs = list(coeffs)
    tiny = 1e-14 * max(abs(c) for c in coeffs)
    while len(coeffs) > 1 and abs(coeffs[0]) <= tiny:
        coeffs.pop(0)
    return coeffs


def resultant_check(rp: RotatedPair) -> float:
    """Sylvester resultant Res(f1, f2) for formal degrees (n, n), via root products.

    With ``f = lc * prod(x - rho_i)`` of true degree d <= n and ``g`` of
    formal degree n::

        Res_{n,n}(f, g) = (-1)**(n*(n-d)) * lead(g)**(n-d) * lc**n * prod g(rho_i)

    The product runs over the roots of whichever polynomial has the larger
    relative leading coefficient.
    """
    n = rp.n
    f1, f2 = list(rp.abar), list(rp.bbar)
    if abs(f1[0]) >= abs(f2[0]):
        first, other, swap = f1, f2, False
    else:
        first, other, swap = f2, f1, True
    trimmed = _trim(first)
    d = len(trimmed) - 1
    if d < n and abs(other[0]) <= 1e-14 * max(map(abs, other)):
        return 0.0
    if d == 0:
        res = trimmed[0] ** n
    else:
        rho = _monic_roots(trimmed)
        res = trimmed[0] ** n * np.prod(np.polyval(other, rho))
    res = complex(res).real
    if d < n:
        res *= (-1) ** (n * (n - d)) * other[0] ** (n - d)
    if swap:
        res *= (-1) ** (n * n)
    return float(res)


def hurwitz_resultant_sign(n: int) -> int:
    """det H = sign * Res(f1, f2): the interleaved rows are a riffle of Sylvester's."""
    return (-1) ** (n * (n - 1) // 2)
