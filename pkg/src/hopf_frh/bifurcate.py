"""Criterion evaluation over parameter space.

Scans a two-parameter window for sign changes of the top Hurwitz minor,
refines them by bisection and classifies each refined point with the
gradient / Hessian transversality test.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import exprdsl
from .errors import (AxisUnknown, NewtonDiverged, NoSignChange, NotOnSurface,
                     SideConditionViolated, StationaryOffSurface, WindowDegenerate)
from .frh import (DEFAULT_TOL, MinorSequence, StabilityVerdict, TolerancePolicy, Verdict,
                  critical_roots, hurwitz_stack, minor_stack, rotation_coefficients,
                  verdict_from_minors)
from .polycore import CharPoly, check_alpha

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
GRADIENT_REL = 1e-6
HESSIAN_REL = 1e-5
SEGMENT_REL = 1e-12


class Transversality(str, Enum):
    TRANSVERSAL = "Transversal"
    DEGENERATE_STATIONARY = "DegenerateStationary"
    INCONCLUSIVE = "Inconclusive"


class HessianVerdict(str, Enum):
    INDEFINITE = "Indefinite"
    POS_DEFINITE = "PosDefinite"
    NEG_DEFINITE = "NegDefinite"
    SEMIDEFINITE = "Semidefinite"


@dataclass(frozen=True)
class ParamPoint:
    names: tuple
    values: tuple

    def __post_init__(self):
        names = tuple(self.names)
        values = tuple(float(v) for v in self.values)
        if len(names) != len(values):
            raise ValueError("names and values differ in length")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"parameter values must be finite, got {values}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, **values) -> "ParamPoint":
        return cls(tuple(values), tuple(values.values()))

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def with_values(self, values) -> "ParamPoint":
        return ParamPoint(self.names, tuple(values))


@dataclass(frozen=True)
class ParamSystem:
    """Degree-n characteristic polynomial whose coefficients depend on parameters.

    Coefficients are expression ASTs evaluated with the parameters, ``alpha``
    and any named constants bound.
    """

    n: int
    alpha: float
    params: tuple
    coeff_ast: tuple
    constants: Mapping[str, float] = field(default_factory=dict)
    sources: tuple = ()
    label: str = "expressions"

    def __post_init__(self):
        check_alpha(self.alpha)
        if len(self.coeff_ast) != self.n:
            raise ValueError(f"need {self.n} coefficient expressions, got {len(self.coeff_ast)}")
        for name in tuple(self.params) + tuple(self.constants):
            if not exprdsl.IDENT_RE.match(name) or name in exprdsl.RESERVED:
                raise ValueError(f"invalid parameter name {name!r}")
        if len(set(self.params)) != len(self.params):
            raise ValueError(f"duplicate parameter names in {self.params}")
        known = set(self.params) | set(self.constants) | {"alpha"}
        for ast in self.coeff_ast:
            exprdsl.check_bound(ast, known)

    @classmethod
    def from_expressions(cls, sources: Sequence[str], params: Sequence[str], alpha: float,
                         constants: Optional[Mapping[str, float]] = None,
                         label: str = "expressions") -> "ParamSystem":
        sources = tuple(sources)
        return cls(len(sources), float(alpha), tuple(params),
                   tuple(exprdsl.parse(s) for s in sources),
                   dict(constants or {}), sources, label)

    @classmethod
    def demo(cls, k: Optional[Mapping[str, float]] = None, alpha: float = 1.1) -> "ParamSystem":
        system = exprdsl.DemoSystem(dict(k or {}), alpha)
        return cls.from_expressions(exprdsl.DEMO_COEFFS, exprdsl.DEMO_PARAMS, alpha,
                                    system.k, label="hopfield3")

    def point(self, values) -> ParamPoint:
        if isinstance(values, ParamPoint):
            return self._check(values)
        if isinstance(values, Mapping):
            return self._check(ParamPoint(tuple(values), tuple(values.values())))
        return self._check(ParamPoint(self.params, tuple(values)))

    def _check(self, mu: ParamPoint) -> ParamPoint:
        if set(mu.names) != set(self.params) or len(mu.names) != len(self.params):
            raise ValueError(f"expected parameters {self.params}, got {mu.names}")
        return ParamPoint(self.params, tuple(mu.as_dict()[k] for k in self.params))

    def coefficient_array(self, values: np.ndarray) -> np.ndarray:
        """Coefficients for a batch of parameter vectors of shape (m, k) -> (m, n)."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        env = dict(self.constants)
        env["alpha"] = self.alpha
        for j, name in enumerate(self.params):
            env[name] = values[:, j]
        out = np.empty((values.shape[0], self.n))
        for i, ast in enumerate(self.coeff_ast):
            out[:, i] = exprdsl.evaluate(ast, env)
        return out

    def charpoly(self, mu) -> CharPoly:
        mu = self.point(mu)
        return CharPoly(tuple(self.coefficient_array(mu.as_array()[None])[0]))


@dataclass(frozen=True)
class Batch:
    """Minors evaluated at m parameter vectors."""

    values: np.ndarray
    nabla: np.ndarray
    scale: np.ndarray
    tilde: np.ndarray
    tilde_scale: np.ndarray
    magnitude: np.ndarray

    def minors(self, i: int) -> MinorSequence:
        return MinorSequence(tuple(self.nabla[i].tolist()), float(self.tilde[i]),
                             tuple(self.scale[i].tolist()), float(self.tilde_scale[i]),
                             tuple(self.magnitude[i].tolist()))


def evaluate_batch(sys: ParamSystem, values: np.ndarray) -> Batch:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    coeffs = sys.coefficient_array(values)
    abar, bbar = rotation_coefficients(coeffs, sys.alpha)
    return Batch(values, *minor_stack(hurwitz_stack(abar, bbar)))


def side_conditions(batch: Batch, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Mask of points where every lower minor is positive and the auxiliary one negative."""
    ok = batch.tilde < -tol.tau(batch.tilde_scale)
    n = batch.nabla.shape[1]
    for p in range(n - 1):
        ok &= batch.nabla[:, p] > tol.tau(batch.scale[:, p])
    return ok


def eval_criterion(sys: ParamSystem, mu, tol: TolerancePolicy = DEFAULT_TOL):
    """Minors and verdict at one parameter point."""
    mu = sys.point(mu)
    ms = evaluate_batch(sys, mu.as_array()[None]).minors(0)
    return ms, verdict_from_minors(ms, sys.alpha, tol)


def nabla_n(sys: ParamSystem) -> Callable[[np.ndarray], float]:
    """The top minor as a scalar function of the full parameter vector."""

    def f(x):
        return float(evaluate_batch(sys, np.asarray(x, dtype=float)[None]).nabla[0, -1])

    # stencils evaluate all their points in one batch through this hook
    f.batch = lambda X: evaluate_batch(sys, X).nabla[:, -1]
    return f


def _values(f, X: np.ndarray) -> np.ndarray:
    batch = getattr(f, "batch", None)
    if batch is not None:
        return np.asarray(batch(X), dtype=float)
    return np.array([f(x) for x in X], dtype=float)


def _offsets(x: np.ndarray, steps) -> np.ndarray:
    """Points x + s*h_i*e_i for each coefficient s in ``steps``, ordered (i, s)."""
    k = x.size
    h = _EPS ** (1.0 / 3.0) * np.maximum(1.0, np.abs(x))
    pts = np.repeat(x[None], k * len(steps), axis=0).reshape(k, len(steps), k)
    for i in range(k):
        for a, s in enumerate(steps):
            pts[i, a, i] += s * h[i]
    return pts.reshape(-1, k), h


# --- finite differences ----------------------------------------------------

def fd_gradient(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Central differences with step eps**(1/3) * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    pts, h = _offsets(x, (1.0, -1.0))
    v = _values(f, pts).reshape(x.size, 2)
    return (v[:, 0] - v[:, 1]) / (2.0 * h)


def fd_hessian(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Symmetrised central second differences with step eps**(1/4) * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    return _second_differences(f, x, _EPS ** 0.25 * np.maximum(1.0, np.abs(x)))


def hessian_definiteness(H: np.ndarray, rel: float = HESSIAN_REL):
    """Classify a symmetric matrix by eigenvalue signs, ignoring |eig| <= rel * ||H||."""
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    cut = rel * np.max(np.abs(eig)) if eig.size else 0.0
    pos = eig > cut
    neg = eig < -cut
    if pos.any() and neg.any():
        verdict = HessianVerdict.INDEFINITE
    elif pos.all():
        verdict = HessianVerdict.POS_DEFINITE
    elif neg.all():
        verdict = HessianVerdict.NEG_DEFINITE
    else:
        verdict = HessianVerdict.SEMIDEFINITE
    return verdict, eig


@dataclass(frozen=True)
class TransversalityReport:
    gradient: tuple
    gradient_tol: float
    hessian: Optional[np.ndarray]
    eigenvalues: Optional[tuple]
    hessian_verdict: Optional[HessianVerdict]
    verdict: Transversality


def transversality_of(f: Callable[[np.ndarray], float], x, scale: float) -> TransversalityReport:
    """Gradient / Hessian sufficient conditions for a sign change of ``f`` at ``x``.

    ``scale`` (the plain Hadamard bound of the top block) sets the gradient
    threshold ``GRADIENT_REL * max(1, scale)``.
    """
    x = np.asarray(x, dtype=float)
    g = fd_gradient(f, x)
    gtol = GRADIENT_REL * max(1.0, scale)
    if np.linalg.norm(g) > gtol:
        return TransversalityReport(tuple(g.tolist()), gtol, None, None, None,
                                    Transversality.TRANSVERSAL)
    H = fd_hessian(f, x)
    hv, eig = hessian_definiteness(H)
    if hv is HessianVerdict.INDEFINITE:
        verdict = Transversality.TRANSVERSAL
    elif hv in (HessianVerdict.POS_DEFINITE, HessianVerdict.NEG_DEFINITE):
        verdict = Transversality.DEGENERATE_STATIONARY
    else:
        verdict = Transversality.INCONCLUSIVE
    return TransversalityReport(tuple(g.tolist()), gtol, H, tuple(eig.tolist()), hv, verdict)


def transversality(sys: ParamSystem, mu_star, tol: TolerancePolicy = DEFAULT_TOL) -> TransversalityReport:
    mu_star = sys.point(mu_star)
    batch = evaluate_batch(sys, mu_star.as_array()[None])
    value = batch.nabla[0, -1]
    scale = batch.scale[0, -1]
    if abs(value) > 10.0 * tol.tau(scale):
        raise NotOnSurface(f"top minor {value:.6e} exceeds 10*tau = {10 * tol.tau(scale):.3e}")
    return transversality_of(nabla_n(sys), mu_star.as_array(), batch.magnitude[0, -1])


# --- bifurcation points ----------------------------------------------------

@dataclass(frozen=True)
class BifurcationPoint:
    mu_star: ParamPoint
    r0: Optional[float]
    critical_pair: Optional[tuple]
    transversality: Transversality
    gradient: tuple
    hessian_verdict: Optional[HessianVerdict]
    minors: MinorSequence = field(repr=False)
    eigenvalues: Optional[tuple] = field(default=None, repr=False)


def _point_from(sys, mu: ParamPoint, ms: MinorSequence, verdict: StabilityVerdict,
                tr: TransversalityReport) -> BifurcationPoint:
    pair = None
    if verdict.tag is Verdict.HOPF_CANDIDATE:
        pair = critical_roots(verdict, sys.alpha)
    return BifurcationPoint(mu, verdict.r0, pair, tr.verdict, tr.gradient,
                            tr.hessian_verdict, ms, tr.eigenvalues)


def _bisect(sys: ParamSystem, A: np.ndarray, B: np.ndarray, fa: np.ndarray) -> np.ndarray:
    """Batched bisection of the top minor on segments A[i] -> B[i]; returns t in [0, 1]."""
    lo = np.zeros(len(A))
    hi = np.ones(len(A))
    sa = np.sign(fa)
    while np.any(hi - lo > SEGMENT_REL):
        mid = 0.5 * (lo + hi)
        fm = evaluate_batch(sys, A + mid[:, None] * (B - A)).nabla[:, -1]
        sm = np.sign(fm)
        same = sm == sa
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        exact = sm == 0
        lo = np.where(exact, mid, lo)
        hi = np.where(exact, mid, hi)
    return 0.5 * (lo + hi)


def refine_on_segment(sys: ParamSystem, mu_a, mu_b, tol: TolerancePolicy = DEFAULT_TOL) -> BifurcationPoint:
    """Locate the crossing of the top minor between two parameter points."""
    a = sys.point(mu_a).as_array()
    b = sys.point(mu_b).as_array()
    ends = evaluate_batch(sys, np.stack([a, b]))
    fa, fb = ends.nabla[:, -1]
    if not fa * fb < 0:
        raise NoSignChange(f"top minor has no sign change on the segment ({fa:.6e}, {fb:.6e})")
    side = side_conditions(ends, tol)
    if not side.all():
        raise SideConditionViolated("lower minors or the auxiliary determinant fail at an endpoint")
    t = _bisect(sys, a[None], b[None], np.array([fa]))[0]
    mu = sys.point(a + t * (b - a))
    return _finish(sys, mu, tol)


def _finish(sys, mu: ParamPoint, tol) -> BifurcationPoint:
    ms, verdict = eval_criterion(sys, mu, tol)
    if verdict.tag is not Verdict.HOPF_CANDIDATE:
        raise SideConditionViolated(
            f"refined point {mu.values} is {verdict.tag.value} (signs {verdict.details})")
    tr = transversality_of(nabla_n(sys), mu.as_array(), ms.magnitude[-1])
    return _point_from(sys, mu, ms, verdict, tr)


@dataclass
class ScanResult:
    points: list
    rejected: list
    axes: tuple
    resolution: tuple

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def scan_workers() -> int:
    env = os.environ.get("HOPF_FRH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def grid_scan(sys: ParamSystem, axes: Sequence[str], window: Sequence[float],
              resolution: Sequence[int], fixed: Optional[Mapping[str, float]] = None,
              tol: TolerancePolicy = DEFAULT_TOL, workers: Optional[int] = None) -> ScanResult:
    """Emit refined Hopf points on every grid edge where the top minor changes sign.

    Both endpoints of an edge must satisfy the side conditions. Points come
    back ordered by grid index (i, j, direction). Edges whose refined point
    fails re-validation are listed in ``rejected`` with the reason.
    """
    axes = tuple(axes)
    if len(axes) != 2 or axes[0] == axes[1]:
        raise AxisUnknown(f"need two distinct axes, got {axes}")
    for ax in axes:
        if ax not in sys.params:
            raise AxisUnknown(f"unknown axis {ax!r}; parameters are {sys.params}")
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x1 > x0 and y1 > y0) or not all(map(math.isfinite, (x0, x1, y0, y1))):
        raise WindowDegenerate(f"window {window} has no area")
    m1, m2 = (int(r) for r in resolution)
    if m1 < 2 or m2 < 2:
        raise WindowDegenerate(f"resolution {resolution} needs at least 2 nodes per axis")
    fixed = dict(fixed or {})
    rest = [p for p in sys.params if p not in axes]
    missing = [p for p in rest if p not in fixed]
    if missing:
        raise AxisUnknown(f"parameters {missing} are neither scanned nor fixed")

    xs = np.linspace(x0, x1, m1)
    ys = np.linspace(y0, y1, m2)
    ix = sys.params.index(axes[0])
    iy = sys.params.index(axes[1])
    base = np.array([fixed.get(p, 0.0) for p in sys.params], dtype=float)

    def rows(i_lo, i_hi):
        gx, gy = np.meshgrid(xs[i_lo:i_hi], ys, indexing="ij")
        vals = np.tile(base, (gx.size, 1))
        vals[:, ix] = gx.ravel()
        vals[:, iy] = gy.ravel()
        return evaluate_batch(sys, vals)

    workers = workers or scan_workers()
    chunk = max(1, -(-m1 // (4 * workers)))
    bounds = [(i, min(m1, i + chunk)) for i in range(0, m1, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda b: rows(*b), bounds))
    values = np.concatenate([p.values for p in parts])
    top = np.concatenate([p.nabla[:, -1] for p in parts]).reshape(m1, m2)
    ok = np.concatenate([side_conditions(p, tol) for p in parts]).reshape(m1, m2)

    edges = []
    # (i, j, direction): direction 0 steps along the first axis, 1 along the second
    for d, (di, dj) in enumerate(((1, 0), (0, 1))):
        a_top = top[:m1 - di, :m2 - dj]
        b_top = top[di:, dj:]
        hit = (a_top * b_top < 0) & ok[:m1 - di, :m2 - dj] & ok[di:, dj:]
        for i, j in zip(*np.nonzero(hit)):
            edges.append((int(i), int(j), d))
    edges.sort()
    if not edges:
        return ScanResult([], [], axes, (m1, m2))

    grid_vals = values.reshape(m1, m2, -1)
    A = np.array([grid_vals[i, j] for i, j, d in edges])
    B = np.array([grid_vals[i + (d == 0), j + (d == 1)] for i, j, d in edges])
    fa = np.array([top[i, j] for i, j, d in edges])
    t = _bisect(sys, A, B, fa)
    refined = A + t[:, None] * (B - A)

    points, rejected = [], []
    for edge, mu_vals in zip(edges, refined):
        mu = sys.point(mu_vals)
        try:
            points.append(_finish(sys, mu, tol))
        except SideConditionViolated as exc:
            rejected.append((edge, str(exc)))
    if rejected:
        log.warning("%d of %d sign-change edges failed re-validation", len(rejected), len(edges))
    return ScanResult(points, rejected, axes, (m1, m2))


# --- degenerate points -----------------------------------------------------

def fd_gradient4(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Fourth-order central differences, step eps**(1/3) * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    pts, h = _offsets(x, (-2.0, -1.0, 1.0, 2.0))
    v = _values(f, pts).reshape(x.size, 4)
    return (v[:, 0] - 8.0 * v[:, 1] + 8.0 * v[:, 2] - v[:, 3]) / (12.0 * h)


def fd_hessian_richardson(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Richardson-extrapolated second differences (steps h and h/2)."""
    x = np.asarray(x, dtype=float)
    coarse = fd_hessian(f, x)
    fine = _second_differences(f, x, 0.5 * _EPS ** 0.25 * np.maximum(1.0, np.abs(x)))
    return (4.0 * fine - coarse) / 3.0


def _second_differences(f, x, h):
    k = x.size
    pts = [x]
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    for i in range(k):
        for s in (1.0, -1.0):
            p = x.copy()
            p[i] += s * h[i]
            pts.append(p)
    for i, j in pairs:
        for si, sj in ((1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)):
            p = x.copy()
            p[i] += si * h[i]
            p[j] += sj * h[j]
            pts.append(p)
    v = _values(f, np.array(pts))
    f0 = v[0]
    H = np.empty((k, k))
    for i in range(k):
        H[i, i] = (v[1 + 2 * i] - 2.0 * f0 + v[2 + 2 * i]) / h[i] ** 2
    base = 1 + 2 * k
    for m, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = v[base + 4 * m: base + 4 * m + 4]
        H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4.0 * h[i] * h[j])
    return 0.5 * (H + H.T)


def find_degenerate(sys: ParamSystem, guess, tol: TolerancePolicy = DEFAULT_TOL,
                    max_iter: int = 100, damping_floor: float = 1e-8) -> BifurcationPoint:
    """Damped Newton search for a stationary point of the top minor.

    Solves grad(top minor) = 0 with a finite-difference Jacobian. Degenerate
    stationary points have a singular Hessian, so Newton is only linearly
    convergent there and the low-order difference bias would decide where it
    stops; the iteration therefore uses fourth-order differences internally.
    The reported gradient and Hessian verdict use the standard steps.
    """
    f = nabla_n(sys)
    x = sys.point(guess).as_array()

    def gtol_at(x):
        return GRADIENT_REL * max(1.0, float(evaluate_batch(sys, x[None]).magnitude[0, -1]))

    def grad_norm(x):
        try:
            return float(np.linalg.norm(fd_gradient4(f, x)))
        except ArithmeticError:
            return math.inf

    converged = False
    for _ in range(max_iter):
        g = fd_gradient4(f, x)
        gnorm = float(np.linalg.norm(g))
        small = gnorm <= gtol_at(x)
        J = fd_hessian_richardson(f, x)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1.0 / _EPS:
            if small:
                converged = True
                break
            raise NewtonDiverged(f"singular Newton Jacobian at {x.tolist()}")
        step = np.linalg.solve(J, -g)
        lam = 1.0
        while lam >= damping_floor:
            trial = x + lam * step
            if np.all(np.isfinite(trial)) and grad_norm(trial) < gnorm:
                break
            lam *= 0.5
        else:
            if small:
                # difference noise floor: no further decrease is measurable
                converged = True
                break
            raise NewtonDiverged(f"line search stalled at {x.tolist()} (|grad| = {gnorm:.3e})")
        x = trial
        if np.linalg.norm(lam * step) <= 1e-10 * max(1.0, np.linalg.norm(x)) and grad_norm(x) <= gtol_at(x):
            converged = True
            break
    if not converged and grad_norm(x) > gtol_at(x):
        raise NewtonDiverged(f"no stationary point within {max_iter} iterations; last {x.tolist()}")

    mu = sys.point(x)
    ms = evaluate_batch(sys, x[None]).minors(0)
    value, scale = ms.nabla[-1], ms.scale[-1]
    if abs(value) > tol.tau(scale):
        raise StationaryOffSurface(
            f"stationary point {x.tolist()} has top minor {value:.6e} (tau {tol.tau(scale):.3e})")
    tr = transversality_of(f, x, ms.magnitude[-1])
    r0 = None
    pair = None
    prev, prev_scale = ms.nabla_prev(), ms.prev_scale()
    if abs(prev) > tol.tau(prev_scale):
        verdict = verdict_from_minors(ms, sys.alpha, tol)
        if verdict.tag is Verdict.HOPF_CANDIDATE:
            r0 = verdict.r0
            pair = critical_roots(verdict, sys.alpha)
    return BifurcationPoint(mu, r0, pair, tr.verdict, tr.gradient, tr.hessian_verdict, ms,
                            tr.eigenvalues)
