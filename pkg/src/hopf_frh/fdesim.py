"""Caputo fractional initial-value problems of order 1 < alpha < 2.

Fractional Adams-Bashforth-Moulton predictor-corrector (one corrector pass)
with the full memory term summed directly at every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import StepTooLarge, TrajectoryTooShort
from .exprdsl import DemoSystem
from .polycore import check_alpha

MIN_STEPS = 50


@dataclass(frozen=True, eq=False)
class SimConfig:
    alpha: float
    rhs: Callable[[np.ndarray], np.ndarray]
    x0: tuple
    T: float
    h: float
    v0: Optional[tuple] = None
    model: Optional[DemoSystem] = None
    mu: tuple = ()

    def __post_init__(self):
        check_alpha(self.alpha)
        x0 = tuple(float(v) for v in np.ravel(self.x0))
        v0 = (0.0,) * len(x0) if self.v0 is None else tuple(float(v) for v in np.ravel(self.v0))
        if len(v0) != len(x0):
            raise ValueError(f"x0 has {len(x0)} components but v0 has {len(v0)}")
        if not all(math.isfinite(v) for v in x0 + v0):
            raise ValueError("initial state must be finite")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"horizon must be positive, got {self.T}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"step must be positive, got {self.h}")
        if self.h > self.T / MIN_STEPS:
            raise StepTooLarge(f"step {self.h} exceeds T/{MIN_STEPS} = {self.T / MIN_STEPS}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v0", v0)
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))


def demo_config(mu, x0=(0.1, 0.1, 0.1), T: float = 200.0, h: float = 0.05, v0=None,
                system: Optional[DemoSystem] = None) -> SimConfig:
    system = system or DemoSystem()
    if len(tuple(x0)) != 3:
        raise ValueError("the demo network has three states")
    return SimConfig(system.alpha, system.vector_field(mu), x0, T, h, v0, system, tuple(mu))


@dataclass(frozen=True, eq=False)
class SimTrajectory:
    times: np.ndarray
    states: np.ndarray
    max_residual: float
    blowup: Optional[int] = None
    config: Optional[SimConfig] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _predictor_weights(alpha, N):
    m = np.arange(N + 1, dtype=float)
    w = np.zeros(N + 1)
    w[1:] = m[1:] ** alpha - m[:-1] ** alpha
    return w


def _corrector_weights(alpha, N):
    m = np.arange(N + 2, dtype=float)
    p = alpha + 1.0
    w = np.zeros(N + 1)
    w[1:] = m[2:] ** p + m[:-2] ** p - 2.0 * m[1:-1] ** p
    return w


def integrate(cfg: SimConfig) -> SimTrajectory:
    """PECE integration of ``D^alpha x = g(x)`` with ``x(0) = x0``, ``x'(0) = v0``.

    Stops at the first non-finite state; ``blowup`` then holds its step index
    and the trajectory ends at the last finite state.
    """
    a = cfg.alpha
    h = cfg.h
    N = cfg.steps
    x0 = np.array(cfg.x0)
    v0 = np.array(cfg.v0)
    d = x0.size
    t = h * np.arange(N + 1)
    B = _predictor_weights(a, N) * h ** a / math.gamma(a + 1.0)
    A = _corrector_weights(a, N) * h ** a / math.gamma(a + 2.0)
    cscale = h ** a / math.gamma(a + 2.0)

    X = np.empty((N + 1, d))
    G = np.empty((N + 1, d))
    X[0] = x0
    G[0] = cfg.rhs(x0)
    gap = 0.0
    blowup = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            taylor = x0 + v0 * t[k + 1]
            # B[k+1-j] for j = 0..k
            pred = taylor + B[k + 1:0:-1] @ G[:k + 1]
            a0 = (k ** (a + 1.0) - (k - a) * (k + 1) ** a) * cscale
            memory = a0 * G[0]
            if k > 0:
                # A[k+1-j] for j = 1..k
                memory = memory + A[k:0:-1] @ G[1:k + 1]
            gp = cfg.rhs(pred)
            x = taylor + memory + cscale * gp
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(pred))):
                blowup = k + 1
                break
            X[k + 1] = x
            G[k + 1] = cfg.rhs(x)
            gap = max(gap, float(np.max(np.abs(x - pred))))
    stop = N + 1 if blowup is None else blowup
    return SimTrajectory(t[:stop], X[:stop], gap, blowup, cfg)


def oscillation_metric(tr: SimTrajectory, tail_fraction: float = 0.25) -> float:
    """Peak-to-peak amplitude of ``|x(t)|`` over the trailing part of the horizon."""
    if not 0.0 < tail_fraction <= 0.5:
        raise ValueError(f"tail_fraction must lie in (0, 0.5], got {tail_fraction}")
    n = len(tr.times)
    if n < 2:
        raise TrajectoryTooShort(f"trajectory has {n} samples")
    start = tr.times[-1] - tail_fraction * (tr.times[-1] - tr.times[0])
    tail = tr.norms[tr.times >= start - 1e-12 * max(1.0, abs(start))]
    if tail.size < 2:
        raise TrajectoryTooShort(f"tail of fraction {tail_fraction} holds {tail.size} sample(s)")
    return float(tail.max() - tail.min())
