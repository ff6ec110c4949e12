"""Paired demo simulations on either side of a refined surface point."""
import numpy as np

from hopf_frh.bifurcate import ParamSystem, eval_criterion, refine_on_segment
from hopf_frh.fdesim import demo_config, integrate, oscillation_metric
from hopf_frh.frh import Verdict

# a crossing on the mu2 = 0 line, well away from the degenerate point
SEGMENT = ((1.2, 0.0), (1.8, 0.0))


def straddle(delta=0.1, T=200.0, h=0.05, x0=(0.1, 0.1, 0.1)):
    """Refine a surface point, then simulate at +-delta along the unit gradient.

    The top minor grows along the gradient, so the + side is the stable one.
    Returns (point, stable trajectory, unstable trajectory).
    """
    sys_ = ParamSystem.demo()
    p = refine_on_segment(sys_, *SEGMENT)
    g = np.array(p.gradient)
    step = delta * g / np.linalg.norm(g)
    mu = p.mu_star.as_array()
    stable, unstable = mu + step, mu - step
    assert eval_criterion(sys_, tuple(stable))[1].tag is Verdict.STABLE
    assert eval_criterion(sys_, tuple(unstable))[1].tag is not Verdict.STABLE
    runs = [integrate(demo_config(tuple(m), x0, T, h)) for m in (stable, unstable)]
    return p, runs[0], runs[1]


def separation(delta=0.1):
    p, s, u = straddle(delta)
    ms, mu = oscillation_metric(s), oscillation_metric(u)
    return ms, mu, s, u
