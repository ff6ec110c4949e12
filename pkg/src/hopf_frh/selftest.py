"""Fast randomized property checks behind ``hopf-frh selftest``."""
from __future__ import annotations

import math
import sys
import time

import numpy as np

from . import exprdsl, frh
from .fdesim import SimConfig, integrate
from .polycore import CharPoly, roots, sector_classify

SEED = 20240611


def stable_roots(rng, count, alpha, margin=0.05):
    """``count`` roots (conjugates included) strictly inside the stable sector."""
    edge = alpha * math.pi / 2.0
    out = []
    while len(out) < count:
        rho = rng.uniform(0.2, 3.0)
        if count - len(out) == 1 or rng.random() < 0.3:
            out.append(-rho)
        else:
            theta = rng.uniform(edge + margin, math.pi - 1e-3)
            z = rho * complex(math.cos(theta), math.sin(theta))
            out += [z, z.conjugate()]
    return out


def planted(rng, n, alpha, r0):
    """Degree-n polynomial with roots ``r0*exp(+-i*alpha*pi/2)`` and the rest in the stable sector."""
    z = r0 * complex(math.cos(alpha * math.pi / 2.0), math.sin(alpha * math.pi / 2.0))
    rts = [z, z.conjugate()] + stable_roots(rng, n - 2, alpha)
    return CharPoly.from_roots(rts)


def check_nabla1(rng):
    a1 = rng.uniform(-100, 100, 1000)
    alpha = rng.uniform(1.0 + 1e-9, 2.0 - 1e-9, 1000)
    worst = 0.0
    for a, al in zip(a1, alpha):
        ms = frh.minors_of(CharPoly((a,)), al)
        err = abs(ms.nabla[0] - a * math.sin(al * math.pi / 2.0)) / max(1.0, abs(a))
        worst = max(worst, err)
    return worst <= 1e-12, f"max mixed error {worst:.3e}"


def check_oracle(rng):
    bad = checked = 0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        alpha = float(rng.choice([1.1, 1.3, 1.5, 1.7, 1.9]))
        p = CharPoly(tuple(rng.uniform(-5, 5, n)))
        rts = roots(p)
        edge = alpha * math.pi / 2.0
        if any(abs(abs(r.argument) - edge) < 1e-5 or r.modulus < 1e-5 for r in rts):
            continue
        checked += 1
        stable = sector_classify(rts, alpha).all_stable
        if (frh.classify(p, alpha).tag is frh.Verdict.STABLE) != stable:
            bad += 1
    return bad == 0, f"{bad} disagreement(s) in {checked} samples"


def check_resultant(rng):
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        alpha = float(rng.uniform(1.05, 1.95))
        rp = frh.rotate(CharPoly(tuple(rng.uniform(-5, 5, n))), alpha)
        H = frh.build_matrix(rp)
        ms = frh.minors(H)
        res = frh.resultant_check(rp)
        worst = max(worst, abs(abs(ms.nabla[-1]) - abs(res)) / max(1.0, ms.magnitude[-1]))
    return worst <= 1e-7, f"max relative gap {worst:.3e}"


def check_planted(rng):
    worst = 0.0
    # beyond degree 4 the extra roots crowd into the narrow stable sector at
    # large alpha and the order n-1 minor drops below the sign tolerance
    for _ in range(20):
        n = int(rng.integers(2, 5))
        alpha = float(rng.uniform(1.1, 1.9))
        r0 = float(rng.uniform(0.1, 10.0))
        v = frh.classify(planted(rng, n, alpha, r0), alpha)
        if v.tag is not frh.Verdict.HOPF_CANDIDATE:
            return False, f"planted pair classified {v.tag.value}"
        worst = max(worst, abs(v.r0 - r0) / r0)
    return worst <= 1e-6, f"max relative r0 error {worst:.3e}"


def check_parser(rng):
    sources = ["a1*sin(9*pi/20)", "-mu1^2 + 2*mu1*mu2", "exp(-x)/(1 + x^2)",
               "2*sin(pi/2) - -1^2", "tanh(abs(x - 3))^3"]
    for s in sources:
        ast = exprdsl.parse(s)
        if exprdsl.parse(exprdsl.to_source(ast)) != ast:
            return False, f"round trip changed {s!r}"
    ok = exprdsl.evaluate(exprdsl.parse("2*sin(pi/2) - -1^2"), {}) == 3.0
    return ok, "round trips and precedence"


def check_simulator(rng):
    tr = integrate(SimConfig(1.5, lambda x: 0.0 * x, (1.0, 0.0, 0.0), 1.0, 0.01, (0.0, 1.0, 0.0)))
    exact = np.array([1.0, 0.0, 0.0]) + np.outer(tr.times, [0.0, 1.0, 0.0])
    err = float(np.max(np.abs(tr.states - exact)))
    return err == 0.0, f"zero-field deviation {err:.3e}"


CHECKS = [
    ("nabla1 identity", check_nabla1),
    ("stable iff roots in sector", check_oracle),
    ("top minor vs resultant", check_resultant),
    ("planted critical pair", check_planted),
    ("expression round trip", check_parser),
    ("zero-field exactness", check_simulator),
]


def run_all(out=None) -> bool:
    out = out or sys.stdout
    rng = np.random.default_rng(SEED)
    all_ok = True
    for name, fn in CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failure, report and move on
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t:.2f}s)\n")
    return all_ok
