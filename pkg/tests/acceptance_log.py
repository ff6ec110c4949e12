"""Collects one pass/fail line per acceptance criterion."""
RESULTS = {}


def record(number, title, ok, detail, seconds, budget):
    in_time = seconds < budget
    RESULTS[number] = (title, ok and in_time, f"{detail}; {seconds:.2f}s of {budget:g}s")
    return ok and in_time


def line(k):
    title, ok, detail = RESULTS[k]
    return f"{'PASS' if ok else 'FAIL'}  criterion {k}: {title} ({detail})"


def lines():
    return [line(k) for k in sorted(RESULTS)]
