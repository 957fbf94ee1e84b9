"""Real roots of cubic polynomials (closed form plus Newton polishing)."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError


def _poly(c3, c2, c1, c0, x):
    return ((c3 * x + c2) * x + c1) * x + c0


def _dpoly(c3, c2, c1, x):
    return (3.0 * c3 * x + 2.0 * c2) * x + c1


def _polish(c3, c2, c1, c0, x, steps=4):
    for _ in range(steps):
        d = _dpoly(c3, c2, c1, x)
        if d == 0.0:
            break
        x_new = x - _poly(c3, c2, c1, c0, x) / d
        if abs(_poly(c3, c2, c1, c0, x_new)) > abs(_poly(c3, c2, c1, c0, x)):
            break
        x = x_new
    return x


def cubic_real_roots(c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """All real roots of ``c3 x^3 + c2 x^2 + c1 x + c0``, ascending.

    Trigonometric form when there are three real roots, Cardano's form
    (in its cancellation-free arrangement) otherwise; every root gets a few
    Newton steps afterwards.
    """
    if c3 == 0.0:
        raise InputError("leading coefficient must be non-zero")
    a, b, c = c2 / c3, c1 / c3, c0 / c3
    shift = a / 3.0
    P = b - a * a / 3.0
    Q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    disc = (Q / 2.0) ** 2 + (P / 3.0) ** 3

    if P == 0.0 and Q == 0.0:
        ts = [0.0]
    elif disc < 0.0:
        r = 2.0 * math.sqrt(-P / 3.0)
        arg = (3.0 * Q / (P * r)) if r > 0 else 0.0
        phi = math.acos(min(1.0, max(-1.0, arg)))
        ts = [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)]
    else:
        A = -math.copysign(np.cbrt(abs(Q) / 2.0 + math.sqrt(disc)), Q)
        B = -P / (3.0 * A) if A != 0.0 else 0.0
        ts = [A + B]
        if disc == 0.0 and A != 0.0:
            ts.append(-A)  # double root -(A+B)/2 with A == B

    roots = sorted(_polish(c3, c2, c1, c0, t - shift) for t in ts)
    out: list[float] = []
    for x in roots:
        if out and abs(x - out[-1]) <= 1e-6 * max(1.0, abs(x)):
            # a double root is only determined to about sqrt(eps); merge the pair
            mid = 0.5 * (x + out[-1])
            if abs(x - out[-1]) <= 1e-12 * max(1.0, abs(x)) or cubic_residual_ok(c3, c2, c1, c0, mid, 1e-14):
                out[-1] = float(mid)
                continue
        out.append(float(x))
    return out


def cubic_positive_roots(c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """Strictly positive real roots, ascending."""
    return [x for x in cubic_real_roots(c3, c2, c1, c0) if x > 0.0]


def cubic_residual_ok(c3, c2, c1, c0, x, rtol: float = 1e-10) -> bool:
    scale = max(abs(c3), abs(c2), abs(c1), abs(c0)) * (1.0 + abs(x) ** 3)
    return abs(_poly(c3, c2, c1, c0, x)) <= rtol * scale
