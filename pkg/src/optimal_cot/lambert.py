"""Real branches of the Lambert W function.

W(x) solves ``w * exp(w) = x``.  For ``-1/e <= x < 0`` there are two real
solutions: the principal branch ``W0`` (``w >= -1``) and the lower branch
``W-1`` (``w <= -1``).  Both are computed with Halley's method started from
the standard series / asymptotic guesses of Corless et al. (1996).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError

BRANCH_POINT = -math.exp(-1.0)
TOLERANCE = 1e-12
MAX_ITER = 100
# inputs this close to -1/e snap to w = -1
BRANCH_SNAP = 1e-15


class Branch(enum.Enum):
    PRINCIPAL = 0
    MINUS_ONE = -1


@dataclass(frozen=True)
class BranchedWResult:
    value: float
    branch: Branch
    residual: float


def _branch_point_series(x: float, sign: float) -> float:
    # w = -1 + p - p^2/3 + 11/72 p^3, p = +-sqrt(2(ex + 1))
    p = sign * math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3


def _initial_guess(x: float, branch: Branch) -> float:
    if branch is Branch.PRINCIPAL:
        if x < -0.25:
            return _branch_point_series(x, 1.0)
        if x < 3.0:
            return math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
        l1 = math.log(x)
        l2 = math.log(l1)
        return l1 - l2 + l2 / l1
    if x < -0.25:
        return _branch_point_series(x, -1.0)
    l1 = math.log(-x)
    l2 = math.log(-l1)
    return l1 - l2 + l2 / l1


def _residual(w: float, x: float) -> float:
    return abs(w * math.exp(w) - x)


def _halley(x: float, w: float, branch: Branch) -> float:
    scale = max(1.0, abs(x))
    for _ in range(MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 4e-16 * abs(x):
            return w
        wp1 = w + 1.0
        if wp1 == 0.0:
            # guess landed on the critical point; step off it along the branch
            w += 1e-8 if branch is Branch.PRINCIPAL else -1e-8
            continue
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        if abs(dw) <= 4e-16 * (1.0 + abs(w)):
            break
    else:
        raise ConvergenceError(f"Lambert W did not converge for x={x!r}")
    if _residual(w, x) > TOLERANCE * scale:
        raise ConvergenceError(
            f"Lambert W residual {_residual(w, x):.3e} above tolerance for x={x!r}"
        )
    return w


def _check_finite(x: float) -> float:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise DomainError(f"Lambert W undefined for non-finite input {x!r}")
    return x


def lambert_w0(x: float) -> float:
    """Principal branch W0(x) for x >= -1/e; returns w >= -1."""
    x = _check_finite(x)
    if x < BRANCH_POINT - BRANCH_SNAP:
        raise DomainError(f"W0 requires x >= -1/e, got {x!r}")
    if abs(x - BRANCH_POINT) <= BRANCH_SNAP:
        return -1.0
    if x == 0.0:
        return 0.0
    return max(_halley(x, _initial_guess(x, Branch.PRINCIPAL), Branch.PRINCIPAL), -1.0)


def lambert_wm1(x: float) -> float:
    """Lower branch W-1(x) for -1/e <= x < 0; returns w <= -1.

    On this branch W-1 falls from -1 at the branch point towards -inf as
    x approaches 0 from below.
    """
    x = _check_finite(x)
    if x < BRANCH_POINT - BRANCH_SNAP or x >= 0.0:
        raise DomainError(f"W-1 requires -1/e <= x < 0, got {x!r}")
    if abs(x - BRANCH_POINT) <= BRANCH_SNAP:
        return -1.0
    return min(_halley(x, _initial_guess(x, Branch.MINUS_ONE), Branch.MINUS_ONE), -1.0)


def lambert_w(x: float, branch: Branch = Branch.PRINCIPAL) -> BranchedWResult:
    """Evaluate either branch and report the achieved residual."""
    w = lambert_w0(x) if branch is Branch.PRINCIPAL else lambert_wm1(x)
    return BranchedWResult(value=w, branch=branch, residual=_residual(w, float(x)))
