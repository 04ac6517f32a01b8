import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from optimal_cot.errors import DomainError
from optimal_cot.lambert import BRANCH_POINT, Branch, lambert_w, lambert_w0, lambert_wm1


def bisect_w(x, lo, hi, iters=200):
    """Root of w*exp(w) - x on [lo, hi] by plain bisection (independent oracle)."""
    f = lambda w: w * math.exp(w) - x  # noqa: E731
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rel_residual(w, x):
    return abs(w * math.exp(w) - x) / max(1.0, abs(x))


def test_trivial_values():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
    assert lambert_w0(-1 / math.e) == -1.0
    assert lambert_wm1(-1 / math.e) == -1.0


def test_wm1_minus_point_two_matches_bisection():
    w = lambert_wm1(-0.2)
    assert w <= -1
    assert abs(w * math.exp(w) + 0.2) <= 1e-12
    assert w == pytest.approx(bisect_w(-0.2, -50.0, -1.0), abs=1e-10)


def test_wm1_ordering_against_bisection():
    # W-1 decreases as x moves from -1/e towards 0
    a, b = lambert_wm1(-0.3), lambert_wm1(-0.2)
    assert a > b
    assert bisect_w(-0.3, -50.0, -1.0) > bisect_w(-0.2, -50.0, -1.0)
    assert a == pytest.approx(bisect_w(-0.3, -50.0, -1.0), abs=1e-10)


@pytest.mark.parametrize("x", [-0.35, -0.3, -0.1, -1e-3, -1e-8, -1e-100])
def test_wm1_against_bisection(x):
    assert lambert_wm1(x) == pytest.approx(bisect_w(x, -300.0, -1.0), rel=1e-10)


@pytest.mark.parametrize("x", [-0.36, -0.2, 0.5, 3.0, 100.0, 1e10])
def test_w0_against_bisection(x):
    assert lambert_w0(x) == pytest.approx(bisect_w(x, -1.0, 30.0), rel=1e-10, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        lambert_w0(-0.5)
    with pytest.raises(DomainError):
        lambert_wm1(0.0)
    with pytest.raises(DomainError):
        lambert_wm1(0.1)
    with pytest.raises(DomainError):
        lambert_wm1(-0.4)
    with pytest.raises(DomainError):
        lambert_w0(float("nan"))


def test_branch_point_snap():
    assert lambert_wm1(BRANCH_POINT + 5e-16) == -1.0
    assert lambert_w0(BRANCH_POINT - 5e-16) == -1.0


def test_branched_result_reports_residual():
    r = lambert_w(-0.2, Branch.MINUS_ONE)
    assert r.branch is Branch.MINUS_ONE
    assert r.value <= -1
    assert r.residual <= 1e-12


@given(st.floats(min_value=BRANCH_POINT + 1e-12, max_value=-1e-300))
def test_branch_ordering(x):
    assert lambert_wm1(x) <= -1.0 <= lambert_w0(x)


@given(
    st.floats(min_value=BRANCH_POINT + 1e-9, max_value=-1e-12),
    st.floats(min_value=BRANCH_POINT + 1e-9, max_value=-1e-12),
)
def test_wm1_strictly_decreasing_in_x(x1, x2):
    if x1 == x2:
        return
    lo, hi = sorted((x1, x2))
    assert lambert_wm1(lo) > lambert_wm1(hi)


def test_w0_increasing():
    xs = np.concatenate([BRANCH_POINT + np.logspace(-12, -0.5, 200), np.logspace(-5, 5, 200)])
    ws = [lambert_w0(x) for x in np.sort(xs)]
    assert all(b > a for a, b in zip(ws, ws[1:]))


@given(st.floats(min_value=-1 / math.e, max_value=1e200))
def test_w0_residual_property(x):
    assert rel_residual(lambert_w0(x), x) <= 1e-12
