import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsmakit.channels import trial_rng
from rsmakit.rates import rate_uplink, uplink_sum_capacity


def test_two_user_corner_points():
    # symmetric unit setup; the stream decoded second is interference-free
    H = np.array([[1.0, 1.0]], dtype=complex)
    rep = rate_uplink({(1, 1): 1.0, (2, 1): 1.0}, [(2, 1), (1, 1)], H, 1.0)
    assert rep.totals[1] == pytest.approx(1.0, abs=1e-12)  # log2(2)
    assert rep.totals[2] == pytest.approx(math.log2(1.5), abs=1e-12)
    rep_rev = rate_uplink({(1, 1): 1.0, (2, 1): 1.0}, [(1, 1), (2, 1)], H, 1.0)
    assert rep_rev.totals[2] == pytest.approx(1.0, abs=1e-12)
    assert rep_rev.totals[1] == pytest.approx(math.log2(1.5), abs=1e-12)


@given(
    st.floats(0.05, 1.0),
    st.floats(0.05, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.permutations([0, 1, 2, 3]),
)
@settings(max_examples=60, deadline=None)
def test_siso_telescoping_identity(p1, p2, b1, b2, perm):
    h1, h2 = 1.0, 0.7
    powers = {
        (1, 1): p1 * b1,
        (1, 2): p1 * (1 - b1),
        (2, 1): p2 * b2,
        (2, 2): p2 * (1 - b2),
    }
    keys = [(1, 1), (1, 2), (2, 1), (2, 2)]
    order = [keys[i] for i in perm if powers[keys[i]] > 0]
    H = np.array([[h1, h2]], dtype=complex)
    rep = rate_uplink(powers, order, H, 1.0)
    total = sum(rep.stream_rate.values())
    expected = math.log2(1.0 + p1 * h1**2 + p2 * h2**2)
    assert total == pytest.approx(expected, abs=1e-12)


def test_face_point_closed_form_split():
    # dominant-face target achieved exactly by one split, no time sharing;
    # split solved in closed form here and cross-checked by a 1-D grid
    target_r2 = 0.785
    g = 1.0  # P2 |h|^2 / sigma^2
    p12 = g / (2.0**target_r2 - 1.0) - 1.0
    assert 0.0 <= p12 <= 1.0
    powers = {(1, 1): 1.0 - p12, (2, 1): 1.0, (1, 2): p12}
    order = [k for k in [(1, 1), (2, 1), (1, 2)] if powers[k] > 0]
    H = np.array([[1.0, 1.0]], dtype=complex)
    rep = rate_uplink(powers, order, H, 1.0)
    assert rep.totals[2] == pytest.approx(target_r2, abs=1e-9)
    assert rep.totals[1] == pytest.approx(math.log2(3.0) - target_r2, abs=1e-9)
    # 1-D grid cross-check: no grid split does better at matching the target
    grid = np.linspace(0.0, 1.0, 20001)
    r2_grid = np.log2(1.0 + g / (1.0 + grid))
    best = grid[int(np.argmin(np.abs(r2_grid - target_r2)))]
    assert best == pytest.approx(p12, abs=1e-4)


def test_mimo_mmse_sic_telescopes_to_log_det():
    rng = trial_rng(5)
    M, K = 3, 2
    H = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
    powers = {(1, 1): 0.6, (1, 2): 0.9, (2, 1): 1.2}
    order = [(2, 1), (1, 1), (1, 2)]
    rep = rate_uplink(powers, order, H, sigma2=1.0)
    total = sum(rep.stream_rate.values())
    expected = uplink_sum_capacity((1.5, 1.2), H, 1.0)
    assert total == pytest.approx(expected, abs=1e-10)


def test_invalid_order_rejected():
    H = np.array([[1.0, 1.0]], dtype=complex)
    with pytest.raises(ValueError, match="permutation"):
        rate_uplink({(1, 1): 1.0, (2, 1): 1.0}, [(1, 1)], H, 1.0)
    with pytest.raises(ValueError, match="two substreams"):
        rate_uplink({(1, 1): 1.0, (1, 2): 1.0, (1, 3): 1.0, (2, 1): 1.0},
                    [(1, 1), (1, 2), (1, 3), (2, 1)], H, 1.0)


def test_budget_enforced():
    H = np.array([[1.0, 1.0]], dtype=complex)
    with pytest.raises(ValueError, match="budget"):
        rate_uplink({(1, 1): 0.9, (1, 2): 0.2, (2, 1): 1.0},
                    [(1, 1), (1, 2), (2, 1)], H, 1.0, budgets=(1.0, 1.0))
