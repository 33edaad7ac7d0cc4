import math

import numpy as np
import pytest

from semiflow import (DomainViolation, FlowPoint, InvalidArgument, ResourceLimit,
                      Word, birkhoff, branch_point, branch_table, classify,
                      flow_count, inverse_branches, time_t_map, word_interval)
from semiflow.dynamics import Cone

from conftest import random_positive_ceiling
from oracles import crossing_simulation, enumerate_branches


def test_word_interval_single_letter():
    assert word_interval(Word((1,), 2)) == (0.0, 0.5)
    assert word_interval(Word((2,), 2)) == (0.5, 0.5)


def test_word_interval_two_letters():
    # points of the cylinder lie in P(1) with image in P(2); checking the
    # four dyadic quarters pins the interval
    left, width = word_interval(Word((2, 1), 2))
    assert (left, width) == (0.25, 0.25)
    for k in range(4):
        y = 0.25 * k + 0.1
        in_cyl = left <= y < left + width
        in_p1_to_p2 = (0 <= y < 0.5) and (0.5 <= (2 * y) % 1.0 < 1.0)
        assert in_cyl == in_p1_to_p2


def test_word_interval_all_ones_ell3():
    for n in (1, 3, 5):
        left, width = word_interval(Word((1,) * n, 3))
        assert left == 0.0
        assert width == pytest.approx(3.0 ** -n)


def test_word_interval_rejects_empty():
    with pytest.raises(InvalidArgument):
        word_interval(Word((), 2))


def test_branch_point_single_letters():
    assert branch_point(Word((2,), 2), 0.3) == pytest.approx(0.65)
    assert branch_point(Word((1,), 2), 0.3) == pytest.approx(0.15)


def test_branch_point_two_letters():
    y = branch_point(Word((2, 1), 2), 0.3)
    assert (4 * y) % 1.0 == pytest.approx(0.3, abs=1e-12)
    assert 0.25 <= y < 0.5


def test_branch_point_inverts_tau_n():
    rng = np.random.default_rng(5)
    for _ in range(30):
        ell = int(rng.choice([2, 3]))
        n = int(rng.integers(1, 9))
        letters = tuple(int(rng.integers(1, ell + 1)) for _ in range(n))
        x = float(rng.random())
        y = branch_point(Word(letters, ell), x)
        fwd = y
        for _ in range(n):
            fwd = (ell * fwd) % 1.0
        assert abs(fwd - x) <= 1e-12 or abs(abs(fwd - x) - 1.0) <= 1e-12
        left, width = word_interval(Word(letters, ell))
        assert left - 1e-12 <= y < left + width + 1e-12


def test_birkhoff_constant(f_const):
    for n in (1, 4, 7):
        a = Word((1,) * n, 2)
        assert birkhoff(f_const, a, 0.37, 0) == pytest.approx(n)
        assert birkhoff(f_const, a, 0.37, 1) == 0.0
        assert birkhoff(f_const, a, 0.37, 2) == 0.0


def test_birkhoff_single_letter(f_sin):
    a = Word((1,), 2)
    assert birkhoff(f_sin, a, 0.0, 0) == pytest.approx(1.0)
    assert birkhoff(f_sin, a, 0.0, 1) == pytest.approx(0.2 * math.pi)


def test_birkhoff_two_letter_hand_sum(f_sin):
    # prefix points of (2,1) at x=0 are 0.5 and 0.25
    a = Word((2, 1), 2)
    assert birkhoff(f_sin, a, 0.0, 0) == pytest.approx(2.2, abs=1e-12)
    assert birkhoff(f_sin, a, 0.0, 1) == pytest.approx(-0.2 * math.pi, abs=1e-12)
    assert birkhoff(f_sin, a, 0.0, 2) == pytest.approx(-0.05 * math.pi ** 2, abs=1e-12)


def test_birkhoff_rejects_high_order(f_sin):
    with pytest.raises(InvalidArgument):
        birkhoff(f_sin, Word((1,), 2), 0.0, 3)


def test_time_t_map_constant(f_const):
    out = time_t_map(f_const, FlowPoint(0.3, 0.0), 2.5)
    assert out.x == pytest.approx(0.2, abs=1e-12)
    assert out.s == pytest.approx(0.5, abs=1e-12)


def test_time_t_map_identity_at_zero(f_generic):
    z = FlowPoint(0.123, 0.4)
    out = time_t_map(f_generic, z, 0.0)
    assert (out.x, out.s) == (z.x, z.s)


def test_time_t_map_against_crossing_simulation(f_sin):
    x, s, n = crossing_simulation(f_sin, 0.1, 0.2, 5.0)
    out = time_t_map(f_sin, FlowPoint(0.1, 0.2), 5.0)
    assert out.x == pytest.approx(x, abs=1e-10)
    assert out.s == pytest.approx(s, abs=1e-10)
    assert flow_count(f_sin, 0.1, 0.2 + 5.0) == n


def test_time_t_map_rejects_negative_time(f_const):
    with pytest.raises(InvalidArgument):
        time_t_map(f_const, FlowPoint(0.3, 0.0), -1.0)


def test_time_t_map_rejects_outside_domain(f_sin):
    with pytest.raises(DomainViolation):
        time_t_map(f_sin, FlowPoint(0.75, 1.19), 1.0)  # f(0.75) = 0.8


def test_flow_count_floor(f_const):
    assert flow_count(f_const, 0.3, 2.5) == 2
    assert flow_count(f_const, 0.99, 0.0) == 0


def test_flow_count_inclusive_roof(f_const):
    # a Birkhoff sum exactly equal to the budget counts as crossed
    assert flow_count(f_const, 0.3, 3.0) == 3


def test_flow_count_sequential_oracle(f_sin):
    rng = np.random.default_rng(11)
    for _ in range(20):
        x = float(rng.random())
        T = float(rng.uniform(0, 12))
        _, _, n = crossing_simulation(f_sin, x, 0.0, T)
        assert flow_count(f_sin, x, T) == n
    assert flow_count(f_sin, 0.1, 7.0) == crossing_simulation(f_sin, 0.1, 0.0, 7.0)[2]


def test_flow_count_bounds(f_generic):
    cls = classify(f_generic, 0.9)
    for x in (0.0, 0.2, 0.77):
        for T in (1.0, 5.0, 11.0):
            n = flow_count(f_generic, x, T)
            assert T / cls.f_max - 1 <= n <= T / cls.f_min


def test_semigroup_property(f_sin):
    rng = np.random.default_rng(23)
    checked = 0
    for _ in range(200):
        x = float(rng.random())
        s = float(rng.uniform(0, f_sin(x)))
        t1, t2 = rng.uniform(0.3, 4.0, size=2)
        mid = time_t_map(f_sin, FlowPoint(x, s), t1)
        # skip near-roof intermediate landings, where crossing order flips
        if mid.s < 1e-6 or f_sin(mid.x) - mid.s < 1e-6:
            continue
        one = time_t_map(f_sin, mid, t2)
        two = time_t_map(f_sin, FlowPoint(x, s), t1 + t2)
        assert one.x == pytest.approx(two.x, abs=1e-9)
        assert one.s == pytest.approx(two.s, abs=1e-9)
        checked += 1
    assert checked > 150


def test_branches_constant_t25(f_const):
    branches = inverse_branches(f_const, FlowPoint(0.2, 0.0), 2.5, 0.0)
    assert len(branches) == 8
    assert {b.level for b in branches} == {3}
    assert all(b.expansion == 8.0 for b in branches)
    assert all(b.slope == 0.0 for b in branches)
    assert all(b.preimage.s == pytest.approx(0.5) for b in branches)
    assert sum(1.0 / b.expansion for b in branches) == 1.0


def test_branches_level_zero_when_s_exceeds_t(f_generic):
    z = FlowPoint(0.4, 0.9)
    branches = inverse_branches(f_generic, z, 0.5, 1.0)
    level0 = [b for b in branches if b.level == 0]
    assert len(level0) == 1
    assert level0[0].expansion == 1.0
    assert level0[0].preimage.s == pytest.approx(0.4)


def test_branches_forward_verification(f_sin):
    z = FlowPoint(0.3, 0.0)
    t = 8.0
    branches = inverse_branches(f_sin, z, t, 1.0)
    assert abs(sum(1.0 / b.expansion for b in branches) - 1.0) <= 1e-10
    for b in branches:
        fwd = time_t_map(f_sin, b.preimage, t)
        dx = min(abs(fwd.x - z.x), 1.0 - abs(fwd.x - z.x))
        assert dx <= 1e-10
        assert fwd.s == pytest.approx(z.s, abs=1e-10)


def test_branches_match_flat_enumeration_oracle(f_sin, f_generic):
    for f, z, t in [(f_sin, FlowPoint(0.3, 0.0), 6.0),
                    (f_generic, FlowPoint(0.77, 0.5), 5.0)]:
        got = inverse_branches(f, z, t, 0.5)
        want = enumerate_branches(f, z.x, z.s, t)
        assert len(got) == len(want)
        want_set = {(n, k) for n, k, _, _, _ in want}
        got_set = {(b.level, b.word.index) for b in got}
        assert got_set == want_set
        by_key = {(n, k): (y, sp, sl) for n, k, y, sp, sl in want}
        for b in got:
            y, sp, sl = by_key[(b.level, b.word.index)]
            assert b.preimage.x == pytest.approx(y, abs=1e-12)
            assert b.preimage.s == pytest.approx(sp, abs=1e-10)
            assert b.slope == pytest.approx(sl, abs=1e-10)


def test_branch_table_agrees_with_dfs(f_generic):
    z = FlowPoint(0.11, 0.3)
    t = 6.5
    table = branch_table(f_generic, z, t)
    branches = inverse_branches(f_generic, z, t, 0.0)
    flat = {(n, int(k)) for n in table.levels for k in table.indices[n]}
    assert flat == {(b.level, b.word.index) for b in branches}
    assert table.weight_sum() == pytest.approx(1.0, abs=1e-10)


def test_branches_sorted_lexicographically(f_sin):
    branches = inverse_branches(f_sin, FlowPoint(0.4, 0.1), 4.0, 0.5)
    letters = [b.word.letters for b in branches]
    assert letters == sorted(letters)


def test_branch_slope_bound_and_cone_width(f_generic):
    cls = classify(f_generic, 0.9)
    theta = cls.theta_f
    bound = cls.max_abs_f1 / (f_generic.ell - 1)
    for b in inverse_branches(f_generic, FlowPoint(0.25, 0.2), 5.0, theta):
        assert abs(b.slope) <= bound + 1e-12
        assert b.cone.half_width == theta * f_generic.ell ** -b.level


def test_coboundary_slope_identity(f_cob):
    # slopes telescope: slope = Psi'(x) - ell^-n Psi'(y)
    def dpsi(x):
        return 0.1 * math.pi * math.cos(2 * math.pi * x)

    z = FlowPoint(0.35, 0.0)
    for b in inverse_branches(f_cob, z, 6.0, 1.0):
        expect = dpsi(z.x) - f_cob.ell ** float(-b.level) * dpsi(b.preimage.x)
        assert b.slope == pytest.approx(expect, abs=1e-9)


def test_branch_sum_identity_random(f_const):
    rng = np.random.default_rng(7)
    for _ in range(25):
        f = random_positive_ceiling(rng)
        x = float(rng.random())
        s = float(rng.uniform(0, f(x)))
        t = float(rng.uniform(0.5, 5.0))
        branches = inverse_branches(f, FlowPoint(x, s), t, 0.0)
        assert abs(sum(1.0 / b.expansion for b in branches) - 1.0) <= 1e-10


def test_branch_cap_raises(f_sin):
    with pytest.raises(ResourceLimit) as info:
        inverse_branches(f_sin, FlowPoint(0.2, 0.0), 40.0, 0.0, cap=2 ** 12)
    assert "t_limit" in info.value.details
    with pytest.raises(ResourceLimit):
        branch_table(f_sin, FlowPoint(0.2, 0.0), 40.0, cap=2 ** 12)


def test_cone_intersection_rule():
    a = Cone(0.0, 0.1)
    b = Cone(0.25, 0.1)
    c = Cone(0.15, 0.05)
    assert not a.intersects(b)
    assert a.intersects(c)
    assert b.intersects(c)
    assert a.intersects(a)


def test_exact_roof_hit_assigned_once(f_const):
    # s + S_n - t lands exactly on 0 at level 2: the branch is recorded at
    # that level with s' = 0 and its extensions are not double counted
    branches = inverse_branches(f_const, FlowPoint(0.25, 0.5), 2.5, 0.0)
    assert {b.level for b in branches} == {2}
    assert all(b.preimage.s == 0.0 for b in branches)
    assert sum(1.0 / b.expansion for b in branches) == 1.0
