import math

import numpy as np
import pytest

from semiflow import DomainViolation, InvalidArgument, TrigPolynomial, classify
from semiflow.ceiling import CR_TRUNCATION_CAVEAT, ceiling_from_config
from semiflow.ceiling import eval as feval

from oracles import dense_max_abs_deriv


def test_eval_constant_derivative(f_const):
    assert feval(f_const, 0.37, 1) == 0.0


def test_eval_sin_first_derivative_closed_form(f_sin):
    assert feval(f_sin, 0.0, 1) == pytest.approx(0.4 * math.pi, abs=1e-14)


def test_eval_sin_second_derivative_closed_form(f_sin):
    assert feval(f_sin, 0.25, 2) == pytest.approx(-0.8 * math.pi ** 2, abs=1e-12)


def test_eval_third_derivative_available(f_sin):
    assert feval(f_sin, 0.1, 3) == pytest.approx(
        -0.2 * (2 * math.pi) ** 3 * math.cos(2 * math.pi * 0.1), rel=1e-12)


def test_eval_rejects_order_four(f_sin):
    with pytest.raises(InvalidArgument):
        feval(f_sin, 0.1, 4)


def test_eval_matches_finite_differences(f_generic):
    rng = np.random.default_rng(3)
    h = 1e-5
    for x in rng.random(20):
        fd = (feval(f_generic, x + h) - feval(f_generic, x - h)) / (2 * h)
        exact = feval(f_generic, x, 1)
        assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_classify_constant(f_const):
    cls = classify(f_const, 0.9)
    assert cls.theta_f == 0.0
    assert cls.f_min == 1.0 == cls.f_max
    assert cls.K > 1.0


def test_classify_sin_closed_form(f_sin):
    cls = classify(f_sin, 0.9)
    assert cls.theta_f == pytest.approx(math.pi / 2, abs=1e-10)
    assert cls.f_min == pytest.approx(0.8, abs=1e-10)
    assert cls.f_max == pytest.approx(1.2, abs=1e-10)


def test_classify_generic_against_dense_grid_oracle(f_generic):
    # frozen from the 1e6-point oracle: max |f'| of 1 + 0.3 sin(2 pi x)
    # + 0.1 cos(4 pi x)
    oracle_max = dense_max_abs_deriv(f_generic, 1)
    cls = classify(f_generic, 0.9)
    assert cls.theta_f == pytest.approx(oracle_max / 0.8, rel=1e-9)
    assert cls.max_abs_f1 >= oracle_max - 1e-10


def test_classify_rejects_nonpositive():
    f = TrigPolynomial(0.5, ((1, 0.0, 0.8),), 2)
    with pytest.raises(DomainViolation):
        classify(f, 0.9)


def test_classify_rejects_bad_gamma0(f_sin):
    with pytest.raises(InvalidArgument):
        classify(f_sin, 0.4)
    with pytest.raises(InvalidArgument):
        classify(f_sin, 1.0)


def test_classify_rejects_small_grid(f_sin):
    with pytest.raises(InvalidArgument):
        classify(f_sin, 0.9, grid_size=32)


def test_theta_f_antitone_in_gamma0(f_generic):
    # theta_f = max|f'|/(gamma0*ell - 1): a larger gamma0 enlarges the
    # denominator and so shrinks theta_f
    values = [classify(f_generic, g).theta_f for g in (0.6, 0.75, 0.9)]
    assert values[0] > values[1] > values[2]


def test_class_constant_inequalities(f_generic):
    cls = classify(f_generic, 0.9)
    assert 1.0 / cls.K < cls.f_min <= cls.f_max < cls.K
    assert cls.d2s_bound <= cls.theta_K
    assert cls.theta_K == pytest.approx(cls.K / (0.9 * 2 - 1), rel=1e-14)


def test_k_is_power_of_two_and_override(f_sin):
    cls = classify(f_sin, 0.9)
    assert math.log2(cls.K) == int(math.log2(cls.K))
    bigger = classify(f_sin, 0.9, k_override=2 * cls.K)
    assert bigger.K == 2 * cls.K
    with pytest.raises(InvalidArgument):
        classify(f_sin, 0.9, k_override=cls.K / 2)


def test_classify_carries_truncation_caveat(f_sin):
    assert CR_TRUNCATION_CAVEAT in classify(f_sin, 0.9).caveats


def test_harmonics_sorted_and_distinct():
    f = TrigPolynomial(1.0, ((3, 0.0, 0.01), (1, 0.0, 0.02)), 2)
    assert [k for k, _, _ in f.harmonics] == [1, 3]
    with pytest.raises(InvalidArgument):
        TrigPolynomial(1.0, ((1, 0.0, 0.1), (1, 0.1, 0.0)), 2)


def test_config_round_trip(f_generic):
    spec = {"ell": 2, "mean": 1.0, "harmonics": [[1, 0.0, 0.3], [2, 0.1, 0.0]]}
    assert ceiling_from_config(spec) == f_generic
