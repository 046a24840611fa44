"""The ten acceptance criteria at their stated tolerances.

Each test records its one-line result; conftest prints them in the
terminal summary.  ``python tests/test_acceptance.py`` prints them directly.
"""

import pytest

from canham import acceptance

RESULTS = []


def check(result):
    RESULTS.append(result.line())
    print(result.line())
    assert result.passed, result.details


def test_criterion_1_green_residual():
    check(acceptance.criterion_1())


def test_criterion_2_ld_oracle():
    check(acceptance.criterion_2())


def test_criterion_3_latitude_spheres():
    check(acceptance.criterion_3())


def test_criterion_4_linearization_order():
    check(acceptance.criterion_4())


def test_criterion_5_bridge_expansion():
    check(acceptance.criterion_5())


@pytest.mark.parametrize("m,tau", acceptance.FLAGSHIP, ids=[f"m{m}" for m, _ in acceptance.FLAGSHIP])
def test_criterion_6_flagship(m, tau):
    res = acceptance.criterion_6(((m, tau),))
    res.name += f" m={m} tau={tau:g}"
    check(res)


def test_criterion_7_topology():
    check(acceptance.criterion_7())


def test_criterion_8_isoperimetric_trend():
    check(acceptance.criterion_8())


def test_criterion_9_prescribed_v():
    check(acceptance.criterion_9())


def test_criterion_10_conformal_invariance():
    check(acceptance.criterion_10())


if __name__ == "__main__":
    for line in acceptance.summary_lines(acceptance.run_all()):
        print(line)
