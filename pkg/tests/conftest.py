import pytest

from saska.group import PARAM_SETS, validate_params


def naive_mod_exp(base: int, exponent: int, modulus: int) -> int:
    """Independent O(exponent) oracle: repeated multiplication."""
    result = 1 % modulus
    for _ in range(exponent):
        result = (result * base) % modulus
    return result


@pytest.fixture(scope="session")
def test_params():
    # runs the full validation path on the small test group
    return validate_params(23, 11, 2)


@pytest.fixture(scope="session")
def p40_params():
    p = PARAM_SETS["p40"]
    return validate_params(p.p, p.q, p.g)
