import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsrlab import orthopoly as op
from rsrlab.distributions import gaussian_moment

from conftest import gaussian_expectation


def test_hermite_small_degrees():
    assert list(op.hermite_normalized(0).coeffs) == [1.0]
    h2 = op.hermite_normalized(2)
    assert h2[2] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert h2[0] == pytest.approx(-1 / math.sqrt(2), abs=1e-15)
    assert h2[1] == 0.0
    h3 = op.hermite_normalized(3)
    assert h3[3] == pytest.approx(1 / math.sqrt(6))
    assert h3[1] == pytest.approx(-3 / math.sqrt(6))


def test_degree_cap():
    op.hermite_normalized(60)
    with pytest.raises(ValueError):
        op.hermite_normalized(61)


@pytest.mark.parametrize("m", range(31))
def test_recurrence_matches_closed_form(m):
    rec = op.hermite_normalized(m).coeffs
    ref = op.hermite_closed_form(m).coeffs
    assert rec.shape == ref.shape
    assert np.all(np.abs(rec - ref) <= 1e-10 * np.maximum(1.0, np.abs(ref)))


def test_closed_form_against_factorials():
    # a_{m,j} = (-1)^j sqrt(m!) / (2^j j! (m-2j)!), written out by hand for m = 6
    m = 6
    c = op.hermite_closed_form(m)
    for j in range(4):
        expect = (-1) ** j * math.sqrt(math.factorial(m)) / (2**j * math.factorial(j) * math.factorial(m - 2 * j))
        assert c[m - 2 * j] == pytest.approx(expect, rel=1e-14)


def test_orthonormality_by_exact_expansion():
    hs = [op.hermite_normalized(i).coeffs for i in range(11)]
    for i in range(11):
        for j in range(11):
            e = gaussian_expectation(np.convolve(hs[i], hs[j]))
            assert abs(e - (i == j)) <= 1e-9


def test_diagonal_coeff_sq_values():
    assert op.diagonal_coeff_sq(0) == 1
    assert op.diagonal_coeff_sq(2) == pytest.approx(0.5)
    assert op.diagonal_coeff_sq(4) == pytest.approx(3 / 8)
    with pytest.raises(ValueError):
        op.diagonal_coeff_sq(3)


@given(st.integers(0, 30).map(lambda i: 2 * i))
def test_diagonal_coeff_is_square_of_constant_term(i):
    assert op.hermite_normalized(i)[0] ** 2 == pytest.approx(op.diagonal_coeff_sq(i), rel=1e-12)


def test_basis_reproduces_hermite():
    b = op.build_basis(op.gaussian_oracle, 3)
    for j in range(4):
        assert np.allclose(b.transform[j, : j + 1], op.hermite_normalized(j).coeffs, atol=1e-10)
    assert np.allclose(np.triu(b.transform, 1), 0)
    assert np.all(np.diag(b.transform) > 0)


@pytest.mark.parametrize("k", [4, 8, 12])
def test_truncation_does_not_change_rows(k):
    big = op.build_basis(op.gaussian_oracle, k)
    small = op.build_basis(op.gaussian_oracle, 3)
    assert np.allclose(big.transform[:4, :4], small.transform, atol=1e-10)


def test_product_normal_p2():
    b = op.build_basis(op.product_normal_oracle, 2)
    # hand Gram-Schmidt: E x^2 = 1, E x^4 = 9  =>  p2 = (x^2 - 1) / sqrt(8)
    assert np.allclose(b.polynomial(2).coeffs, [-1 / math.sqrt(8), 0, 1 / math.sqrt(8)], atol=1e-12)


def test_singular_hankel_reports_pivot():
    two_point = lambda ell: 1.0 if ell % 2 == 0 else 0.0  # noqa: E731
    with pytest.raises(op.BasisError) as info:
        op.build_basis(two_point, 2)
    assert info.value.pivot == 2


def test_gram_identity_under_oracle():
    b = op.build_basis(op.product_normal_oracle, 10)
    H = op.hankel(op.product_normal_oracle, 10)
    assert np.abs(b.transform @ H @ b.transform.T - np.eye(11)).max() <= 1e-9


def test_christoffel_values():
    assert op.christoffel_sum(op.build_basis(op.gaussian_oracle, 0), 0.3) == 1.0
    assert op.christoffel_sum(op.build_basis(op.gaussian_oracle, 4), 0.0) == pytest.approx(1.875, abs=1e-12)
    assert op.christoffel_sum(op.build_basis(op.product_normal_oracle, 2), 0.0) == pytest.approx(1.125, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.integers(1, 15))
def test_christoffel_nondecreasing(x0, k):
    lo = op.christoffel_sum(op.build_basis(op.gaussian_oracle, k - 1), x0)
    hi = op.christoffel_sum(op.build_basis(op.gaussian_oracle, k), x0)
    assert hi >= lo - 1e-9 * hi


def test_christoffel_equals_diagonal_sum_at_zero():
    b = op.build_basis(op.gaussian_oracle, 10)
    expect = sum(op.diagonal_coeff_sq(j) for j in range(0, 11, 2))
    assert op.christoffel_sum(b, 0.0) == pytest.approx(expect, rel=1e-10)


def test_basis_csv_golden(tmp_path):
    b = op.build_basis(op.gaussian_oracle, 2)
    text = b.to_csv(tmp_path / "b.csv")
    rows = [list(map(float, r.split(","))) for r in text.strip().splitlines()[1:]]
    assert text.splitlines()[0] == "x^0,x^1,x^2"
    assert np.allclose(rows, [[1, 0, 0], [0, 1, 0], [-1 / math.sqrt(2), 0, 1 / math.sqrt(2)]], atol=1e-15)
    assert (tmp_path / "b.csv").read_text() == text


def test_polynomial_coeffs_callable():
    h2 = op.hermite_normalized(2)
    assert h2(1.0) == pytest.approx(0.0, abs=1e-15)
    assert h2.degree == 2


def test_gaussian_oracle_matches_moments():
    assert [op.gaussian_oracle(j) for j in range(7)] == [gaussian_moment(j) for j in range(7)]
