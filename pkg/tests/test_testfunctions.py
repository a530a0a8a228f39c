import numpy as np
import pytest

from asep_lab.testfunctions import (Bump, Heaviside, Hermite, Ramp, Tabulated,
                                    TestFunctionError, apply_K0, evaluate, inner_product,
                                    parse_function)


def test_point_values():
    assert evaluate(Ramp(2), 1.0) == 0.5
    assert evaluate(Heaviside(), -3.0) == 0.0
    assert evaluate(Hermite(1), 0.0) == 0.0


def test_ramp_definition():
    u = np.linspace(-3, 10, 1001)
    assert np.array_equal(Ramp(4)(u), np.where(u >= 0, np.clip(1 - u / 4, 0, None), 0.0))


def test_ramp_approaches_heaviside():
    u = np.linspace(0, 50, 2001)
    for n in (1, 5, 25, 125):
        assert np.all(np.abs(Ramp(n)(u) - Heaviside()(u)) <= u / n + 1e-15)


def test_hermite_orthonormality():
    gram = np.array([[inner_product(Hermite(i), Hermite(j)) for j in range(11)]
                     for i in range(11)])
    assert np.max(np.abs(gram - np.eye(11))) < 1e-8


def test_hermite_high_index_finite():
    u = np.linspace(-30, 30, 2001)
    for z in range(21):
        assert np.all(np.isfinite(Hermite(z)(u)))


@pytest.mark.parametrize("z", range(6))
def test_hermite_eigen_relation(z):
    u = np.linspace(-6, 6, 601)
    res = np.abs(apply_K0(Hermite(z), u) - (2 * z + 1) * Hermite(z)(u))
    assert res.max() < 1e-5


def test_k0_at_origin_and_far_bump():
    assert apply_K0(Hermite(0), 0.0) == pytest.approx(Hermite(0)(0.0), abs=1e-6)
    assert apply_K0(Bump(0, 1), 5.0) == 0.0


def test_k0_rejects_non_smooth():
    with pytest.raises(TestFunctionError):
        apply_K0(Ramp(1), 0.5)


@pytest.mark.parametrize("n", [0.5, 1, 3, 7.5])
def test_ramp_self_product(n):
    assert inner_product(Ramp(n), Ramp(n)) == pytest.approx(n / 3, abs=1e-8)


def test_ramp_products_match_quadrature():
    exact = inner_product(Ramp(2), Ramp(5))
    grid = np.linspace(0, 5, 400001)
    assert exact == pytest.approx(np.trapezoid(Ramp(2)(grid) * Ramp(5)(grid), grid), abs=1e-8)
    assert inner_product(Ramp(3), Heaviside()) == pytest.approx(1.5)


def test_divergent_product():
    with pytest.raises(TestFunctionError):
        inner_product(Heaviside(), Heaviside())


def test_bump_unit_norm():
    B = Bump.unit_norm(0.5, 2.0)
    assert inner_product(B, B) == pytest.approx(1.0, abs=1e-10)
    assert B(10.0) == 0.0


def test_tabulated_csv(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("u,value\n-1,0\n0,1\n1,0\n")
    T = Tabulated.from_csv(path)
    assert T(0.5) == 0.5 and T(2.0) == 0.0
    assert inner_product(T, T) == pytest.approx(2 / 3, abs=1e-8)


def test_tabulated_rejects_unsorted_grid():
    with pytest.raises(TestFunctionError):
        Tabulated((0.0, -1.0), (1.0, 2.0))


def test_parse_function():
    assert parse_function("hermite:3") == Hermite(3)
    assert parse_function("ramp:2.5") == Ramp(2.5)
    assert parse_function("heaviside") == Heaviside()
    assert parse_function("bump:0,1") == Bump(0.0, 1.0)
    assert parse_function("bump:0,1,unit") == Bump.unit_norm(0.0, 1.0)
    with pytest.raises(TestFunctionError):
        parse_function("sine:1")
    with pytest.raises(TestFunctionError):
        parse_function("ramp:")


def test_support_tolerance():
    lo, hi = Hermite(4).support()
    assert abs(Hermite(4)(hi + 0.01)) < 1e-14 and abs(Hermite(4)(lo - 0.01)) < 1e-14
