import math

import numpy as np
import pytest

from qdbar.elements import (
    BandMatrix, IndexWindow, PowerSum, Transform, classical_norm,
    coordinate_element, lambda_norm_sq, make_element, quantum_norm,
    realize_quantum, search_window_size, truncation_window, window_from_range,
)
from qdbar.errors import ParameterError, WindowResourceError
from qdbar.weights import make_family


def disk():
    return make_family("unilateral_example")


def annulus():
    return make_family("bilateral_rational", alpha=1.0, beta=0.5)


def mixed_element():
    return make_element([
        {"side": "diag", "n": 0, "kind": "poly", "coeffs": [0.0, 1.0]},
        {"side": "f", "n": 1, "kind": "sqrt_poly", "coeffs": [1.0]},
        {"side": "f", "n": 2, "kind": "poly", "coeffs": [1.0, 1.0]},
        {"side": "g", "n": 1, "kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
        {"side": "g", "n": 2, "kind": "poly", "coeffs": [2.0, -1.0]},
    ])


class TestPowerSum:
    def test_poly_eval(self):
        p = PowerSum.poly([1.0, 2.0, 3.0])  # 1 + 2s + 3s^2
        assert p(2.0) == pytest.approx(17.0, abs=1e-13)

    def test_sqrt_poly_eval(self):
        q = PowerSum.sqrt_poly([2.0, 1.0])  # sqrt(s)(2 + s)
        assert q(4.0) == pytest.approx(12.0, abs=1e-13)

    def test_derivative(self):
        p = PowerSum.poly([0.0, 0.0, 1.0])  # s^2
        assert p.derivative()(3.0) == pytest.approx(6.0, abs=1e-13)
        q = PowerSum.sqrt_poly([1.0])  # sqrt(s)
        assert q.derivative()(4.0) == pytest.approx(0.25, abs=1e-14)

    def test_addition_mixes_parities(self):
        c = PowerSum.poly([1.0]) + PowerSum.sqrt_poly([1.0])
        assert c(4.0) == pytest.approx(3.0, abs=1e-13)
        assert c.kind == "half_power"

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            PowerSum.poly([])


class TestMakeElement:
    def test_single_f_band(self):
        e = make_element([{"side": "f", "n": 1, "fn": PowerSum.poly([1.0])}])
        assert e.N == 1 and 1 in e.f_bands and e.diagonal is None

    def test_diag_merge(self):
        e = make_element([
            {"side": "diag", "n": 0, "kind": "poly", "coeffs": [0.0, 1.0]},
            {"side": "g", "n": 0, "kind": "poly", "coeffs": [2.0]},
        ])
        assert e.f_bands == {} and e.g_bands == {}
        assert e.diagonal == PowerSum.poly([2.0, 1.0])  # s + 2

    def test_duplicate_band_rejected(self):
        with pytest.raises(ParameterError, match="duplicate"):
            make_element([
                {"side": "f", "n": 1, "kind": "poly", "coeffs": [1.0]},
                {"side": "f", "n": 1, "kind": "poly", "coeffs": [2.0]},
            ])

    def test_empty_spec_rejected(self):
        with pytest.raises(ParameterError):
            make_element([])

    def test_empty_poly_rejected(self):
        with pytest.raises(ParameterError):
            make_element([{"side": "f", "n": 1, "kind": "poly", "coeffs": []}])

    def test_roundtrip_idempotent(self):
        e = mixed_element()
        assert make_element(e.export_band_spec()) == e

    def test_coordinates(self):
        one, z, zbar = map(coordinate_element, ("one", "z", "zbar"))
        assert one.diagonal == PowerSum.poly([1.0])
        assert z.f_bands[1] == PowerSum.sqrt_poly([1.0])
        assert zbar.g_bands[1] == PowerSum.sqrt_poly([1.0])
        with pytest.raises(ParameterError):
            coordinate_element("w")


class TestTruncationWindow:
    def test_disk_closed_form(self):
        win = truncation_window(disk(), 0.1, 1e-4)
        assert win.k_lo == 0 and win.k_hi == 99_989
        assert win.tail_bound_hi <= 1e-4

    def test_whole_trace_fits(self):
        win = truncation_window(disk(), 0.5, 1.0)
        assert (win.k_lo, win.k_hi) == (0, 0)

    def test_annulus_symmetric(self):
        win = truncation_window(annulus(), 0.1, 1e-3)
        assert win.k_hi == 4990 and win.k_lo == -4990
        assert win.tail_bound_hi <= 1e-3 and win.tail_bound_lo <= 1e-3

    def test_resource_error(self):
        with pytest.raises(WindowResourceError) as exc:
            truncation_window(disk(), 0.001, 1e-6, k_cap=10_000)
        assert exc.value.needed > 10_000

    @pytest.mark.parametrize("fam", [disk(), annulus()])
    @pytest.mark.parametrize("t", [0.5, 0.07])
    @pytest.mark.parametrize("tol", [1e-2, 1e-4, 3.3e-5])
    def test_matches_search_oracle(self, fam, t, tol):
        assert truncation_window(fam, t, tol).k_hi == search_window_size(fam, t, tol)

    def test_monotone_in_tolerance(self):
        sizes = [truncation_window(disk(), 0.2, tol).k_hi
                 for tol in (1e-2, 1e-3, 1e-4, 1e-5)]
        assert sizes == sorted(sizes)

    def test_tail_bound_dominates_omitted_mass(self):
        fam = annulus()
        t = 0.3
        win = truncation_window(fam, t, 1e-3)
        ks = np.arange(win.k_lo, win.k_hi + 1)
        inside = float(np.sum(fam.s(t, ks)))
        omitted = (fam.w_plus**2 - fam.w_minus**2) - inside
        assert omitted <= win.tail_bound_hi + win.tail_bound_lo + 1e-15


class TestRealize:
    def test_zbar_band_entries(self):
        fam, t = disk(), 0.4
        win = window_from_range(fam, t, 0, 50)
        a = realize_quantum(coordinate_element("zbar"), fam, t, win)
        rows = np.arange(0, 50)  # entries (j, j+1) = w(j)
        assert np.allclose(a.band(-1), fam.weight(t, rows), atol=1e-15, rtol=0)

    def test_one_is_all_ones(self):
        fam, t = disk(), 0.4
        win = window_from_range(fam, t, 0, 20)
        a = realize_quantum(coordinate_element("one"), fam, t, win)
        assert np.all(a.band(0) == 1.0)

    def test_constant_f_band(self):
        fam, t = disk(), 0.4
        e = make_element([{"side": "f", "n": 1, "kind": "poly", "coeffs": [1.0]}])
        a = realize_quantum(e, fam, t, window_from_range(fam, t, 0, 20))
        assert np.all(a.band(1) == 1.0)
        assert a.band(1).size == 20

    def test_band_col_ranges(self):
        fam, t = annulus(), 0.4
        win = window_from_range(fam, t, -5, 9)
        a = realize_quantum(mixed_element(), fam, t, win)
        assert a.band_col_range(2) == (-5, 7)
        assert a.band_col_range(-2) == (-3, 9)
        assert a.band(2).size == 13 and a.band(-2).size == 13


class TestQuantumNorm:
    def test_one_recovers_partial_trace(self):
        fam, t = disk(), 0.3
        win = truncation_window(fam, t, 1e-6)
        a = realize_quantum(coordinate_element("one"), fam, t, win)
        nsq = quantum_norm(a, fam, t) ** 2
        assert nsq == pytest.approx(1.0 - win.tail_bound_hi, abs=1e-12)

    def test_single_entry(self):
        fam, t = disk(), 0.5
        win = window_from_range(fam, t, 0, 10)
        arr = np.zeros(9)
        arr[3] = 2.0  # entry (5, 3) = 2
        a = BandMatrix(win, {2: arr})
        expected = math.sqrt(math.sqrt(fam.s(t, 5) * fam.s(t, 3)) * 4.0)
        assert quantum_norm(a, fam, t) == pytest.approx(expected, abs=1e-14)

    def test_zbar_riemann_limit(self):
        fam, t = disk(), 0.01
        win = truncation_window(fam, t, 1e-4)
        a = realize_quantum(coordinate_element("zbar"), fam, t, win)
        assert abs(quantum_norm(a, fam, t) ** 2 - 0.5) <= 2e-2

    def test_parseval_split(self):
        fam, t = annulus(), 0.2
        win = truncation_window(fam, t, 1e-5)
        e = mixed_element()
        total = quantum_norm(realize_quantum(e, fam, t, win), fam, t) ** 2
        parts = 0.0
        for side, n, coeff in e.bands():
            single = LambdaElementSingle(side, n, coeff)
            parts += quantum_norm(realize_quantum(single, fam, t, win), fam, t) ** 2
        assert total == pytest.approx(parts, rel=1e-13)

    def test_streamed_matches_realized(self):
        for fam in (disk(), annulus()):
            t = 0.15
            win = truncation_window(fam, t, 1e-4)
            e = mixed_element()
            streamed = lambda_norm_sq(e, fam, t, win)
            realized = quantum_norm(realize_quantum(e, fam, t, win), fam, t) ** 2
            assert streamed == pytest.approx(realized, rel=1e-13)


def LambdaElementSingle(side, n, coeff):
    entry = {"side": side, "n": n, "fn": coeff}
    return make_element([entry])


class TestClassicalNorm:
    def test_diagonal_s_on_disk(self):
        e = make_element([{"side": "diag", "n": 0, "kind": "poly", "coeffs": [0.0, 1.0]}])
        assert classical_norm(e, disk()) == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-12)

    def test_zbar_on_disk(self):
        e = coordinate_element("zbar")
        assert classical_norm(e, disk()) ** 2 == pytest.approx(0.5, abs=1e-12)

    def test_one_on_annulus(self):
        e = coordinate_element("one")
        fam = annulus()
        assert classical_norm(e, fam) ** 2 == pytest.approx(
            fam.w_plus**2 - fam.w_minus**2, abs=1e-12)


class TestTransform:
    def test_matches_pointwise_quadrature(self):
        # I(s) = int_0^s u du = s^2/2, value = s^(-1/2) * I(s)
        tr = Transform(prefactor_half_power=-1, integrand=PowerSum.poly([0.0, 1.0]),
                       fixed_endpoint=0.0, moving="upper")
        s = np.linspace(0.05, 1.0, 37)
        assert np.allclose(tr(s), 0.5 * s**1.5, atol=1e-12, rtol=0)

    def test_lower_moving_limit(self):
        # I(s) = int_s^1 du = 1 - s
        tr = Transform(prefactor_half_power=0, integrand=PowerSum.poly([1.0]),
                       fixed_endpoint=1.0, moving="lower")
        s = np.linspace(0.0, 1.0, 11)
        assert np.allclose(tr(s), 1.0 - s, atol=1e-13, rtol=0)

    def test_derivative_via_ftc(self):
        tr = Transform(prefactor_half_power=2, integrand=PowerSum.poly([1.0]),
                       fixed_endpoint=0.0, moving="upper")  # s * int_0^s du = s^2
        s = np.array([0.3, 0.7])
        assert np.allclose(tr.derivative_at(s), 2.0 * s, atol=1e-12, rtol=0)

    def test_unsorted_queries(self):
        tr = Transform(prefactor_half_power=0, integrand=PowerSum.poly([0.0, 1.0]),
                       fixed_endpoint=0.0, moving="upper")
        s = np.array([0.9, 0.1, 0.5])
        assert np.allclose(tr(s), 0.5 * s * s, atol=1e-13, rtol=0)

    def test_scalar_call(self):
        tr = Transform(prefactor_half_power=0, integrand=PowerSum.poly([0.0, 1.0]),
                       fixed_endpoint=0.0, moving="upper")
        assert tr(0.6) == pytest.approx(0.18, abs=1e-13)
