"""Finite band sums over a weight family and their two norms.

An element is a finite sum  sum_n U^n f_n(w_t(k)^2) + sum_n g_n(w_t(k)^2) (U*)^n
with continuous coefficient functions of s = r^2 on [w_minus^2, w_plus^2]
(U is the unweighted shift).  Realized at a parameter t it becomes a banded
matrix over a truncation window; at t = 0 it is the function
sum f_n(r^2) e^{i n phi} + sum g_n(r^2) e^{-i n phi} on the disk/annulus.

The quantum norm is the weighted trace norm  tr(S^(1/2) a S^(1/2) a*)^(1/2);
the classical norm is L^2 with respect to d(r^2) x (dphi / 2 pi).  Both are
implemented band-wise with deterministic summation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import (
    FAM_ARCTAN, FAM_RATIONAL, FAM_UNILATERAL, HAVE_NUMBA, norm_band_sum,
)
from .errors import CapabilityError, ParameterError, WindowResourceError
from .quadrature import cumulative_integrals, integrate, integrate_with_error
from .weights import Domain, FamilyKind, WeightFamily

CHUNK = 1 << 22  # fixed streaming block size; fixed => deterministic sums


# ---------------------------------------------------------------------------
# coefficient functions
# ---------------------------------------------------------------------------

class PowerSum:
    """Finite sum  sum_j a_j s^(j/2)  over half-integer powers j/2.

    Polynomials in s use even j >= 0, sqrt(s)-scaled polynomials odd j >= 1.
    Negative powers appear only as images of the d-bar operator at t = 0.
    """

    def __init__(self, coeffs, min_power_half: int = 0):
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.size == 0:
            raise ParameterError("empty polynomial coefficient list")
        # trim leading/trailing zeros but keep at least one coefficient
        nz = np.nonzero(coeffs)[0]
        if nz.size == 0:
            coeffs = np.zeros(1)
        else:
            min_power_half += int(nz[0])
            coeffs = coeffs[nz[0]:nz[-1] + 1]
        self.coeffs = coeffs
        self.min_power_half = min_power_half if nz.size else 0

    # -- constructors ------------------------------------------------------

    @staticmethod
    def poly(coeffs):
        """Polynomial in s with ascending coefficients."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.size == 0:
            raise ParameterError("empty polynomial coefficient list")
        out = np.zeros(2 * coeffs.size - 1)
        out[::2] = coeffs
        return PowerSum(out, 0)

    @staticmethod
    def sqrt_poly(coeffs):
        """sqrt(s) times a polynomial in s, ascending coefficients."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.size == 0:
            raise ParameterError("empty polynomial coefficient list")
        out = np.zeros(2 * coeffs.size - 1)
        out[::2] = coeffs
        return PowerSum(out, 1)

    # -- protocol ----------------------------------------------------------

    derivative_available = True

    def __call__(self, s):
        s = np.asarray(s)
        if s.dtype != np.longdouble:
            s = s.astype(np.float64)
        r = np.sqrt(s)
        val = np.full(s.shape, self.coeffs[-1], dtype=s.dtype)
        for a in self.coeffs[-2::-1]:
            val = val * r + a
        if self.min_power_half:
            val = val * r ** self.min_power_half
        return val

    def derivative(self) -> "PowerSum":
        j = self.min_power_half + np.arange(self.coeffs.size)
        return PowerSum(self.coeffs * (j / 2.0), self.min_power_half - 2)

    def derivative_at(self, s):
        return self.derivative()(s)

    def shift_half_power(self, shift: int) -> "PowerSum":
        """Multiply by s^(shift/2)."""
        return PowerSum(self.coeffs, self.min_power_half + shift)

    def scale(self, c: float) -> "PowerSum":
        return PowerSum(self.coeffs * c, self.min_power_half)

    def __add__(self, other):
        if not isinstance(other, PowerSum):
            return NotImplemented
        lo = min(self.min_power_half, other.min_power_half)
        hi = max(self.min_power_half + self.coeffs.size,
                 other.min_power_half + other.coeffs.size)
        out = np.zeros(hi - lo)
        out[self.min_power_half - lo:self.min_power_half - lo + self.coeffs.size] += self.coeffs
        out[other.min_power_half - lo:other.min_power_half - lo + other.coeffs.size] += other.coeffs
        return PowerSum(out, lo)

    def is_zero(self) -> bool:
        return bool(np.all(self.coeffs == 0.0))

    def __eq__(self, other):
        if not isinstance(other, PowerSum):
            return NotImplemented
        return (self.min_power_half == other.min_power_half
                and self.coeffs.shape == other.coeffs.shape
                and bool(np.all(self.coeffs == other.coeffs)))

    def __repr__(self):
        return f"PowerSum({list(self.coeffs)}, min_power_half={self.min_power_half})"

    @property
    def kind(self) -> str:
        j = self.min_power_half + np.arange(self.coeffs.size)
        used = j[self.coeffs != 0.0]
        if used.size == 0 or (np.all(used % 2 == 0) and np.all(used >= 0)):
            return "poly"
        if np.all(used % 2 == 1) and np.all(used >= 1):
            return "sqrt_poly"
        return "half_power"

    def sup_abs(self, lo, hi, samples=513):
        s = np.linspace(lo, hi, samples)
        if self.min_power_half < 0:
            s = s[s > 0]
        return float(np.max(np.abs(self(s)))) if s.size else 0.0


class Transform:
    """Quadrature-backed coefficient  s^p * integral of a base function.

    value(s) = s^p * I(s) with I(s) = int_{c0}^{s} phi(u) du   (moving='upper')
                        or I(s) = int_{s}^{c0} phi(u) du        (moving='lower'),
    and a derivative through the fundamental theorem of calculus.  Batch
    evaluation on a sorted grid walks consecutive panels once and memoizes the
    sampled values for reuse within a run.
    """

    derivative_available = True

    def __init__(self, prefactor_half_power: int, integrand, fixed_endpoint: float,
                 moving: str, scale: float = 1.0, tol: float = 1e-12):
        if moving not in ("upper", "lower"):
            raise ParameterError("moving must be 'upper' or 'lower'")
        self.p_half = prefactor_half_power
        self.integrand = integrand
        self.c0 = float(fixed_endpoint)
        self.moving = moving
        self.scale = scale
        self.tol = tol
        self._memo_grid = None
        self._memo_vals = None

    def _integral_sorted(self, s):
        """I(s) for ascending s, via cumulative panel quadrature."""
        if self._memo_grid is not None and self._memo_grid.shape == s.shape \
                and np.array_equal(self._memo_grid, s):
            return self._memo_vals
        out = np.empty(s.size)
        if self.moving == "upper":
            edges = np.concatenate(([self.c0], s))
            carry = 0.0
            for start in range(0, s.size, CHUNK):
                stop = min(start + CHUNK, s.size)
                vals = cumulative_integrals(self.integrand, edges[start:stop + 1],
                                            tol=self.tol)
                out[start:stop] = carry + np.cumsum(vals)
                carry = out[stop - 1]
        else:
            edges = np.concatenate((s, [self.c0]))
            carry = 0.0
            for stop in range(s.size, 0, -CHUNK):
                start = max(stop - CHUNK, 0)
                vals = cumulative_integrals(self.integrand, edges[start:stop + 1],
                                            tol=self.tol)
                out[start:stop] = carry + np.cumsum(vals[::-1])[::-1]
                carry = out[start]
        self._memo_grid = s.copy()
        self._memo_vals = out
        return out

    def _integral(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        if s.size > 1 and np.any(np.diff(s) < 0):
            order = np.argsort(s, kind="stable")
            inv = np.empty_like(order)
            inv[order] = np.arange(order.size)
            return self._integral_sorted(s[order])[inv]
        return self._integral_sorted(s)

    def __call__(self, s):
        arr = np.asarray(s, dtype=np.float64)
        vals = self._integral(arr).reshape(arr.shape)
        out = self.scale * vals * np.sqrt(arr) ** self.p_half
        return float(out) if np.isscalar(s) else out

    def derivative_at(self, s):
        arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
        ivals = self._integral(arr)
        sign = 1.0 if self.moving == "upper" else -1.0
        r = np.sqrt(arr)
        out = self.scale * (0.5 * self.p_half * r ** (self.p_half - 2) * ivals
                            + r ** self.p_half * sign * self.integrand(arr))
        out = out.reshape(np.asarray(s).shape)
        return float(out) if np.isscalar(s) else out

    def sup_abs(self, lo, hi, samples=513):
        s = np.linspace(lo, hi, samples)
        if self.p_half < 0:
            s = s[s > 0]
        return float(np.max(np.abs(self(s)))) if s.size else 0.0


class DerivedEvaluable:
    """Pointwise combination  sqrt(s) c'(s) + (sign * n / (2 sqrt(s))) c(s).

    Images of coefficient functions under the classical d-bar operator; they
    can be evaluated but expose no further derivative.
    """

    derivative_available = False

    def __init__(self, base, n: int, sign: float):
        self.base = base
        self.n = n
        self.sign = sign

    def __call__(self, s):
        arr = np.asarray(s, dtype=np.float64)
        r = np.sqrt(arr)
        out = r * self.base.derivative_at(arr) + self.sign * self.n / (2.0 * r) * self.base(arr)
        return float(out) if np.isscalar(s) else out

    def sup_abs(self, lo, hi, samples=513):
        s = np.linspace(lo, hi, samples)
        s = s[s > 0]
        return float(np.max(np.abs(self(s)))) if s.size else 0.0


def _coeff_from_spec(entry):
    if "fn" in entry:
        return entry["fn"]
    kind = entry.get("kind")
    coeffs = entry.get("coeffs")
    if kind == "poly":
        return PowerSum.poly(coeffs)
    if kind == "sqrt_poly":
        return PowerSum.sqrt_poly(coeffs)
    if kind == "half_power":
        return PowerSum(coeffs, int(entry.get("min_power", 0)))
    raise ParameterError(f"unknown coefficient kind {kind!r}")


def _add_coeffs(a, b):
    if a is None:
        return b
    if isinstance(a, PowerSum) and isinstance(b, PowerSum):
        return a + b
    raise ParameterError("only polynomial-type coefficients can be merged onto one band")


# ---------------------------------------------------------------------------
# elements
# ---------------------------------------------------------------------------

@dataclass
class LambdaElement:
    """Canonical finite band sum: one optional diagonal, f-bands, g-bands."""

    f_bands: dict = field(default_factory=dict)   # n >= 1 -> coefficient
    g_bands: dict = field(default_factory=dict)   # n >= 1 -> coefficient
    diagonal: object = None

    @property
    def N(self) -> int:
        return max([0, *self.f_bands.keys(), *self.g_bands.keys()])

    def bands(self):
        """(side, n, coeff) in deterministic order: diag, f ascending, g ascending."""
        if self.diagonal is not None:
            yield ("diag", 0, self.diagonal)
        for n in sorted(self.f_bands):
            yield ("f", n, self.f_bands[n])
        for n in sorted(self.g_bands):
            yield ("g", n, self.g_bands[n])

    def export_band_spec(self):
        out = []
        for side, n, coeff in self.bands():
            if not isinstance(coeff, PowerSum):
                raise CapabilityError("only polynomial-type coefficients can be exported")
            kind = coeff.kind
            entry = {"side": side, "n": n, "kind": kind}
            powers = coeff.min_power_half + np.arange(coeff.coeffs.size)
            if kind == "poly":
                cs = np.zeros(int(powers[-1]) // 2 + 1)
                cs[powers[coeff.coeffs != 0.0] // 2] = coeff.coeffs[coeff.coeffs != 0.0]
                entry["coeffs"] = list(cs)
            elif kind == "sqrt_poly":
                cs = np.zeros((int(powers[-1]) - 1) // 2 + 1)
                cs[(powers[coeff.coeffs != 0.0] - 1) // 2] = coeff.coeffs[coeff.coeffs != 0.0]
                entry["coeffs"] = list(cs)
            else:
                entry["coeffs"] = list(coeff.coeffs)
                entry["min_power"] = coeff.min_power_half
            out.append(entry)
        return out

    def __eq__(self, other):
        if not isinstance(other, LambdaElement):
            return NotImplemented
        return (self.f_bands == other.f_bands and self.g_bands == other.g_bands
                and self.diagonal == other.diagonal)

    def sup_abs(self, family: WeightFamily) -> float:
        lo, hi = family.w_minus**2, family.w_plus**2
        sups = [c.sup_abs(lo, hi) for _, _, c in self.bands()]
        return max(sups) if sups else 0.0


def make_element(band_spec) -> LambdaElement:
    """Build a canonical element from a band spec list.

    Entries are {side: f|g|diag, n, fn} (or kind/coeffs in place of fn).
    f/g entries with n = 0 are diagonal contributions and are merged into the
    single stored diagonal; duplicate (side, n) pairs are rejected.
    """
    if not band_spec:
        raise ParameterError("empty band spec")
    seen = set()
    f_bands, g_bands, diagonal = {}, {}, None
    for entry in band_spec:
        side = entry["side"]
        n = int(entry.get("n", 0))
        if side not in ("f", "g", "diag"):
            raise ParameterError(f"unknown band side {side!r}")
        if side == "diag" and n != 0:
            raise ParameterError("diagonal entries must have n = 0")
        if n < 0:
            raise ParameterError("band index n must be nonnegative")
        key = (side, n)
        if key in seen:
            raise ParameterError(f"duplicate band for side={side!r}, n={n}")
        seen.add(key)
        coeff = _coeff_from_spec(entry)
        if side == "diag" or n == 0:
            diagonal = _add_coeffs(diagonal, coeff)
        elif side == "f":
            f_bands[n] = coeff
        else:
            g_bands[n] = coeff
    return LambdaElement(f_bands=f_bands, g_bands=g_bands, diagonal=diagonal)


def coordinate_element(name: str) -> LambdaElement:
    """The unit, the complex coordinate z, or its adjoint zbar."""
    if name == "one":
        return make_element([{"side": "diag", "n": 0, "fn": PowerSum.poly([1.0])}])
    if name == "z":
        return make_element([{"side": "f", "n": 1, "fn": PowerSum.sqrt_poly([1.0])}])
    if name == "zbar":
        return make_element([{"side": "g", "n": 1, "fn": PowerSum.sqrt_poly([1.0])}])
    raise ParameterError(f"unknown coordinate element {name!r}")


# ---------------------------------------------------------------------------
# truncation windows and band matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndexWindow:
    """Finite index range with the omitted-S-mass bounds it guarantees."""

    k_lo: int
    k_hi: int
    tail_tol: float
    tail_bound_hi: float
    tail_bound_lo: float

    @property
    def size(self) -> int:
        return self.k_hi - self.k_lo + 1


def truncation_window(family: WeightFamily, t: float, tail_tol: float,
                      k_cap: int = 20_000_000) -> IndexWindow:
    """Smallest window whose tail bounds are <= tail_tol (closed-form solve)."""
    if tail_tol <= 0:
        raise ParameterError("tail_tol must be positive")
    k_hi = family.solve_k_hi(t, tail_tol)
    k_lo = family.solve_k_lo(t, tail_tol)
    needed = max(k_hi, abs(k_lo))
    if needed > k_cap:
        raise WindowResourceError(
            f"window needs indices out to {needed}, beyond the cap {k_cap}",
            needed=needed, cap=k_cap)
    return IndexWindow(k_lo=k_lo, k_hi=k_hi, tail_tol=tail_tol,
                       tail_bound_hi=family.tail_bound_hi(t, k_hi),
                       tail_bound_lo=family.tail_bound_lo(t, k_lo))


def window_from_range(family: WeightFamily, t: float, k_lo: int, k_hi: int) -> IndexWindow:
    """Window over an explicit range, carrying the bounds it actually achieves."""
    if k_lo > k_hi:
        raise ParameterError("empty window")
    if family.domain is Domain.DISK and k_lo != 0:
        raise ParameterError("disk windows start at k_lo = 0")
    hi = family.tail_bound_hi(t, k_hi)
    lo = family.tail_bound_lo(t, k_lo) if family.domain is Domain.ANNULUS else 0.0
    return IndexWindow(k_lo=k_lo, k_hi=k_hi, tail_tol=max(hi, lo),
                       tail_bound_hi=hi, tail_bound_lo=lo)


def search_window_size(family: WeightFamily, t: float, tail_tol: float,
                       k_cap: int = 20_000_000) -> int:
    """Doubling-then-bisect solve for the upper window edge (closed-form oracle)."""
    hi = 1
    while family.tail_bound_hi(t, hi) > tail_tol:
        hi *= 2
        if hi > 4 * k_cap:
            raise WindowResourceError("window search exceeded cap", needed=hi, cap=k_cap)
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if family.tail_bound_hi(t, mid) <= tail_tol:
            hi = mid
        else:
            lo = mid + 1
    return lo


class BandMatrix:
    """Banded truncation of an operator over an index window.

    Band b holds the entries A[col + b, col]; the array for band b covers the
    columns [k_lo + max(0, -b), k_hi - max(0, b)] so every stored entry lies
    inside the window.  `valid_margin` counts how many indices near each
    window edge are untrusted after operator applications.
    """

    def __init__(self, window: IndexWindow, bands: dict, valid_margin: int = 0):
        self.window = window
        self.bands = dict(bands)
        self.valid_margin = valid_margin
        for b, arr in self.bands.items():
            lo, hi = self.band_col_range(b)
            if arr.shape != (max(0, hi - lo + 1),):
                raise ParameterError(f"band {b} array has wrong length {arr.shape}")

    def band_col_range(self, b: int):
        """Inclusive column range for band b."""
        return (self.window.k_lo + max(0, -b), self.window.k_hi - max(0, b))

    def band(self, b: int) -> np.ndarray:
        lo, hi = self.band_col_range(b)
        return self.bands.get(b, np.zeros(max(0, hi - lo + 1)))

    def trusted(self, b: int) -> np.ndarray:
        """Entries of band b with both indices >= valid_margin from the edges."""
        arr = self.band(b)
        m = self.valid_margin
        return arr[m:arr.size - m] if arr.size > 2 * m else arr[:0]

    def __sub__(self, other: "BandMatrix") -> "BandMatrix":
        if (self.window.k_lo, self.window.k_hi) != (other.window.k_lo, other.window.k_hi):
            raise ParameterError("band matrices live on different windows")
        keys = sorted(set(self.bands) | set(other.bands))
        out = {b: self.band(b) - other.band(b) for b in keys}
        return BandMatrix(self.window, out,
                          valid_margin=max(self.valid_margin, other.valid_margin))

    def max_abs(self) -> float:
        vals = [float(np.max(np.abs(a))) for a in self.bands.values() if a.size]
        return max(vals) if vals else 0.0


def realize_quantum(elem: LambdaElement, family: WeightFamily, t: float,
                    window: IndexWindow, dtype=np.float64) -> BandMatrix:
    """Sample the element's coefficients into a banded matrix at parameter t.

    Band +n holds f_n(w_t(col)^2) at (col+n, col); band -n holds
    g_n(w_t(col-n)^2) at (col-n, col); the diagonal samples its own function.
    """
    k_lo, k_hi = window.k_lo, window.k_hi
    bands = {}
    for side, n, coeff in elem.bands():
        rows = np.arange(k_lo, k_hi - n + 1)   # row index of each entry
        if rows.size == 0:
            continue
        vals = coeff(family.weight_sq(t, rows, dtype))
        b = n if side in ("f", "diag") else -n
        if b in bands:
            bands[b] = bands[b] + vals
        else:
            bands[b] = vals
    return BandMatrix(window, bands, valid_margin=0)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def quantum_norm(a: BandMatrix, family: WeightFamily, t: float) -> float:
    """Weighted trace norm sqrt(sum S(i)^(1/2) S(j)^(1/2) |a_ij|^2) on the window."""
    total = 0.0
    for b in sorted(a.bands):
        arr = a.bands[b]
        if arr.size == 0:
            continue
        lo, hi = a.band_col_range(b)
        cols = np.arange(lo, hi + 1)
        mu = np.sqrt(family.s(t, cols + b) * family.s(t, cols))
        total += float(np.sum(mu * arr * arr))
    return float(np.sqrt(total))


FAMILY_IDS = {FamilyKind.UNILATERAL_EXAMPLE: FAM_UNILATERAL,
              FamilyKind.BILATERAL_RATIONAL: FAM_RATIONAL,
              FamilyKind.BILATERAL_ARCTAN: FAM_ARCTAN}


def lambda_norm_sq(elem: LambdaElement, family: WeightFamily, t: float,
                   window: IndexWindow) -> float:
    """Quantum norm squared of the element, streamed without realizing it.

    Evaluates the banded double sum directly (fused jitted loop per band,
    fixed-size numpy chunks as fallback), so windows of 10^7-10^8 indices
    stay within memory.  Matches realize + quantum_norm to rounding.
    """
    k_lo, k_hi = window.k_lo, window.k_hi
    fid = FAMILY_IDS[family.kind]
    total = 0.0
    for side, n, coeff in elem.bands():
        lo, hi = k_lo, k_hi - n
        if hi < lo:
            continue
        if HAVE_NUMBA and isinstance(coeff, PowerSum):
            total += float(norm_band_sum(
                fid, t, family.alpha, family.beta, lo, hi, n,
                np.ascontiguousarray(coeff.coeffs), coeff.min_power_half))
            continue
        for start in range(lo, hi + 1, CHUNK):
            ks = np.arange(start, min(start + CHUNK, hi + 1))
            mu = np.sqrt(family.s(t, ks + n) * family.s(t, ks))
            c = coeff(family.weight_sq(t, ks))
            total += float(np.sum(mu * c * c))
    return total


def classical_norm(elem: LambdaElement, family: WeightFamily, tol: float = 1e-12) -> float:
    """L^2 norm of the t = 0 realization over [w_minus^2, w_plus^2]."""
    lo, hi = family.w_minus**2, family.w_plus**2
    total = 0.0
    for _, _, coeff in elem.bands():
        total += integrate(lambda s, c=coeff: c(s) ** 2, lo, hi, tol=tol)
    return float(np.sqrt(total))
