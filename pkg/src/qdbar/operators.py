"""The balanced d-bar operator, its parametrix, and kernel norm bounds.

The quantum operator acts on banded matrices as
D_t a = S^(-1/2) [a, U_w] S^(-1/2); commutation with the weighted shift raises
every band index by one.  Its right inverse under the spectral boundary
conditions acts band-wise through two families of triangular kernels:

* a suffix-sum kernel feeding input band f_(n+1) into output band +n,
* a prefix-sum kernel feeding input band g_(n-1) (the diagonal enters as
  g_0) into output band -n.

Two kernel conventions are implemented.  PRINTED keeps the shifted weight
products with the output-side denominator; CORRECTED places the products and
the denominator so the discrete integration by parts telescopes exactly (the
same placement the g-side kernel uses), which is what makes D_t (Q_t x) = x
hold identically on trusted entries.  The g-side is the same in both modes.
Classically the modes correspond to the kernels r^(n-1)/rho^n and
r^n/rho^(n+1) in the explicit inverse of d-bar.

Both paths of apply_Qt (fast O(K) scans, literal O(K^2) double sums) compute
the same numbers; the brute path exists as an oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernels import HAVE_NUMBA, qt_f_band, qt_g_band
from .elements import (
    FAMILY_IDS, BandMatrix, DerivedEvaluable, IndexWindow, LambdaElement,
    PowerSum, Transform,
)
from .errors import CapabilityError, ParameterError, WindowResourceError
from .weights import Domain, WeightFamily

MAX_BAND = 16  # cap on consecutive-weight product length


class QtKernelMode(Enum):
    CORRECTED = "corrected"
    PRINTED = "printed"


# ---------------------------------------------------------------------------
# the quantum d-bar operator
# ---------------------------------------------------------------------------

def apply_Dt(a: BandMatrix, family: WeightFamily, t: float) -> BandMatrix:
    """S^(-1/2) [a, U_w] S^(-1/2) computed band-wise.

    The commutator entry at (i, j) is w(j) a_(i, j+1) - w(i-1) a_(i-1, j), so
    input band b feeds output band b+1 via

        out_b+1[col] = (w(col) A_b[col+1] - w(col+b) A_b[col]) / mu

    with mu = sqrt(S(col) S(col+b+1)).  Entries that would need neighbours
    beyond the window are zero-padded, and the validity margin grows by one.
    """
    win = a.window
    dtype = np.result_type(*(arr.dtype for arr in a.bands.values())) \
        if a.bands else np.float64
    out = {}
    for c in sorted(a.bands):
        b = c + 1
        lo, hi = win.k_lo + max(0, -b), win.k_hi - max(0, b)
        if lo > hi:
            continue
        cols = np.arange(lo, hi + 1)
        in_vals = _band_at(a, c, lo, hi + 1)          # A_c[col]
        in_next = _band_at(a, c, lo + 1, hi + 2)      # A_c[col+1]
        num = family.weight(t, cols, dtype) * in_next \
            - family.weight(t, cols + b - 1, dtype) * in_vals
        mu = np.sqrt(family.s(t, cols, dtype) * family.s(t, cols + b, dtype))
        acc = num / mu
        out[b] = out.get(b, 0.0) + acc
    return BandMatrix(win, out, valid_margin=a.valid_margin + 1)


def _band_at(a: BandMatrix, b: int, lo: int, stop: int) -> np.ndarray:
    """Band b of `a` sampled at columns [lo, stop), zero-padded outside."""
    blo, bhi = a.band_col_range(b)
    arr = a.bands.get(b)
    out = np.zeros(stop - lo, dtype=arr.dtype if arr is not None else np.float64)
    if arr is None or arr.size == 0:
        return out
    src_lo, src_hi = max(lo, blo), min(stop - 1, bhi)
    if src_lo <= src_hi:
        out[src_lo - lo:src_hi - lo + 1] = arr[src_lo - blo:src_hi - blo + 1]
    return out


# ---------------------------------------------------------------------------
# parametrix kernels
# ---------------------------------------------------------------------------

@dataclass
class _TParts:
    """Separable kernel K(k, i) = a(k) b(i) on i >= k (suffix) or i <= k (prefix)."""

    a: np.ndarray      # output-index factor over the window
    b: np.ndarray      # input-index factor over the window
    nu: np.ndarray     # input-space weight mu_(m_in)(i)
    mu: np.ndarray     # output-space weight mu_(m_out)(k)
    direction: str     # 'suffix' (T1) or 'prefix' (T2)


def _consecutive_product(w_ext: np.ndarray, n: int, length: int, offset: int = 0):
    """prod_{m=0}^{n-1} w_ext[offset + j + m] for j = 0..length-1."""
    out = np.ones(length, dtype=w_ext.dtype)
    for m in range(n):
        out = out * w_ext[offset + m:offset + m + length]
    return out


def _window_arrays(family, t, window, pad, dtype=np.float64):
    K = window.size
    ext = np.arange(window.k_lo, window.k_hi + pad + 1)
    w_ext = family.weight(t, ext, dtype)
    s_ext = family.s(t, ext, dtype)
    return K, w_ext, s_ext


def _t1_parts(family, t, window, n, mode, dtype=np.float64) -> _TParts:
    """Suffix kernel l^2_(n+1) -> l^2_n (input band f_(n+1), output band +n)."""
    if n < 0:
        raise ParameterError("T1 band index must be >= 0")
    K, w_ext, s_ext = _window_arrays(family, t, window, n + 2, dtype)
    nu = np.sqrt(s_ext[:K] * s_ext[n + 1:n + 1 + K])
    mu = np.sqrt(s_ext[:K] * s_ext[n:n + K])
    if mode is QtKernelMode.CORRECTED:
        a = _consecutive_product(w_ext, n, K)                  # w(k)...w(k+n-1)
        b = 1.0 / _consecutive_product(w_ext, n + 1, K)        # 1/(w(i)...w(i+n))
    else:
        a = _consecutive_product(w_ext, n, K, offset=1) / w_ext[n:n + K]
        b = 1.0 / _consecutive_product(w_ext, n, K, offset=1)  # 1/(w(i+1)...w(i+n))
    return _TParts(a=a, b=b, nu=nu, mu=mu, direction="suffix")


def _t2_parts(family, t, window, n, dtype=np.float64) -> _TParts:
    """Prefix kernel l^2_(n-1) -> l^2_n (input band g_(n-1), output band -n)."""
    if n < 1:
        raise ParameterError("T2 band index must be >= 1")
    K, w_ext, s_ext = _window_arrays(family, t, window, n + 1, dtype)
    nu = np.sqrt(s_ext[:K] * s_ext[n - 1:n - 1 + K])
    mu = np.sqrt(s_ext[:K] * s_ext[n:n + K])
    prod = _consecutive_product(w_ext, n, K)                   # w(j)...w(j+n-1)
    return _TParts(a=1.0 / prod, b=prod / w_ext[n - 1:n - 1 + K],
                   nu=nu, mu=mu, direction="prefix")


def _scan(vals: np.ndarray, direction: str) -> np.ndarray:
    if direction == "prefix":
        return np.cumsum(vals)
    return np.cumsum(vals[::-1])[::-1]


def _t_apply(parts: _TParts, x: np.ndarray) -> np.ndarray:
    """The kernel operator applied to coefficient samples (fast scan path)."""
    return parts.a * _scan(parts.b * parts.nu * x, parts.direction)


def _t_apply_brute(parts: _TParts, x: np.ndarray) -> np.ndarray:
    """Literal triangular double sum; O(K^2) oracle for the scan path."""
    weighted = parts.b * parts.nu * x
    K = x.size
    out = np.empty(K, dtype=weighted.dtype)
    if parts.direction == "prefix":
        for k in range(K):
            out[k] = parts.a[k] * weighted[:k + 1].sum()
    else:
        for k in range(K):
            out[k] = parts.a[k] * weighted[k:].sum()
    return out


def apply_Qt(elem: LambdaElement, family: WeightFamily, t: float,
             window: IndexWindow, mode: QtKernelMode = QtKernelMode.CORRECTED,
             path: str = "fast", dtype=np.float64) -> BandMatrix:
    """Band-wise parametrix application.

    Input band f_(n+1) produces output band +n (sign flipped); input band
    g_(n-1), with the diagonal fed as g_0, produces output band -n.  Sums run
    over the window: on the disk the prefix sums start at 0 exactly, on the
    annulus the omitted mass below k_lo is controlled by the window's lower
    tail bound.
    """
    if path not in ("fast", "brute"):
        raise ParameterError(f"unknown path {path!r}")
    if elem.N > MAX_BAND:
        raise WindowResourceError(
            f"element band count N={elem.N} exceeds the kernel product cap {MAX_BAND}",
            needed=elem.N, cap=MAX_BAND)
    apply_fn = _t_apply if path == "fast" else _t_apply_brute
    use_kernels = (path == "fast" and HAVE_NUMBA and dtype == np.float64)
    fid = FAMILY_IDS[family.kind]
    svals = None
    bands = {}
    for side, m, coeff in elem.bands():
        jitted = use_kernels and isinstance(coeff, PowerSum)
        if not jitted and svals is None:
            ks = np.arange(window.k_lo, window.k_hi + 1)
            svals = family.weight_sq(t, ks, dtype)
        if side == "f":
            n = m - 1
            if jitted:
                vals = qt_f_band(fid, t, family.alpha, family.beta,
                                 window.k_lo, window.k_hi, n,
                                 np.ascontiguousarray(coeff.coeffs),
                                 coeff.min_power_half,
                                 mode is QtKernelMode.CORRECTED)
            else:
                vals = -apply_fn(_t1_parts(family, t, window, n, mode, dtype),
                                 coeff(svals))
            lo, hi = window.k_lo, window.k_hi - n
            bands[n] = bands.get(n, 0.0) + vals[:hi - lo + 1]
        else:                       # diagonal enters as g_0
            n = m + 1
            if jitted:
                vals = qt_g_band(fid, t, family.alpha, family.beta,
                                 window.k_lo, window.k_hi, n,
                                 np.ascontiguousarray(coeff.coeffs),
                                 coeff.min_power_half)
            else:
                vals = apply_fn(_t2_parts(family, t, window, n, dtype),
                                coeff(svals))
            lo, hi = window.k_lo, window.k_hi - n
            bands[-n] = bands.get(-n, 0.0) + vals[:hi - lo + 1]
    return BandMatrix(window, bands, valid_margin=0)


# ---------------------------------------------------------------------------
# the classical operator and parametrix image
# ---------------------------------------------------------------------------

def apply_D0(elem: LambdaElement, family: WeightFamily) -> LambdaElement:
    """The d-bar operator on coefficient functions at t = 0.

    f-band n maps to f-band n+1 with coefficient sqrt(s) f' - (n/(2 sqrt(s))) f
    (the diagonal acts as f_0); g-band n maps to g-band n-1 with coefficient
    sqrt(s) g' + (n/(2 sqrt(s))) g, the n = 1 image landing on the diagonal.
    """
    f_out, g_out, diag_out = {}, {}, None
    for side, n, coeff in elem.bands():
        if not getattr(coeff, "derivative_available", False):
            raise CapabilityError(f"coefficient on {side}-band {n} has no derivative")
        sign = -1.0 if side in ("f", "diag") else 1.0
        if isinstance(coeff, PowerSum):
            image = coeff.derivative().shift_half_power(1) + \
                coeff.scale(sign * n / 2.0).shift_half_power(-1)
            if image.is_zero():
                continue
        else:
            image = DerivedEvaluable(coeff, n, sign)
        if side in ("f", "diag"):
            f_out[n + 1] = image
        elif n == 1:
            diag_out = image
        else:
            g_out[n - 1] = image
    return LambdaElement(f_bands=f_out, g_bands=g_out, diagonal=diag_out)


def tilde_element(elem: LambdaElement, family: WeightFamily,
                  mode: QtKernelMode = QtKernelMode.CORRECTED,
                  tol: float = 1e-12) -> LambdaElement:
    """The classical parametrix image as an element of transform coefficients.

    g-side (mode independent):  gtilde_n(s) = s^(-n/2) int_{w_-^2}^{s} g_(n-1)(u) u^((n-1)/2) du
    f-side, PRINTED:   -s^((n-1)/2) int_s^{w_+^2} f_(n+1)(u) u^(-n/2) du
    f-side, CORRECTED: -s^(n/2)     int_s^{w_+^2} f_(n+1)(u) u^(-(n+1)/2) du

    The transforms expose exact derivatives through the fundamental theorem
    of calculus.
    """
    lo2, hi2 = family.w_minus**2, family.w_plus**2
    f_out, g_out, diag_out = {}, {}, None
    for side, m, coeff in elem.bands():
        if not isinstance(coeff, PowerSum):
            raise CapabilityError("tilde transforms need polynomial-type coefficients")
        if side == "f":
            n = m - 1
            if mode is QtKernelMode.CORRECTED:
                tr = Transform(prefactor_half_power=n,
                               integrand=coeff.shift_half_power(-(n + 1)),
                               fixed_endpoint=hi2, moving="lower", scale=-1.0, tol=tol)
            else:
                tr = Transform(prefactor_half_power=n - 1,
                               integrand=coeff.shift_half_power(-n),
                               fixed_endpoint=hi2, moving="lower", scale=-1.0, tol=tol)
            if n == 0:
                diag_out = tr
            else:
                f_out[n] = tr
        else:
            n = m + 1
            g_out[n] = Transform(prefactor_half_power=-n,
                                 integrand=coeff.shift_half_power(n - 1),
                                 fixed_endpoint=lo2, moving="upper", tol=tol)
    return LambdaElement(f_bands=f_out, g_bands=g_out, diagonal=diag_out)


# ---------------------------------------------------------------------------
# norm bounds for the kernel operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelOperatorSpec:
    """One of the parametrix band kernels, realized over a window."""

    kind: str              # 'T1' (suffix, l^2_(n+1)->l^2_n) or 'T2' (prefix)
    n: int
    t: float
    family: WeightFamily
    window: IndexWindow
    coefficient: object = None   # optional input-coefficient weighting

    def parts(self, mode: QtKernelMode) -> _TParts:
        if self.kind == "T1":
            parts = _t1_parts(self.family, self.t, self.window, self.n, mode)
        elif self.kind == "T2":
            parts = _t2_parts(self.family, self.t, self.window, self.n)
        else:
            raise ParameterError(f"unknown kernel kind {self.kind!r}")
        if self.coefficient is not None:
            ks = np.arange(self.window.k_lo, self.window.k_hi + 1)
            parts.b = parts.b * np.abs(self.coefficient(self.family.weight_sq(self.t, ks)))
        return parts


@dataclass(frozen=True)
class SchurBound:
    """Schur test result between the weighted sequence spaces."""

    bound: float           # sqrt(row_sup * col_sup)
    row_sup: float         # sup_k sum_i nu(i) |K(k, i)|
    col_sup: float         # sup_i sum_k mu(k) |K(k, i)|
    analytic_cap: float    # t-independent cap from the telescoping estimates
    rows: np.ndarray
    cols: np.ndarray


def schur_analytic_cap(family: WeightFamily) -> float:
    """t-independent kernel-norm cap 2 (w_+ - w_-) wconst^(1/4).

    Follows from sum_k S(k)/w(k) <= 2 (w_+ - w_-)  (2 w_+ on the disk) plus
    one weight-ratio transfer, applied to both Schur factors.
    """
    w_minus = family.w_minus if family.domain is Domain.ANNULUS else 0.0
    return 2.0 * (family.w_plus - w_minus) * family.wconst_analytic() ** 0.25


def schur_young_bound(spec: KernelOperatorSpec,
                      mode: QtKernelMode = QtKernelMode.CORRECTED) -> SchurBound:
    """Row/column Schur test on the realized kernel, weights made explicit.

    For T between weighted spaces the test reads
    ||T||^2 <= (sup_k sum_i nu(i)|K|) (sup_i sum_k mu(k)|K|); the separable
    kernel makes both sums single scans.
    """
    p = spec.parts(mode)
    rows = p.a * _scan(p.nu * p.b, p.direction)
    other = "prefix" if p.direction == "suffix" else "suffix"
    cols = p.b * _scan(p.mu * p.a, other)
    row_sup = float(np.max(rows)) if rows.size else 0.0
    col_sup = float(np.max(cols)) if cols.size else 0.0
    return SchurBound(bound=float(np.sqrt(row_sup * col_sup)),
                      row_sup=row_sup, col_sup=col_sup,
                      analytic_cap=schur_analytic_cap(spec.family),
                      rows=rows, cols=cols)


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int
    last_rel_change: float


def operator_norm_estimate(spec: KernelOperatorSpec,
                           mode: QtKernelMode = QtKernelMode.CORRECTED,
                           iters: int = 500, rtol: float = 1e-10) -> NormEstimate:
    """Largest singular value of the kernel operator by power iteration.

    Iterates T*T in the correct weighted spaces (via the unitary transfer to
    unweighted l^2), deterministic all-ones seed.  Warns instead of raising
    when the Rayleigh quotient has not settled after `iters` iterations.
    """
    if iters < 1:
        raise ParameterError("iters must be >= 1")
    p = spec.parts(mode)
    rnu, rmu = np.sqrt(p.nu), np.sqrt(p.mu)
    other = "prefix" if p.direction == "suffix" else "suffix"

    def forward(x):
        return rmu * p.a * _scan(p.b * rnu * x, p.direction)

    def adjoint(y):
        return p.b * rnu * _scan(rmu * p.a * y, other)

    v = np.ones(p.a.size)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, iters + 1):
        u = adjoint(forward(v))
        new_lam = float(v @ u)
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            return NormEstimate(0.0, True, it, 0.0)
        v = u / norm_u
        rel = abs(new_lam - lam) / max(new_lam, 1e-300)
        lam = new_lam
        if rel <= rtol:
            return NormEstimate(float(np.sqrt(lam)), True, it, rel)
    warnings.warn(f"power iteration did not settle after {iters} iterations "
                  f"(last Rayleigh quotient {lam:.6e}, rel change {rel:.2e})")
    return NormEstimate(float(np.sqrt(lam)), False, iters, rel)
