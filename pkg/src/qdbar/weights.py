"""Weight families for quantum disk/annulus coordinates.

A weight family assigns to each deformation parameter t in (0, 1) a strictly
increasing positive sequence w_t(k) over an index set (N for the disk, Z for
the annulus), with k -> +/-inf limits w_plus/w_minus independent of t.  The
derived diagonal S_t(k) = w_t(k)^2 - w_t(k-1)^2 is the commutator of the
weighted shift with its adjoint; it is trace class with trace
w_plus^2 - w_minus^2 and plays the role of a quantized area element.

Three built-in families are provided:

* ``unilateral_example``   w_t(k)^2 = (k+1)t / (1 + (k+1)t)        (disk)
* ``bilateral_rational``   w_t(k)^2 = alpha + beta*t*k/(1 + t|k|)  (annulus)
* ``bilateral_arctan``     w_t(k)^2 = alpha + beta*arctan(t*k)     (annulus)

All evaluators accept numpy integer arrays for k and are pure functions; t is
always a runtime argument so one family serves a whole t-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError


class Domain(Enum):
    DISK = "disk"       # index set N, w_minus = 0 by convention
    ANNULUS = "annulus"  # index set Z, requires w_minus > 0


class FamilyKind(Enum):
    UNILATERAL_EXAMPLE = "unilateral_example"
    BILATERAL_RATIONAL = "bilateral_rational"
    BILATERAL_ARCTAN = "bilateral_arctan"


def _check_t(t):
    # t = 1 is admitted as a boundary case for testing closed forms.
    if not (0.0 < t <= 1.0):
        raise ParameterError(f"deformation parameter t must lie in (0, 1]; got {t}")


@dataclass(frozen=True)
class WeightFamily:
    """One of the built-in weight families, with its closed-form limits."""

    kind: FamilyKind
    domain: Domain
    alpha: float
    beta: float
    w_plus: float
    w_minus: float

    # -- evaluation -------------------------------------------------------

    def weight_sq(self, t, k, dtype=np.float64):
        """w_t(k)^2, vectorized over k; disk indices k < 0 give 0.

        `dtype` selects the working precision (np.longdouble is used by the
        inverse-residual pipeline, where rounding is amplified by 1/S).
        """
        _check_t(t)
        k = np.asarray(k, dtype=dtype)
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            m = (k + 1.0) * t
            return np.where(k < 0, 0.0, m / (1.0 + m))
        if self.kind is FamilyKind.BILATERAL_RATIONAL:
            return self.alpha + self.beta * t * k / (1.0 + t * np.abs(k))
        return self.alpha + self.beta * np.arctan(t * k)

    def weight(self, t, k, dtype=np.float64):
        """w_t(k), vectorized over k."""
        return np.sqrt(self.weight_sq(t, k, dtype))

    def s(self, t, k, dtype=np.float64):
        """S_t(k) = w_t(k)^2 - w_t(k-1)^2 via cancellation-free closed forms."""
        _check_t(t)
        k = np.asarray(k, dtype=dtype)
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            val = t / ((1.0 + k * t) * (1.0 + (k + 1.0) * t))
            return np.where(k < 0, 0.0, val)
        if self.kind is FamilyKind.BILATERAL_RATIONAL:
            return self.beta * t / ((1.0 + t * np.abs(k)) * (1.0 + t * np.abs(k - 1.0)))
        # arctan(a) - arctan(b) = arctan((a-b)/(1+ab)); here a*b >= 0.
        return self.beta * np.arctan(t / (1.0 + t * t * k * (k - 1.0)))

    # -- tail bounds and truncation solves --------------------------------

    def tail_bound_hi(self, t, k_hi):
        """w_plus^2 - w_t(k_hi)^2, the omitted upper S-mass beyond k_hi."""
        _check_t(t)
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            return 1.0 / (1.0 + (k_hi + 1.0) * t)
        if self.kind is FamilyKind.BILATERAL_RATIONAL:
            return self.beta / (1.0 + t * abs(k_hi)) if k_hi >= 0 else (
                self.w_plus**2 - float(self.weight_sq(t, k_hi)))
        return self.w_plus**2 - float(self.weight_sq(t, k_hi))

    def tail_bound_lo(self, t, k_lo):
        """w_t(k_lo)^2 - w_minus^2 (zero on the disk with k_lo = 0)."""
        _check_t(t)
        if self.domain is Domain.DISK:
            return float(self.weight_sq(t, k_lo)) if k_lo > 0 else 0.0
        if self.kind is FamilyKind.BILATERAL_RATIONAL and k_lo <= 0:
            return self.beta / (1.0 + t * abs(k_lo))
        return float(self.weight_sq(t, k_lo)) - self.w_minus**2

    def solve_k_hi(self, t, tol):
        """Smallest k with tail_bound_hi(t, k) <= tol (closed form, then local adjust)."""
        _check_t(t)
        if tol <= 0:
            raise ParameterError("tail tolerance must be positive")
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            guess = (1.0 / tol - 1.0) / t - 1.0
        elif self.kind is FamilyKind.BILATERAL_RATIONAL:
            guess = (self.beta / tol - 1.0) / t
        else:
            x = tol / self.beta
            guess = 1.0 / (t * math.tan(x)) if x < math.pi / 2 else 0.0
        k = max(0, math.ceil(guess - 2.0))
        while self.tail_bound_hi(t, k) > tol:
            k += 1
        while k > 0 and self.tail_bound_hi(t, k - 1) <= tol:
            k -= 1
        return k

    def solve_k_lo(self, t, tol):
        """Largest k with tail_bound_lo(t, k) <= tol; 0 on the disk."""
        if self.domain is Domain.DISK:
            return 0
        # Both bilateral families are symmetric: reuse the upper solve.
        k = -self.solve_k_hi(t, tol)
        while self.tail_bound_lo(t, k) > tol:
            k -= 1
        while k < 0 and self.tail_bound_lo(t, k + 1) <= tol:
            k += 1
        return k

    # -- closed-form moduli (where the family admits them) -----------------

    def h1_closed(self, t):
        """sup_k S_t(k) in closed form, or None if not available."""
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            return t / (1.0 + t)
        if self.kind is FamilyKind.BILATERAL_RATIONAL:
            return self.beta * t / (1.0 + t)
        return self.beta * math.atan(t)

    def h2_closed(self, t):
        """sup_k |1 - S_t(k+1)/S_t(k)| in closed form, or None."""
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            return 2.0 * t / (1.0 + 2.0 * t)
        if self.kind is FamilyKind.BILATERAL_RATIONAL:
            return 2.0 * t
        return None

    def h3_closed(self, k):
        """sup_t |1 - w_t(k-1)/w_t(k)| in closed form, or None."""
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            k = np.asarray(k, dtype=np.float64)
            # attained as t -> 0+, where w_t(k-1)/w_t(k) -> sqrt(k/(k+1))
            return 1.0 - np.sqrt(np.maximum(k, 0.0) / (k + 1.0))
        return None

    def h3_closed_stable(self, k):
        """Cancellation-free rationalization of h3_closed, or None."""
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            k = np.asarray(k, dtype=np.float64)
            return 1.0 / (k + 1.0 + np.sqrt(np.maximum(k * k + k, 0.0)))
        return None

    def wconst_analytic(self):
        """t-independent upper bound on w_t(k)/w_t(k-1) over the index set.

        Disk families exclude k = 0, where w_t(-1) = 0 makes the ratio infinite.
        """
        if self.kind is FamilyKind.UNILATERAL_EXAMPLE:
            return math.sqrt(2.0)  # sup_(k>=1) sqrt((k+1)/k) as t -> 0+
        if self.kind is FamilyKind.BILATERAL_RATIONAL:
            return math.sqrt(self.alpha / (self.alpha - self.beta / 2.0))
        return math.sqrt(self.alpha / (self.alpha - self.beta * math.pi / 4.0))


def make_family(kind, alpha=None, beta=None, domain=None) -> WeightFamily:
    """Build a weight family, validating its parameter invariants.

    `kind` may be a FamilyKind or its string value.  `domain`, if given, must
    agree with the one the kind implies.
    """
    if isinstance(kind, str):
        try:
            kind = FamilyKind(kind)
        except ValueError:
            raise ParameterError(f"unknown weight family kind {kind!r}") from None
    if kind is FamilyKind.UNILATERAL_EXAMPLE:
        implied = Domain.DISK
        if alpha is not None or beta is not None:
            raise ParameterError("unilateral_example takes no alpha/beta parameters")
        w_plus, w_minus = 1.0, 0.0
        alpha = beta = 0.0
    else:
        implied = Domain.ANNULUS
        if alpha is None or beta is None:
            raise ParameterError(f"{kind.value} requires alpha and beta")
        alpha = float(alpha)
        beta = float(beta)
        if kind is FamilyKind.BILATERAL_RATIONAL:
            if not (alpha > beta > 0):
                raise ParameterError(
                    "bilateral_rational requires alpha > beta > 0 "
                    f"(got alpha={alpha}, beta={beta}: w_minus^2 = {alpha - beta} "
                    "must be positive)")
            w_plus = math.sqrt(alpha + beta)
            w_minus = math.sqrt(alpha - beta)
        else:
            if not (beta > 0 and alpha > beta * math.pi / 2.0):
                raise ParameterError(
                    "bilateral_arctan requires alpha > beta*pi/2 > 0 "
                    f"(got alpha={alpha}, beta={beta}: w_minus^2 = "
                    f"{alpha - beta * math.pi / 2.0} must be positive)")
            w_plus = math.sqrt(alpha + beta * math.pi / 2.0)
            w_minus = math.sqrt(alpha - beta * math.pi / 2.0)
    if domain is not None:
        if isinstance(domain, str):
            domain = Domain(domain)
        if domain is not implied:
            raise ParameterError(
                f"{kind.value} lives on the {implied.value}, not the {domain.value}")
    return WeightFamily(kind=kind, domain=implied, alpha=alpha, beta=beta,
                        w_plus=w_plus, w_minus=w_minus)


def weight_value(family: WeightFamily, t: float, k) -> float:
    """w_t(k); on the disk, k < 0 returns 0 by convention."""
    return float(family.weight(t, k)) if np.isscalar(k) else family.weight(t, k)


def s_value(family: WeightFamily, t: float, k) -> float:
    """S_t(k) = w_t(k)^2 - w_t(k-1)^2 (strictly positive on the index set)."""
    return float(family.s(t, k)) if np.isscalar(k) else family.s(t, k)


def s_ratio_margin(family: WeightFamily, t: float, n: int, window) -> float:
    """Certification margin for the S-ratio bound at band offset n.

    Returns  min over the window of  (2 + h2)^(n-1) * h2 - |S_t(k+n)/S_t(k) - 1|
    with h2 taken as the window supremum of the n = 1 ratio, so a nonnegative
    value certifies the bound numerically and the n = 1 margin is exactly 0.
    """
    if n < 1:
        raise ParameterError("band offset n must be >= 1")
    k_lo, k_hi = _normalize_window(family, window)
    ks = np.arange(k_lo, k_hi + n + 1)
    s = family.s(t, ks)
    m = k_hi - k_lo + 1
    ratio1 = np.abs(s[1:m + 1] / s[:m] - 1.0)
    h2 = float(np.max(ratio1))
    ratio_n = np.abs(s[n:n + m] / s[:m] - 1.0)
    return (2.0 + h2) ** (n - 1) * h2 - float(np.max(ratio_n))


@dataclass(frozen=True)
class ConditionReport:
    """Numerical verification record for the weight-family conditions."""

    t_grid: tuple
    window: tuple
    tail_index: int
    h1_values: tuple          # per t: sup_k S_t(k)
    h2_values: tuple          # per t: sup_k |1 - S_t(k+1)/S_t(k)|
    h3_values: np.ndarray     # per k in window: sup over t-grid of |1 - w(k-1)/w(k)|
    h1_closed: tuple          # per t, or None entries when no closed form
    h2_closed: tuple
    h3_closed: np.ndarray     # per k, or None
    h3_closed_cross: float    # max |h3_closed - its rationalized form| (nan if none)
    monotonicity_ok: bool
    positivity_ok: bool
    limit_deviation_hi: tuple  # per t: max_{k >= M} |w_t(k) - w_plus|
    limit_deviation_lo: tuple  # per t (annulus only, else None)
    trace_deviation: tuple     # per t: |sum_window S_t - (w_plus^2 - w_minus^2)|
    trace_tail_bound: tuple    # per t: analytic bound the deviation must respect
    const_wratio: float        # empirical sup of w_t(k)/w_t(k-1) (k >= 1 on disk)
    const_wratio_identity: float  # 1/(1 - max_k h3(k)) over the same k-range

    def violations(self):
        """Names of violated conditions (empty when everything checks out)."""
        bad = []
        if not self.monotonicity_ok:
            bad.append("monotonicity")
        if not self.positivity_ok:
            bad.append("positivity")
        ts = np.array(self.t_grid)
        order = np.argsort(-ts)  # descending t
        for name, vals in (("h1_decay", self.h1_values), ("h2_decay", self.h2_values)):
            v = np.array(vals)[order]
            if np.any(np.diff(v) > 1e-15):
                bad.append(name)
        for dev, bound in zip(self.trace_deviation, self.trace_tail_bound):
            if dev > bound * (1.0 + 1e-12) + 1e-15:
                bad.append("trace_tail")
                break
        for emp, ref in ((self.h1_values, self.h1_closed), (self.h2_values, self.h2_closed)):
            for e, r in zip(emp, ref):
                if r is not None and abs(e - r) > 1e-12:
                    bad.append("closed_form_moduli")
                    break
        if abs(self.const_wratio - self.const_wratio_identity) > 1e-12:
            bad.append("wconst_identity")
        return bad


def _normalize_window(family, window):
    k_lo, k_hi = int(window[0]), int(window[1])
    if k_lo > k_hi:
        raise ParameterError(f"empty index window [{k_lo}, {k_hi}]")
    if family.domain is Domain.DISK and k_lo != 0:
        raise ParameterError("disk windows start at k_lo = 0")
    return k_lo, k_hi


def condition_report(family: WeightFamily, t_grid, window, tail_index: int) -> ConditionReport:
    """Scan the weight conditions over a t-grid and an index window.

    Suprema over the infinite index set are evaluated on the window; for the
    built-in families the true sups are attained at small |k| (h1, h2) or in
    the t -> 0 limit (h3), so the report also carries closed-form reference
    values where the family provides them.
    """
    if len(t_grid) == 0:
        raise ParameterError("t_grid must be nonempty")
    k_lo, k_hi = _normalize_window(family, window)
    M = int(tail_index)
    if not (k_lo <= M <= k_hi):
        raise ParameterError("tail_index must lie inside the window")
    ks = np.arange(k_lo, k_hi + 1)
    trace_total = family.w_plus**2 - family.w_minus**2

    h1, h2, lim_hi, lim_lo, tr_dev, tr_bound = [], [], [], [], [], []
    mono_ok = True
    pos_ok = True
    h3 = np.zeros(ks.size)
    ratio_max = 0.0
    for t in t_grid:
        s = family.s(t, np.arange(k_lo, k_hi + 2))
        w = family.weight(t, ks)
        wm1 = family.weight(t, ks - 1)
        mono_ok = mono_ok and bool(np.all(s[:-1] > 0.0))
        pos_ok = pos_ok and bool(np.all(w > 0.0))
        h1.append(float(np.max(s[:-1])))
        h2.append(float(np.max(np.abs(s[1:] / s[:-1] - 1.0))))
        lim_hi.append(float(np.max(np.abs(w[ks >= M] - family.w_plus))))
        if family.domain is Domain.ANNULUS:
            lim_lo.append(float(np.max(np.abs(w[ks <= -M] - family.w_minus))))
        else:
            lim_lo.append(None)
        tr_dev.append(abs(float(np.sum(s[:-1])) - trace_total))
        bound = family.tail_bound_hi(t, k_hi)
        if family.domain is Domain.ANNULUS:
            bound += family.tail_bound_lo(t, k_lo)
        tr_bound.append(bound)
        valid = wm1 > 0.0
        h3 = np.maximum(h3, np.where(valid, np.abs(1.0 - wm1 / np.maximum(w, 1e-300)), 1.0))
        with np.errstate(divide="ignore"):
            ratios = np.where(valid, w / np.where(valid, wm1, 1.0), 0.0)
        ratio_max = max(ratio_max, float(np.max(ratios)))

    h3_ref = family.h3_closed(ks)
    h3_stable = family.h3_closed_stable(ks)
    h3_cross = float(np.max(np.abs(h3_ref - h3_stable))) \
        if h3_ref is not None else float("nan")
    valid_any = (ks >= 1) if family.domain is Domain.DISK else np.ones(ks.size, bool)
    h3_for_const = float(np.max(h3[valid_any]))
    return ConditionReport(
        t_grid=tuple(t_grid), window=(k_lo, k_hi), tail_index=M,
        h1_values=tuple(h1), h2_values=tuple(h2), h3_values=h3,
        h1_closed=tuple(family.h1_closed(t) for t in t_grid),
        h2_closed=tuple(family.h2_closed(t) for t in t_grid),
        h3_closed=h3_ref if h3_ref is not None else None,
        h3_closed_cross=h3_cross,
        monotonicity_ok=mono_ok, positivity_ok=pos_ok,
        limit_deviation_hi=tuple(lim_hi), limit_deviation_lo=tuple(lim_lo),
        trace_deviation=tuple(tr_dev), trace_tail_bound=tuple(tr_bound),
        const_wratio=ratio_max,
        const_wratio_identity=1.0 / (1.0 - h3_for_const),
    )
