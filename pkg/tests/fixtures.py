"""Shared test elements: coordinates plus small polynomial band mixes."""

import numpy as np

from qdbar.elements import coordinate_element, make_element


def f_poly_element():
    """Pure f-side bands with degree <= 2 polynomial coefficients, N = 3."""
    return make_element([
        {"side": "f", "n": 1, "kind": "poly", "coeffs": [1.0, 1.0]},
        {"side": "f", "n": 2, "kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
        {"side": "f", "n": 3, "kind": "poly", "coeffs": [1.0]},
    ])


def g_poly_element():
    """Pure g-side bands with degree <= 2 polynomial coefficients, N = 3."""
    return make_element([
        {"side": "g", "n": 1, "kind": "poly", "coeffs": [2.0, -1.0]},
        {"side": "g", "n": 2, "kind": "poly", "coeffs": [0.0, 1.0]},
        {"side": "g", "n": 3, "kind": "poly", "coeffs": [1.0, 0.0, 1.0]},
    ])


def mixed_element():
    """Diagonal plus f and g bands, polynomial degree <= 2, N = 2."""
    return make_element([
        {"side": "diag", "n": 0, "kind": "poly", "coeffs": [0.0, 1.0]},
        {"side": "f", "n": 1, "kind": "sqrt_poly", "coeffs": [1.0, 1.0]},
        {"side": "f", "n": 2, "kind": "poly", "coeffs": [1.0, 1.0]},
        {"side": "g", "n": 1, "kind": "poly", "coeffs": [0.0, 0.0, 1.0]},
        {"side": "g", "n": 2, "kind": "poly", "coeffs": [2.0, -1.0]},
    ])


def g2_element():
    """Single g-band at n = 2 (the parametrix-convergence workhorse)."""
    return make_element([{"side": "g", "n": 2, "kind": "poly", "coeffs": [1.0, 1.0]}])


def f2_element():
    """Single f-band at n = 2 (parametrix-convergence fixture)."""
    return make_element([{"side": "f", "n": 2, "kind": "poly", "coeffs": [0.0, 1.0]}])


def f1_constant_element():
    """f_1 = 1: the fixture whose PRINTED-mode inverse residual is the known failure."""
    return make_element([{"side": "f", "n": 1, "kind": "poly", "coeffs": [1.0]}])


def inverse_fixtures():
    """The six elements the inverse-property checks run over."""
    return [
        coordinate_element("one"),
        coordinate_element("z"),
        coordinate_element("zbar"),
        f_poly_element(),
        g_poly_element(),
        mixed_element(),
    ]


def random_poly_element(rng: np.random.Generator, max_n=4):
    """Random positive-coefficient poly bands (positivity avoids zero crossings)."""
    spec = [{"side": "diag", "n": 0, "kind": "poly",
             "coeffs": list(rng.uniform(0.5, 1.5, size=2))}]
    for n in range(1, max_n + 1):
        spec.append({"side": "f", "n": n, "kind": "poly",
                     "coeffs": list(rng.uniform(0.5, 1.5, size=3))})
        spec.append({"side": "g", "n": n, "kind": "poly",
                     "coeffs": list(rng.uniform(0.5, 1.5, size=3))})
    return make_element(spec)
