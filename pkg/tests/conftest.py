import pytest

from qdbar._kernels import HAVE_NUMBA


@pytest.fixture(scope="session", autouse=True)
def warm_jitted_kernels():
    """Compile (or load from cache) the jitted kernels before any timed test."""
    if HAVE_NUMBA:
        from qdbar.elements import (
            lambda_norm_sq, make_element, window_from_range,
        )
        from qdbar.operators import QtKernelMode, apply_Qt
        from qdbar.weights import make_family
        fam = make_family("unilateral_example")
        win = window_from_range(fam, 0.5, 0, 64)
        elem = make_element([
            {"side": "f", "n": 1, "kind": "poly", "coeffs": [1.0]},
            {"side": "g", "n": 1, "kind": "poly", "coeffs": [1.0]},
        ])
        lambda_norm_sq(elem, fam, 0.5, win)
        for mode in (QtKernelMode.CORRECTED, QtKernelMode.PRINTED):
            apply_Qt(elem, fam, 0.5, win, mode)
    yield
