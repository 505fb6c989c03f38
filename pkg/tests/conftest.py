import numpy as np
import pytest


def numeric_grad(func, array, h=1e-5):
    """Central finite differences of a scalar-valued func w.r.t. array.

    ``array`` is perturbed in place coordinate by coordinate and restored;
    ``func`` takes no arguments and must re-read the array each call.
    """
    grad = np.zeros_like(array)
    flat_in = array.ravel()
    flat_out = grad.ravel()
    for i in range(flat_in.size):
        orig = flat_in[i]
        flat_in[i] = orig + h
        f_plus = func()
        flat_in[i] = orig - h
        f_minus = func()
        flat_in[i] = orig
        flat_out[i] = (f_plus - f_minus) / (2 * h)
    return grad


def max_rel_error(analytic, numeric):
    """Elementwise |a - n| / max(1, |a|, |n|), reduced with max."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


@pytest.fixture
def rng():
    return np.random.default_rng(0xDEC0DE)
