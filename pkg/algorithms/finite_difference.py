from __future__ import annotations
from typing import Callable

import numpy as np

def central_difference(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """
    Numerical gradient of a scalar function with respect to every entry of `x`.

    `f` takes no arguments and reads `x` itself, so `x` must be the array the
    function actually uses. Each entry is nudged by +-eps in place and restored.

    :complexity: O(x.size) evaluations of f.
    """
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = x[idx]
        x[idx] = original + eps
        plus = f()
        x[idx] = original - eps
        minus = f()
        x[idx] = original
        grad[idx] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest |a - n| / max(|a|, |n|, floor) over all entries."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))
