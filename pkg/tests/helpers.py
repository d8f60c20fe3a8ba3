"""Independent oracles shared across test modules."""
from __future__ import annotations

import math

import numpy as np


def central_differences(f, arrays, step=1e-5):
    """Central finite differences of the scalar function ``f()`` w.r.t. each array, in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            up = f()
            arr[idx] = orig - step
            down = f()
            arr[idx] = orig
            g[idx] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def max_relative_error(a, b, floor=1e-6):
    worst = 0.0
    for x, y in zip(a, b):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst


def straight_line_mlp(layers, x):
    """Loop-by-loop forward pass; layers are (W, b, activation) with W of shape (in, out)."""
    acts = {
        "tanh": math.tanh,
        "relu": lambda z: z if z > 0 else 0.0,
        "sigmoid": lambda z: 1.0 / (1.0 + math.exp(-z)),
        "identity": lambda z: z,
    }
    rows = []
    for row in np.asarray(x, dtype=float):
        h = list(row)
        for w, b, act in layers:
            out = []
            for j in range(w.shape[1]):
                z = b[j]
                for i in range(w.shape[0]):
                    z += h[i] * w[i, j]
                out.append(acts[act](z))
            h = out
        rows.append(h)
    return np.array(rows)


# acceptance outcomes, printed in the terminal summary by conftest
ACCEPTANCE: list = []


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
