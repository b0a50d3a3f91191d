"""Shared numerical helpers: grid calculus, vectorization, worker pool."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def vec(mat):
    """Column-stacking vectorization (columns concatenated, Fortran order)."""
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v, d=None):
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def herm_defect(mat):
    """Frobenius norm of the anti-Hermitian part relative to the matrix norm."""
    mat = np.asarray(mat)
    scale = np.linalg.norm(mat)
    if scale == 0.0:
        return 0.0
    return np.linalg.norm(mat - mat.conj().T) / scale


def symmetrize(mat):
    """Average a matrix with its adjoint; kills rounding asymmetry."""
    mat = np.asarray(mat, dtype=complex)
    return 0.5 * (mat + mat.conj().T)


def time_derivative(values, dt):
    """Grid derivative: centered differences interior, one-sided 2nd order ends.

    ``values`` may have trailing dimensions; the derivative acts on axis 0.
    """
    values = np.asarray(values)
    out = np.empty_like(values, dtype=complex)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
    return out


def convolve_causal(kernel, signal, dt, rule="rect"):
    """Causal grid convolution (K * s)(t_n) = sum_{m=0}^{n} K(t_m) s(t_{n-m}) w_m dt.

    ``rule`` selects the quadrature weights w_m: "rect" keeps every weight at 1
    (the plain rectangle sum over the full range), "trapz" halves the two
    endpoint weights.  Scalar case: both 1-d.  Matrix case: kernel (n, a, b)
    against signal (n, b) or (n, b, c), contracted as K(t_m) @ s(t_{n-m}).
    """
    kernel = np.asarray(kernel, dtype=complex)
    signal = np.asarray(signal, dtype=complex)
    n = kernel.shape[0]
    if signal.shape[0] != n:
        raise ValueError("kernel and signal must share a grid")
    if kernel.ndim == 1:
        spec = "m...,m...->..."
        out = np.zeros((n,) + signal.shape[1:], dtype=complex)
    else:
        spec = "mab,mb...->a..."
        out = np.zeros((n, kernel.shape[1]) + signal.shape[2:], dtype=complex)
    for i in range(n):
        seg_k = kernel[: i + 1]
        seg_s = signal[i::-1]
        acc = np.einsum(spec, seg_k, seg_s)
        if rule == "trapz" and i > 0:
            if kernel.ndim == 1:
                acc -= 0.5 * (seg_k[0] * seg_s[0] + seg_k[i] * seg_s[i])
            else:
                acc -= 0.5 * (seg_k[0] @ seg_s[0] + seg_k[i] @ seg_s[i])
        out[i] = acc * dt
    return out


def max_workers():
    """Worker count for parameter sweeps, capped by the NZKK_THREADS env var."""
    env = os.environ.get("NZKK_THREADS", "")
    try:
        cap = int(env)
    except ValueError:
        cap = 0
    if cap < 1:
        cap = os.cpu_count() or 1
    return max(1, cap)


def parallel_map(fn, items):
    """Map ``fn`` over ``items``, preserving order; threads for numpy-bound work."""
    items = list(items)
    workers = min(max_workers(), max(1, len(items)))
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
