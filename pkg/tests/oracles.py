"""Independent numeric oracles used by the tests.

The Jacobi oracle works with linear functionals ``F_a = mean(a . u)`` of
periodic fields on a torus.  Spatial derivatives are spectral, the outer
bracket is a complex-step directional derivative, and no symbolic delta
calculus is involved.
"""

from __future__ import annotations

import itertools

import numpy as np


class Torus:
    def __init__(self, dim: int, n: int):
        self.dim = dim
        self.n = n
        axes = [np.arange(n) * 2 * np.pi / n] * dim
        self.x = np.meshgrid(*axes, indexing="ij")
        k = np.fft.fftfreq(n, d=1.0 / n)
        k[n // 2] = 0.0
        self.k = np.meshgrid(*([k] * dim), indexing="ij")

    def _real_deriv(self, arr, multi):
        spec = np.fft.fftn(arr)
        for axis, times in enumerate(multi):
            if times:
                spec = spec * (1j * self.k[axis]) ** times
        return np.real(np.fft.ifftn(spec))

    def deriv(self, arr, multi):
        """Spectral derivative acting separately on real and imaginary parts."""
        if not any(multi):
            return arr
        out = self._real_deriv(np.real(arr), multi).astype(complex)
        if np.iscomplexobj(arr) and np.any(np.imag(arr)):
            out = out + 1j * self._real_deriv(np.imag(arr), multi)
        return out

    def random_field(self, rng, modes: int = 1, amplitude: float = 0.4):
        out = np.full(self.x[0].shape, rng.uniform(-amplitude, amplitude))
        for kv in itertools.product(range(-modes, modes + 1), repeat=self.dim):
            if not any(kv) or kv < tuple(-c for c in kv):
                continue
            phase = sum(c * xx for c, xx in zip(kv, self.x))
            out = out + rng.uniform(-amplitude, amplitude) * np.cos(phase)
            out = out + rng.uniform(-amplitude, amplitude) * np.sin(phase)
        return out.astype(complex)


def evaluate(poly, fields, torus, cache):
    total = np.zeros(torus.x[0].shape, dtype=complex)
    for mono, c in poly.items():
        term = np.full(torus.x[0].shape, float(c), dtype=complex)
        for v, e in mono:
            key = (v.field, v.deriv)
            if key not in cache:
                cache[key] = torus.deriv(fields[v.field], v.deriv)
            term = term * cache[key] ** e
        total = total + term
    return total


def apply_operator(B, fields, covector, torus):
    """``V^i = sum_j B[i, j, l](u) D^l covector_j``."""
    n = B.fieldset.size
    cache: dict = {}
    out = [np.zeros(torus.x[0].shape, dtype=complex) for _ in range(n)]
    for (i, j, l), c in B.coeffs.items():
        out[i] = out[i] + evaluate(c, fields, torus, cache) * torus.deriv(covector[j], l)
    return out


def pairing(B, fields, a, b, torus):
    vb = apply_operator(B, fields, b, torus)
    return sum(np.mean(a[i] * vb[i]) for i in range(len(a)))


def jacobi_residual(B, fields, covectors, torus, step: float = 1e-20) -> float:
    """``{{F,G},H} + cyclic`` for three linear functionals."""
    total = 0.0
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        flow = apply_operator(B, fields, covectors[c], torus)
        moved = [f + 1j * step * np.real(v) for f, v in zip(fields, flow)]
        total += np.imag(pairing(B, moved, covectors[a], covectors[b], torus)) / step
    return abs(total)


def max_jacobi_residual(B, configurations: int = 8, seed: int = 0, n: int | None = None) -> float:
    dim = B.dim
    n = n or (48 if dim == 1 else 20)
    torus = Torus(dim, n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    size = B.fieldset.size
    for _ in range(configurations):
        fields = [torus.random_field(rng) for _ in range(size)]
        covectors = [[torus.random_field(rng) for _ in range(size)] for _ in range(3)]
        worst = max(worst, jacobi_residual(B, fields, covectors, torus))
    return worst

