"""Independent brute-force reference computations used by the test suite.

These deliberately avoid the package's pseudo-spectral product path: the
advection term is assembled as a direct truncated convolution over mode pairs,
at O(n^6) cost, so it can vouch for the FFT-based implementation at small n.
"""

import numpy as np

from burgers3d import spectral as sp


def convolution_advection(u: sp.SpectralVectorField) -> sp.SpectralVectorField:
    """Direct convolution sum for (u.grad)u, truncated to the cube |k|_inf <= n.

    coefficient_i(k) = sum_{p+q=k} (i q . u(p)) u_i(q), all triples in the cube.
    """
    grid = u.grid
    n = grid.n
    m = grid.m
    # natural ordering: index i corresponds to wavenumber i - n
    cn = np.fft.fftshift(u.coeffs, axes=(1, 2, 3))
    out = np.zeros_like(cn)
    kq = np.arange(m) - n
    for a in range(m):
        for b in range(m):
            for c in range(m):
                cp = cn[:, a, b, c]
                if not np.any(cp):
                    continue
                s1 = slice(max(0, n - a), min(2 * n, 3 * n - a) + 1)
                s2 = slice(max(0, n - b), min(2 * n, 3 * n - b) + 1)
                s3 = slice(max(0, n - c), min(2 * n, 3 * n - c) + 1)
                t1 = slice(s1.start + a - n, s1.stop + a - n)
                t2 = slice(s2.start + b - n, s2.stop + b - n)
                t3 = slice(s3.start + c - n, s3.stop + c - n)
                q1 = kq[s1].reshape(-1, 1, 1)
                q2 = kq[s2].reshape(1, -1, 1)
                q3 = kq[s3].reshape(1, 1, -1)
                factor = 1j * (cp[0] * q1 + cp[1] * q2 + cp[2] * q3)
                out[:, t1, t2, t3] += factor * cn[:, s1, s2, s3]
    return sp.SpectralVectorField(grid, np.fft.ifftshift(out, axes=(1, 2, 3)))


def quadrature_l1(u: sp.SpectralVectorField, points: int = 256) -> float:
    """High-resolution Riemann quadrature of the pointwise magnitude."""
    sample = sp.to_physical(u, points)
    mag = np.sqrt((sample.values**2).sum(axis=0))
    return float(mag.sum() * (2 * np.pi / points) ** 3)


def trapezoid_cumulative(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Composite trapezoid cumulative integral (reference re-implementation)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    for i in range(1, len(times)):
        out[i] = out[i - 1] + 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1])
    return out
