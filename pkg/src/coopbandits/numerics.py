"""Small dense numeric kernels: symmetric eigensolver, inverse normal CDF, seeded RNG."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigenpairs of a real symmetric matrix.

    ``eigenvalues`` are sorted in non-increasing order and column ``j`` of
    ``eigenvectors`` belongs to ``eigenvalues[j]``. Each eigenvector is signed
    so that its largest-magnitude entry is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _check_symmetric(a: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max |A_ij - A_ji| = {asym:.3e})")


def eig_sym(matrix, tol: float = 1e-12, max_sweeps: int = 100) -> SymmetricSpectrum:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the Frobenius norm of the off-diagonal part drops below
    ``tol * max(1, ||A||_F)``.
    """
    a = np.array(matrix, dtype=float)
    _check_symmetric(a)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a)))

    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < abs(diff) * 1e-36:
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    v = v[:, order]
    if n:
        lead = np.argmax(np.abs(v), axis=0)
        signs = np.sign(v[lead, np.arange(n)])
        v = v * np.where(signs == 0, 1.0, signs)
    return SymmetricSpectrum(eigenvalues, v)


# Rational approximation of the normal quantile (P. J. Acklam), refined below.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _quantile_lower(p: float) -> float:
    # p in (0, 0.5]
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    # one Halley step on Phi(x) - p, Phi evaluated through erfc
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def inv_norm_cdf(p: float) -> float:
    """Standard normal quantile, accurate to ~1e-15 absolute in the CDF."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in the open interval (0, 1), got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _quantile_lower(p)
    return -_quantile_lower(1.0 - p)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


class RandomStream:
    """Single-owner seeded random stream (PCG64 under the hood)."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self, mean=0.0, sd=1.0, size=None):
        return self._gen.normal(mean, sd, size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed})"


def gaussian_sample(stream: RandomStream, mean: float, sd: float) -> float:
    if sd < 0:
        raise ValueError(f"standard deviation must be non-negative, got {sd}")
    if sd == 0:
        return float(mean)
    return float(stream.normal(mean, sd))
