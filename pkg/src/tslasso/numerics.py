"""Dense linear-algebra and scalar kernels consumed by the rest of the package.

All functions are pure and operate on plain numpy arrays (row-major, float64).
Symmetric inputs are symmetrized defensively before use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError, StabilityError, UnsupportedDistributionError

#: Largest integer moment order used in the subgaussian-norm supremum. The
#: p^{-1/2}(E|U|^p)^{1/p} sequence is eventually decreasing for every supported
#: family, so truncating at 32 loses nothing measurable.
SUBGAUSSIAN_P_MAX = 32


@dataclass(frozen=True)
class DistributionSpec:
    """A centered scalar / iid-coordinate innovation law.

    Families:
      - ``gaussian``: N(0, variance)
      - ``uniform``: U(-half_width, half_width); the default half_width sqrt(3)
        gives unit variance per coordinate
      - ``bounded``: worst-case variable supported on [lo, hi] (moments bounded
        by max(|lo|, |hi|)^p); lo == hi == 0 degenerates to a point mass at 0
    """

    family: str
    variance: float = 1.0
    half_width: float = math.sqrt(3.0)
    lo: float = 0.0
    hi: float = 0.0

    @staticmethod
    def gaussian(variance: float = 1.0) -> "DistributionSpec":
        return DistributionSpec(family="gaussian", variance=float(variance))

    @staticmethod
    def uniform(half_width: float = math.sqrt(3.0)) -> "DistributionSpec":
        return DistributionSpec(family="uniform", half_width=float(half_width))

    @staticmethod
    def bounded(lo: float, hi: float) -> "DistributionSpec":
        if hi < lo:
            raise ValueError("bounded distribution requires hi >= lo")
        return DistributionSpec(family="bounded", lo=float(lo), hi=float(hi))


def _as_square(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return M


def spectral_radius(M: np.ndarray) -> float:
    """Maximum eigenvalue modulus of a square matrix.

    Backed by LAPACK's dense eigensolver: plain power iteration cannot reach
    1e-8 relative accuracy when the dominant eigenvalues form a complex pair
    (e.g. scaled rotations), which this artifact relies on.
    """
    M = _as_square(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def operator_norm(M: np.ndarray, rel_tol: float = 1e-8, max_iter: int = 20000) -> float:
    """Largest singular value via power iteration on M'M.

    The start vector is the normalized all-ones vector so results are
    bit-reproducible per platform; a deterministic restart perturbation guards
    against an unlucky orthogonal start.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"expected a 2-d array, got shape {M.shape}")
    if M.size == 0:
        return 0.0
    n = M.shape[1]
    S = M.T @ M
    v = np.ones(n) / math.sqrt(n)
    lam = float(v @ S @ v)
    for it in range(1, max_iter + 1):
        w = S @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam = float(v @ S @ v)
        # residual certificate: lambda_max - lam <= ||Sv - lam v||
        res = float(np.linalg.norm(S @ v - lam * v))
        if res <= rel_tol * max(lam, 1e-300):
            return math.sqrt(max(lam, 0.0))
        if it % 500 == 0:
            # deterministic restart kick in case the start was orthogonal to
            # the dominant eigenspace
            v = v + 1e-6 * np.cos(np.arange(n, dtype=float))
            v /= np.linalg.norm(v)
    raise NumericError(
        "operator_norm power iteration did not converge",
        best_estimate=math.sqrt(max(lam, 0.0)),
    )


def min_eigen_sym(S: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix (LAPACK symmetric solver)."""
    S = _as_square(S)
    S = 0.5 * (S + S.T)
    return float(np.linalg.eigvalsh(S)[0])


def solve_discrete_lyapunov(A: np.ndarray, Q: np.ndarray, tol: float = 1e-12,
                            max_doublings: int = 200) -> np.ndarray:
    """Solve Sigma = A Sigma A' + Q by fixed-point iteration with squaring.

    Requires spectral_radius(A) < 1 and Q symmetric PSD.
    """
    A = _as_square(A)
    Q = _as_square(Q)
    if A.shape != Q.shape:
        raise DimensionError(f"A and Q shapes differ: {A.shape} vs {Q.shape}")
    r = spectral_radius(A)
    if r >= 1.0:
        raise StabilityError(f"spectral radius {r:.6f} >= 1; Lyapunov equation has no stable solution")
    S = 0.5 * (Q + Q.T)
    P = A.copy()
    for _ in range(max_doublings):
        inc = P @ S @ P.T
        S = S + inc
        S = 0.5 * (S + S.T)
        if np.linalg.norm(inc, "fro") < tol * (1.0 + np.linalg.norm(S, "fro")):
            return S
        P = P @ P
    raise NumericError("Lyapunov doubling iteration did not converge", best_estimate=S)


def soft_threshold(x, t: float):
    """Proximal operator of t*|.|: sign(x) * max(|x| - t, 0). Accepts arrays."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _log_abs_moment(dist: DistributionSpec, p: int) -> float:
    """log E|U|^p for the supported families; -inf for a point mass at 0."""
    if dist.family == "gaussian":
        if dist.variance == 0.0:
            return -math.inf
        # E|U|^p = sigma^p 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
        return (0.5 * p * math.log(dist.variance) + 0.5 * p * math.log(2.0)
                + math.lgamma((p + 1) / 2.0) - 0.5 * math.log(math.pi))
    if dist.family == "uniform":
        if dist.half_width == 0.0:
            return -math.inf
        # E|U|^p = h^p / (p+1) for U ~ U(-h, h)
        return p * math.log(dist.half_width) - math.log(p + 1.0)
    if dist.family == "bounded":
        m = max(abs(dist.lo), abs(dist.hi))
        if m == 0.0:
            return -math.inf
        return p * math.log(m)
    raise UnsupportedDistributionError(f"unsupported family {dist.family!r}")


def scalar_subgaussian_norm(dist: DistributionSpec) -> float:
    """psi_2 norm: sup over integer p in [1, 32] of p^{-1/2} (E|U|^p)^{1/p}."""
    best = 0.0
    for p in range(1, SUBGAUSSIAN_P_MAX + 1):
        lm = _log_abs_moment(dist, p)
        if lm == -math.inf:
            continue
        val = math.exp(lm / p - 0.5 * math.log(p))
        best = max(best, val)
    return best
