"""Generative models: stable VAR processes, a misspecified (omitted-variable)
VAR, and a clipped multivariate ARCH recursion, plus the blocking partition
used by the concentration experiments.

Simulation is deterministic given (spec, T, seed): the RNG stream key mixes
the seed with a per-variant tag so distinct model families never share draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DimensionError, StabilityError, UnsupportedDistributionError
from .numerics import (
    DistributionSpec,
    min_eigen_sym,
    operator_norm,
    solve_discrete_lyapunov,
    spectral_radius,
)

DEFAULT_BURN_IN = 500

_VARIANT_TAGS = {
    "gaussian_var": 1,
    "subgaussian_var": 2,
    "omitted_var": 3,
    "arch": 4,
}


@dataclass(frozen=True)
class GaussianVAR:
    """VAR(d) with Gaussian innovations N(0, noise_cov).

    ``noise_factor`` optionally overrides the Cholesky factor used to sample
    innovations (columns may exceed the base dimension when the model embeds a
    smaller process, e.g. a companion-form run).
    """

    coeff_mats: tuple
    noise_cov: np.ndarray
    noise_factor: Optional[np.ndarray] = None

    variant = "gaussian_var"

    @property
    def dim(self) -> int:
        return self.coeff_mats[0].shape[0]

    @property
    def order(self) -> int:
        return len(self.coeff_mats)


@dataclass(frozen=True)
class SubgaussianVAR:
    """VAR(1) with iid subgaussian innovations, operator_norm(A) < 1."""

    coeff_mat: np.ndarray
    innovation: DistributionSpec = field(default_factory=DistributionSpec.uniform)

    variant = "subgaussian_var"

    @property
    def dim(self) -> int:
        return self.coeff_mat.shape[0]

    @property
    def order(self) -> int:
        return 1


@dataclass(frozen=True)
class OmittedVarVAR:
    """Full VAR(1) on dim n; only the first ``retained`` coordinates are observed."""

    full_coeff: np.ndarray
    retained: int
    innovation: DistributionSpec = field(default_factory=DistributionSpec.uniform)

    variant = "omitted_var"

    @property
    def full_dim(self) -> int:
        return self.full_coeff.shape[0]

    @property
    def dim(self) -> int:
        return self.retained

    @property
    def order(self) -> int:
        return 1


@dataclass(frozen=True)
class ClippedARCH:
    """Z_t = A Z_{t-1} + c * clip(||Z_{t-1}||^m, a, b) * eps_t."""

    coeff_mat: np.ndarray
    scale: float
    exponent: float
    clip_lo: float
    clip_hi: float
    innovation: DistributionSpec = field(default_factory=DistributionSpec.uniform)

    variant = "arch"

    @property
    def dim(self) -> int:
        return self.coeff_mat.shape[0]

    @property
    def order(self) -> int:
        return 1


ModelSpec = Union[GaussianVAR, SubgaussianVAR, OmittedVarVAR, ClippedARCH]


@dataclass(frozen=True)
class Series:
    """A T x p time-ordered observation matrix (row index = time)."""

    values: np.ndarray

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def margin(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.margin
        raise KeyError(name)


def companion_form(coeff_mats: Sequence[np.ndarray]) -> np.ndarray:
    """Block companion matrix: [A_1 ... A_d] on top, identity subdiagonal blocks."""
    mats = [np.asarray(A, dtype=float) for A in coeff_mats]
    if not mats:
        raise DimensionError("need at least one coefficient matrix")
    p = mats[0].shape[0]
    for A in mats:
        if A.shape != (p, p):
            raise DimensionError(f"coefficient blocks must all be {p}x{p}, got {A.shape}")
    d = len(mats)
    if d == 1:
        return mats[0].copy()
    C = np.zeros((d * p, d * p))
    for k, A in enumerate(mats):
        C[:p, k * p:(k + 1) * p] = A
    for k in range(d - 1):
        C[(k + 1) * p:(k + 2) * p, k * p:(k + 1) * p] = np.eye(p)
    return C


def _implied_sparsity(spec: ModelSpec) -> int:
    if isinstance(spec, GaussianVAR):
        return int(sum(np.count_nonzero(A) for A in spec.coeff_mats))
    if isinstance(spec, SubgaussianVAR) or isinstance(spec, ClippedARCH):
        return int(np.count_nonzero(spec.coeff_mat))
    if isinstance(spec, OmittedVarVAR):
        return int(np.count_nonzero(spec.full_coeff))
    raise TypeError(f"unknown spec {type(spec)}")


def validate_model(spec: ModelSpec) -> ValidationReport:
    """Check stability, innovation covariance bounds, parameter ranges and
    report the implied sparsity. Never raises on a merely unstable model."""
    checks = []
    if isinstance(spec, GaussianVAR):
        r = spectral_radius(companion_form(spec.coeff_mats))
        checks.append(CheckResult("stability", r < 1.0, 1.0 - r))
        lmin = min_eigen_sym(spec.noise_cov)
        checks.append(CheckResult("noise_cov_min_eigen", lmin > 0.0, lmin))
        checks.append(CheckResult("noise_cov_finite", bool(np.all(np.isfinite(spec.noise_cov))), 0.0))
    elif isinstance(spec, SubgaussianVAR):
        nrm = operator_norm(spec.coeff_mat)
        checks.append(CheckResult("stability", nrm < 1.0, 1.0 - nrm))
        checks.append(_check_innovation(spec.innovation))
    elif isinstance(spec, OmittedVarVAR):
        nrm = operator_norm(spec.full_coeff)
        checks.append(CheckResult("stability", nrm < 1.0, 1.0 - nrm))
        ok = 1 <= spec.retained < spec.full_dim
        checks.append(CheckResult("retained_range", ok, float(spec.full_dim - spec.retained)))
        checks.append(_check_innovation(spec.innovation))
    elif isinstance(spec, ClippedARCH):
        nrm = operator_norm(spec.coeff_mat)
        checks.append(CheckResult("stability", nrm < 1.0, 1.0 - nrm))
        checks.append(CheckResult("exponent_range", 0.0 < spec.exponent < 1.0,
                                  min(spec.exponent, 1.0 - spec.exponent)))
        checks.append(CheckResult("clip_range", 0.0 < spec.clip_lo < spec.clip_hi,
                                  spec.clip_hi - spec.clip_lo))
        checks.append(CheckResult("scale_positive", spec.scale > 0.0, spec.scale))
        checks.append(_check_innovation(spec.innovation))
    else:
        raise TypeError(f"unknown spec {type(spec)}")
    checks.append(CheckResult("sparsity_count", True, float(_implied_sparsity(spec))))
    return ValidationReport(checks)


def _check_innovation(dist: DistributionSpec) -> CheckResult:
    ok = dist.family in ("gaussian", "uniform")
    return CheckResult("innovation_family", ok, 0.0)


def _innovation_cov_scale(dist: DistributionSpec) -> float:
    """Per-coordinate variance of an iid innovation vector."""
    if dist.family == "gaussian":
        return dist.variance
    if dist.family == "uniform":
        return dist.half_width ** 2 / 3.0
    raise UnsupportedDistributionError(f"unsupported innovation family {dist.family!r}")


def stationary_covariance(spec: ModelSpec) -> np.ndarray:
    """Exact stationary covariance of the companion state (linear models only).

    GaussianVAR: dp x dp companion-state covariance (top-left p x p block is the
    lag-0 covariance of Z_t). OmittedVarVAR: covariance of the full system, so
    the partition blocks Sigma_Z = S[:p,:p] and Sigma_XiZ = S[p:,:p] are
    directly available.
    """
    if isinstance(spec, GaussianVAR):
        A = companion_form(spec.coeff_mats)
        p, d = spec.dim, spec.order
        Q = np.zeros((d * p, d * p))
        Q[:p, :p] = spec.noise_cov
        return solve_discrete_lyapunov(A, Q)
    if isinstance(spec, SubgaussianVAR):
        q = _innovation_cov_scale(spec.innovation)
        return solve_discrete_lyapunov(spec.coeff_mat, q * np.eye(spec.dim))
    if isinstance(spec, OmittedVarVAR):
        q = _innovation_cov_scale(spec.innovation)
        return solve_discrete_lyapunov(spec.full_coeff, q * np.eye(spec.full_dim))
    raise UnsupportedDistributionError(
        "stationary covariance has no closed form for the ARCH model")


def _rng_for(spec: ModelSpec, seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _VARIANT_TAGS[spec.variant]]))


def _psd_factor(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (S + S.T))
        w = np.clip(w, 0.0, None)
        return V @ np.diag(np.sqrt(w))


def _draw_innovations(rng: np.random.Generator, dist: DistributionSpec, dim: int) -> np.ndarray:
    if dist.family == "gaussian":
        return math.sqrt(dist.variance) * rng.standard_normal(dim)
    if dist.family == "uniform":
        return rng.uniform(-dist.half_width, dist.half_width, size=dim)
    raise UnsupportedDistributionError(f"unsupported innovation family {dist.family!r}")


def simulate(spec: ModelSpec, T: int, seed: int, burn_in: int = DEFAULT_BURN_IN,
             return_innovations: bool = False):
    """Simulate T observations. Deterministic given (spec, T, seed).

    GaussianVAR starts exactly at stationarity (companion state drawn from the
    Lyapunov solution); the other variants start at zero and discard
    ``burn_in`` steps. Raises StabilityError for unstable specs.
    """
    if T <= 0:
        raise ValueError("T must be >= 1")
    report = validate_model(spec)
    if not report.margin("stability") > 0.0:
        raise StabilityError("model failed the stability check")
    if isinstance(spec, ClippedARCH):
        bad = [c.name for c in report.checks if not c.passed]
        if bad:
            raise ValueError(f"ARCH parameters failed validation: {bad}")
    rng = _rng_for(spec, seed)

    if isinstance(spec, GaussianVAR):
        p, d = spec.dim, spec.order
        A = companion_form(spec.coeff_mats)
        Sigma = stationary_covariance(spec)
        state = _psd_factor(Sigma) @ rng.standard_normal(d * p)
        factor = spec.noise_factor
        if factor is None:
            factor = _psd_factor(np.asarray(spec.noise_cov, dtype=float))
        ncols = factor.shape[1]
        out = np.empty((T, p))
        eps_out = np.empty((T, p)) if return_innovations else None
        for t in range(T):
            eps = factor @ rng.standard_normal(ncols)
            state = A @ state
            state[:len(eps)] += eps
            out[t] = state[:p]
            if eps_out is not None:
                eps_out[t] = eps[:p]
        series = Series(out)
        return (series, eps_out) if return_innovations else series

    if isinstance(spec, SubgaussianVAR):
        p = spec.dim
        A = spec.coeff_mat
        z = np.zeros(p)
        out = np.empty((T, p))
        eps_out = np.empty((T, p)) if return_innovations else None
        for t in range(-burn_in, T):
            eps = _draw_innovations(rng, spec.innovation, p)
            z = A @ z + eps
            if t >= 0:
                out[t] = z
                if eps_out is not None:
                    eps_out[t] = eps
        series = Series(out)
        return (series, eps_out) if return_innovations else series

    if isinstance(spec, OmittedVarVAR):
        n, k = spec.full_dim, spec.retained
        A = spec.full_coeff
        z = np.zeros(n)
        out = np.empty((T, k))
        eps_out = np.empty((T, n)) if return_innovations else None
        for t in range(-burn_in, T):
            eps = _draw_innovations(rng, spec.innovation, n)
            z = A @ z + eps
            if t >= 0:
                out[t] = z[:k]
                if eps_out is not None:
                    eps_out[t] = eps
        series = Series(out)
        return (series, eps_out) if return_innovations else series

    if isinstance(spec, ClippedARCH):
        p = spec.dim
        A = spec.coeff_mat
        z = np.zeros(p)
        out = np.empty((T, p))
        eps_out = np.empty((T, p)) if return_innovations else None
        for t in range(-burn_in, T):
            sigma = spec.scale * float(np.clip(np.linalg.norm(z) ** spec.exponent,
                                               spec.clip_lo, spec.clip_hi))
            eps = _draw_innovations(rng, spec.innovation, p)
            z = A @ z + sigma * eps
            if t >= 0:
                out[t] = z
                if eps_out is not None:
                    eps_out[t] = sigma * eps
        series = Series(out)
        return (series, eps_out) if return_innovations else series

    raise TypeError(f"unknown spec {type(spec)}")


@dataclass(frozen=True)
class BlockPartition:
    """1-based closed-interval odd/even blocks plus an optional remainder."""

    T: int
    block_length: int
    mu: int
    odd: tuple
    even: tuple
    remainder: Optional[tuple]


def blocking_indices(T: int, a_T: int) -> BlockPartition:
    """Partition [1, T] into mu = floor(T/(2 a_T)) odd/even blocks of length a_T."""
    if a_T < 1 or 2 * a_T > T:
        raise ValueError(f"block length a_T={a_T} out of range for T={T}")
    mu = T // (2 * a_T)
    odd = tuple((2 * (j - 1) * a_T + 1, (2 * j - 1) * a_T) for j in range(1, mu + 1))
    even = tuple(((2 * j - 1) * a_T + 1, 2 * j * a_T) for j in range(1, mu + 1))
    rest = None
    if 2 * mu * a_T < T:
        rest = (2 * mu * a_T + 1, T)
    return BlockPartition(T=T, block_length=a_T, mu=mu, odd=odd, even=even, remainder=rest)


def banded_sparse_matrix(p: int, s: int, op_norm_target: float, offset: int = 1) -> np.ndarray:
    """Deterministic s-sparse p x p matrix on a banded pattern, rescaled so its
    operator norm equals op_norm_target.

    Entries sit on diagonals ``offset``, ``offset+1``, ... (wrapping through
    rows), with alternating signs and mildly varying magnitudes so the support
    is not a constant matrix. Rescaling is a direct multiply: the operator norm
    is positively homogeneous, so no bisection is needed.
    """
    if not (1 <= s <= p * p):
        raise ValueError(f"sparsity s={s} out of range for p={p}")
    if not (0.0 < op_norm_target):
        raise ValueError("op_norm_target must be positive")
    A = np.zeros((p, p))
    band = offset
    placed = 0
    i = 0
    while placed < s:
        j = (i + band) % p
        if A[i, j] == 0.0:
            sign = -1.0 if placed % 2 else 1.0
            A[i, j] = sign * (0.5 + 0.5 * (placed + 1) / s)
            placed += 1
        i += 1
        if i == p:
            i = 0
            band += 1
    nrm = operator_norm(A)
    return A * (op_norm_target / nrm)


def make_example_spec(example: str, p: int, s: int, op_norm_target: float = 0.9,
                      arch_scale: float = 1.0, arch_exponent: float = 0.5,
                      arch_clip: tuple = (0.5, 2.0)) -> ModelSpec:
    """Build the model for one cell of the scaling study.

    ``example`` is one of gaussian_var / subgaussian_var / omitted_var / arch.
    The driving matrix is s-sparse banded with operator norm op_norm_target;
    noise covariance is the identity (unit-variance innovations).
    """
    if example == "gaussian_var":
        A = banded_sparse_matrix(p, s, op_norm_target)
        return GaussianVAR(coeff_mats=(A,), noise_cov=np.eye(p))
    if example == "subgaussian_var":
        A = banded_sparse_matrix(p, s, op_norm_target)
        return SubgaussianVAR(coeff_mat=A)
    if example == "omitted_var":
        # retained block banded s-sparse; one omitted channel feeding row 0 and
        # fed by column 0; whole matrix rescaled to the target norm
        Azz = banded_sparse_matrix(p, s, op_norm_target)
        full = np.zeros((p + 1, p + 1))
        full[:p, :p] = Azz
        full[0, p] = 0.5 * op_norm_target
        full[p, 0] = 0.5 * op_norm_target
        full[p, p] = 0.5 * op_norm_target
        full *= op_norm_target / operator_norm(full)
        return OmittedVarVAR(full_coeff=full, retained=p)
    if example == "arch":
        A = banded_sparse_matrix(p, s, op_norm_target)
        lo, hi = arch_clip
        return ClippedARCH(coeff_mat=A, scale=arch_scale, exponent=arch_exponent,
                           clip_lo=lo, clip_hi=hi)
    raise ValueError(f"unknown example tag {example!r}")
