"""Turn a simulated series into the lagged regression objects: design X,
response Y, population target, residual matrix, Gram matrix and the composite
subgaussian constant."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dgm import (
    ClippedARCH,
    GaussianVAR,
    ModelSpec,
    OmittedVarVAR,
    Series,
    SubgaussianVAR,
    stationary_covariance,
)
from .errors import DimensionError, NumericError, UnsupportedDistributionError
from .numerics import DistributionSpec, operator_norm, scalar_subgaussian_norm


@dataclass
class RegressionProblem:
    X: np.ndarray           # T_eff x (p*d), lag-1 block first
    Y: np.ndarray           # T_eff x q
    lag: int
    gram: np.ndarray        # X'X / T_eff
    theta_star: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class SubgaussianConstants:
    K_X: float
    K_Y: float
    K_composite: float


def build_problem(Z: Series, d: int) -> RegressionProblem:
    """Lagged regression with T_eff = len(Z) - d rows.

    Row t of X concatenates (Z_{t+d-1}, ..., Z_t), most recent lag first, to
    match the companion-state stacking; row t of Y is Z_{t+d}.
    """
    if d < 1:
        raise ValueError("lag d must be >= 1")
    if Z.length <= d:
        raise ValueError(f"series length {Z.length} must exceed lag {d}")
    V = Z.values
    T_eff = Z.length - d
    blocks = [V[d - k: d - k + T_eff] for k in range(1, d + 1)]
    X = np.hstack(blocks)
    Y = V[d:]
    gram = X.T @ X / T_eff
    return RegressionProblem(X=X, Y=Y, lag=d, gram=gram)


def population_target(spec: ModelSpec, d: int) -> np.ndarray:
    """Best-linear-predictor coefficient matrix, arranged to match
    build_problem's column order (lag-1 block first)."""
    if isinstance(spec, GaussianVAR):
        if d != spec.order:
            raise ValueError(f"lag {d} does not match model order {spec.order}")
        return np.vstack([A.T for A in spec.coeff_mats])
    if isinstance(spec, (SubgaussianVAR, ClippedARCH)):
        if d != 1:
            raise ValueError("subgaussian VAR / ARCH targets are defined for d = 1")
        return spec.coeff_mat.T.copy()
    if isinstance(spec, OmittedVarVAR):
        if d != 1:
            raise ValueError("omitted-variable target is defined for d = 1")
        p = spec.retained
        A = spec.full_coeff
        Azz = A[:p, :p]
        Azxi = A[:p, p:]
        S = stationary_covariance(spec)
        Sz = S[:p, :p]
        Sxiz = S[p:, :p]
        try:
            correction = Azxi @ np.linalg.solve(Sz, Sxiz.T).T
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular retained-block covariance: {exc}") from exc
        return (Azz + correction).T
    raise TypeError(f"unknown spec {type(spec)}")


def residuals(prob: RegressionProblem, theta_star: np.ndarray) -> np.ndarray:
    """W = Y - X theta_star; stored on the problem as a side effect."""
    if theta_star.shape[0] != prob.X.shape[1] or theta_star.shape[1] != prob.Y.shape[1]:
        raise DimensionError(
            f"theta_star shape {theta_star.shape} incompatible with "
            f"X {prob.X.shape} / Y {prob.Y.shape}")
    W = prob.Y - prob.X @ theta_star
    prob.theta_star = theta_star
    prob.W = W
    return W


def _max_eigen(S: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (S + S.T))[-1])


def subgaussian_constants(spec: ModelSpec, theta_star: np.ndarray) -> SubgaussianConstants:
    """Analytic subgaussian constants.

    Linear Gaussian models use the exact stationary covariance; subgaussian /
    omitted-variable / ARCH models use the conservative geometric-series bound
    K_E / (1 - |||A|||) ("analytic-upper"). K_composite follows the
    sqrt(K_Y) + sqrt(K_X)(1 + |||theta*|||) composition rule.
    """
    if isinstance(spec, GaussianVAR):
        S = stationary_covariance(spec)
        p = spec.dim
        sqrt_KX = scalar_subgaussian_norm(DistributionSpec.gaussian(_max_eigen(S)))
        sqrt_KY = scalar_subgaussian_norm(DistributionSpec.gaussian(_max_eigen(S[:p, :p])))
    elif isinstance(spec, (SubgaussianVAR, OmittedVarVAR, ClippedARCH)):
        K_E = scalar_subgaussian_norm(spec.innovation)
        if isinstance(spec, ClippedARCH):
            K_E *= spec.scale * spec.clip_hi
        A = spec.full_coeff if isinstance(spec, OmittedVarVAR) else spec.coeff_mat
        nrm = operator_norm(A)
        if nrm >= 1.0:
            raise UnsupportedDistributionError("geometric-series bound needs |||A||| < 1")
        sqrt_KX = K_E / (1.0 - nrm)
        sqrt_KY = sqrt_KX
    else:
        raise TypeError(f"unknown spec {type(spec)}")
    K_comp = sqrt_KY + sqrt_KX * (1.0 + operator_norm(theta_star))
    return SubgaussianConstants(K_X=sqrt_KX ** 2, K_Y=sqrt_KY ** 2, K_composite=K_comp)
