"""Koopman observability and controllability gramians.

Finite horizons are accumulated term by term; the infinite horizon is the
solution of a Stein equation, computed by squared-doubling (Smith) iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, KoopgramError, UnstableOperatorError

STABILITY_MARGIN = 1e-9
PSD_TOL = 1e-8


def parse_horizon(horizon):
    """Accept a nonnegative int, or ``inf``/``"inf"``/None for the infinite horizon."""
    if horizon is None or horizon == math.inf or (isinstance(horizon, str) and horizon.lower() in ("inf", "infinite")):
        return math.inf
    h = int(horizon)
    if h != horizon and not isinstance(horizon, str):
        raise ValueError(f"horizon must be an integer, got {horizon!r}")
    if h < 0:
        raise ValueError("horizon must be >= 0")
    return h


def horizon_label(horizon):
    return "inf" if horizon == math.inf else int(horizon)


def spectral_radius(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def symmetrize(X):
    X = np.asarray(X, dtype=float)
    return (X + X.T) / 2


@dataclass(frozen=True, eq=False)
class Gramian:
    matrix: np.ndarray
    kind: str                        # "observability" | "controllability"
    horizon: float | int
    projection: np.ndarray | None = None
    normalized: bool = False
    scale: float = 1.0               # divisor applied by normalization

    def __post_init__(self):
        X = symmetrize(np.atleast_2d(self.matrix))
        X.setflags(write=False)
        object.__setattr__(self, "matrix", X)
        if self.kind not in ("observability", "controllability"):
            raise ValueError(f"unknown gramian kind {self.kind!r}")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_projected(self) -> bool:
        return self.projection is not None


@dataclass(frozen=True)
class OutputMapPower:
    matrix: np.ndarray
    step: int


def stein_solve(M, Q, side: str = "left", tol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Solve ``X = M' X M + Q`` (left) or ``X = M X M' + Q`` (right).

    Doubling: ``X_{k+1} = X_k + M_k' X_k M_k``, ``M_{k+1} = M_k^2``, so after
    ``k`` iterations ``X_k`` holds the first ``2**k`` terms of the series.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if M.shape[0] != M.shape[1] or Q.shape != M.shape:
        raise DimensionError(f"M {M.shape} and Q {Q.shape} must be square and equal-sized")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    rho = spectral_radius(M)
    if rho >= 1 - STABILITY_MARGIN:
        raise UnstableOperatorError(rho, "Stein operator M")
    Mk = M.T if side == "right" else M
    X = symmetrize(Q)
    for it in range(1, max_iter + 1):
        dX = Mk.T @ X @ Mk
        X = X + dX
        Mk = Mk @ Mk
        if np.max(np.abs(dX)) < tol:
            return symmetrize(X)
    raise ConvergenceError(
        f"Stein doubling did not converge in {max_iter} iterations (spectral radius {rho:.12g})"
    )


def _require_stable(K, horizon):
    if horizon == math.inf:
        rho = spectral_radius(K)
        if rho >= 1 - STABILITY_MARGIN:
            raise UnstableOperatorError(rho, "K_x")


def observability_gramian(model, horizon=math.inf) -> Gramian:
    """``sum_{t=0}^{T} (K_x^t)' W_h' W_h K_x^t``; the infinite sum via the Stein equation."""
    if model.W_h is None:
        raise KoopgramError("model has no output selector W_h")
    horizon = parse_horizon(horizon)
    K, W = model.K_x, model.W_h
    _require_stable(K, horizon)
    if horizon == math.inf:
        X = stein_solve(K, W.T @ W, side="left")
    else:
        X = np.zeros_like(K)
        Mt = W.copy()
        for _ in range(horizon + 1):
            X += Mt.T @ Mt
            Mt = Mt @ K
    return Gramian(X, "observability", horizon)


def controllability_gramian(model, horizon=math.inf) -> Gramian:
    """``sum_{j=0}^{T} K_x^j K_u K_u' (K_x^j)'``; the infinite sum via the Stein equation."""
    if model.K_u is None:
        raise KoopgramError("model has no input operator K_u")
    horizon = parse_horizon(horizon)
    K, B = model.K_x, model.K_u
    _require_stable(K, horizon)
    if horizon == math.inf:
        X = stein_solve(K, B @ B.T, side="right")
    else:
        X = np.zeros_like(K)
        Phi = B.copy()
        for _ in range(horizon + 1):
            X += Phi @ Phi.T
            Phi = K @ Phi
    return Gramian(X, "controllability", horizon)


def phi_c(model, j: int) -> OutputMapPower:
    """Input-to-lifted-state map ``K_x^j K_u``."""
    if model.K_u is None:
        raise KoopgramError("model has no input operator K_u")
    if j < 0:
        raise ValueError("j must be >= 0")
    return OutputMapPower(np.linalg.matrix_power(model.K_x, j) @ model.K_u, j)


def phi_o(model, t: int) -> OutputMapPower:
    """Lifted-state-to-output map ``W_h K_x^t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return OutputMapPower(model.W_h @ np.linalg.matrix_power(model.K_x, t), t)


def project(g: Gramian, P) -> Gramian:
    """``P X P'``; the projection matrix is kept on the result."""
    P = np.atleast_2d(np.asarray(getattr(P, "matrix", P), dtype=float))
    if P.shape[1] != g.size:
        raise DimensionError(f"projection has {P.shape[1]} columns, gramian side is {g.size}")
    prior = g.projection
    composed = P if prior is None else P @ prior
    return Gramian(P @ g.matrix @ P.T, g.kind, g.horizon, composed, g.normalized, g.scale)


def normalize(g: Gramian) -> Gramian:
    """Divide by the largest absolute entry (zero gramians are returned unchanged)."""
    peak = float(np.max(np.abs(g.matrix))) if g.matrix.size else 0.0
    if peak == 0.0:
        return Gramian(g.matrix, g.kind, g.horizon, g.projection, True, 1.0)
    return Gramian(g.matrix / peak, g.kind, g.horizon, g.projection, True, g.scale * peak)


def psd_check(g) -> tuple[bool, float, float]:
    """``(is_psd, lambda_min, lambda_max)``; PSD iff ``lambda_min >= -1e-8 (1 + lambda_max)``."""
    X = symmetrize(getattr(g, "matrix", g))
    if X.size == 0:
        return True, 0.0, 0.0
    w = np.linalg.eigvalsh(X)
    lo, hi = float(w[0]), float(w[-1])
    return lo >= -PSD_TOL * (1 + hi), lo, hi


def gramian_to_dict(g: Gramian, seed=None) -> dict:
    ok, lo, hi = psd_check(g)
    doc = {
        "type": "gramian",
        "kind": g.kind,
        "horizon": horizon_label(g.horizon),
        "projection": None if g.projection is None else [[float(v) for v in r] for r in g.projection],
        "normalized": g.normalized,
        "scale": float(g.scale),
        "matrix": [[float(v) for v in r] for r in g.matrix],
        "lambda_min": lo,
        "lambda_max": hi,
        "psd": ok,
    }
    if seed is not None:
        doc["seed"] = seed
    return doc


def gramian_from_dict(data: dict) -> Gramian:
    if data.get("type") != "gramian":
        raise KoopgramError("not a gramian document")
    proj = data.get("projection")
    return Gramian(np.array(data["matrix"], dtype=float), data["kind"],
                   parse_horizon(data["horizon"]),
                   None if proj is None else np.array(proj, dtype=float),
                   bool(data.get("normalized", False)), float(data.get("scale", 1.0)))
