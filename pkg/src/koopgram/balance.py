"""Balanced realization and truncation of a lifted Koopman model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, KoopgramError, NotPSDError
from .gramians import horizon_label, psd_check, spectral_radius, symmetrize

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
DEFAULT_EPS_REG = 1e-10
HSV_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class BalancedRealization:
    T: np.ndarray          # (k, n_L)
    T_inv: np.ndarray      # (n_L, k)
    hsv: np.ndarray        # all n_L Hankel singular values, nonincreasing
    A_eta: np.ndarray
    B_eta: np.ndarray | None
    C_eta: np.ndarray | None
    regularization_used: float = 0.0
    regularization_shift: float = 0.0
    truncated: int = 0     # trailing hsv dropped from the realization
    gramian_horizon: float | int = math.inf

    @property
    def rank(self) -> int:
        return self.T.shape[0]

    @property
    def lifted_dim(self) -> int:
        return self.T.shape[1]

    @property
    def stable(self) -> bool:
        return spectral_radius(self.A_eta) < 1.0


@dataclass(frozen=True, eq=False)
class ReducedModel:
    order: int
    A_r: np.ndarray
    B_r: np.ndarray | None
    C_r: np.ndarray | None
    lift_in: np.ndarray
    bound_upper: float
    bound_lower: float
    advisory_only: bool = False


def sqrt_psd(X) -> np.ndarray:
    """Symmetric square root through ``X = Q diag(w) Q'`` with negative ``w`` clipped."""
    X = symmetrize(getattr(X, "matrix", X))
    ok, lo, hi = psd_check(X)
    if not ok:
        raise NotPSDError(f"matrix is not PSD (lambda_min={lo:.6g}, lambda_max={hi:.6g})")
    w, Q = np.linalg.eigh(X)
    return symmetrize((Q * np.sqrt(np.clip(w, 0.0, None))) @ Q.T)


def hankel_singular_values(Xc, Xo) -> np.ndarray:
    """Square roots of the eigenvalues of ``Xc Xo``, from the symmetric ``S Xo S``."""
    Xc = symmetrize(getattr(Xc, "matrix", Xc))
    Xo = symmetrize(getattr(Xo, "matrix", Xo))
    if Xc.shape != Xo.shape:
        raise DimensionError(f"gramian sizes differ: {Xc.shape} vs {Xo.shape}")
    if not psd_check(Xo)[0]:
        raise NotPSDError("observability gramian is not PSD")
    S = sqrt_psd(Xc)
    w = np.linalg.eigvalsh(symmetrize(S @ Xo @ S))
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def balance(Xc, Xo, model, eps_reg: float | None = None) -> BalancedRealization:
    """Balance the gramian pair and transform ``(K_x, K_u, W_h)``.

    ``Xc`` is shifted by ``eps_reg * tr(Xc)/n_L * I`` when its condition
    number exceeds 1e12.  Hankel singular values below ``1e-14 * sigma_1`` are
    removed from the realization and counted in ``truncated``.
    """
    horizon = getattr(Xc, "horizon", math.inf)
    for g in (Xc, Xo):
        if getattr(g, "projection", None) is not None:
            raise KoopgramError("balancing needs lifted (unprojected) gramians")
    Xc = symmetrize(getattr(Xc, "matrix", Xc))
    Xo = symmetrize(getattr(Xo, "matrix", Xo))
    n = model.lifted_dim
    if Xc.shape != (n, n) or Xo.shape != (n, n):
        raise DimensionError(f"gramians must be {n}x{n} to match the model")
    for name, X in (("controllability", Xc), ("observability", Xo)):
        ok, lo, hi = psd_check(X)
        if not ok:
            raise NotPSDError(f"{name} gramian is not PSD (lambda_min={lo:.6g})")
    eps_reg = DEFAULT_EPS_REG if eps_reg is None else float(eps_reg)

    w = np.linalg.eigvalsh(Xc)
    if w[-1] <= 0.0 or np.trace(Xc) <= 0.0:
        raise KoopgramError("controllability gramian is numerically zero")
    cond = w[-1] / w[0] if w[0] > 0 else math.inf
    shift, used = 0.0, 0.0
    if cond > COND_LIMIT:
        if eps_reg <= 0.0:
            raise KoopgramError(f"controllability gramian is ill-conditioned (cond={cond:.3g}) "
                                "and regularization is disabled")
        shift, used = eps_reg * np.trace(Xc) / n, eps_reg
        Xc = Xc + shift * np.eye(n)
        log.info("regularized X_c (cond %.3g) with shift %.3g", cond, shift)

    wc, Qc = np.linalg.eigh(Xc)
    wc = np.clip(wc, 0.0, None)
    S = symmetrize((Qc * np.sqrt(wc)) @ Qc.T)
    S_inv = symmetrize((Qc / np.sqrt(wc)) @ Qc.T)

    U, s2, _ = np.linalg.svd(symmetrize(S @ Xo @ S))
    U = _fix_signs(U)
    sigma = np.sqrt(np.clip(s2, 0.0, None))
    if sigma[0] == 0.0:
        raise KoopgramError("all Hankel singular values are zero")
    k = int(np.sum(sigma >= HSV_FLOOR * sigma[0]))
    if k < n:
        log.warning("dropping %d Hankel singular values below %.1e * sigma_1", n - k, HSV_FLOOR)
    Uk, sk = U[:, :k], sigma[:k]
    T_inv = S @ Uk / np.sqrt(sk)
    T = (np.sqrt(sk)[:, None] * Uk.T) @ S_inv

    A = T @ model.K_x @ T_inv
    B = None if model.K_u is None else T @ model.K_u
    C = None if model.W_h is None else model.W_h @ T_inv
    return BalancedRealization(T, T_inv, sigma, A, B, C, used, float(shift), n - k, horizon)


def truncate(bal: BalancedRealization, r: int) -> ReducedModel:
    """Keep the leading ``r`` balanced coordinates.

    Bounds: ``sigma_{r+1} <= ||G - G_r||_inf <= 2 sum_{i>r} sigma_i``; they are
    marked advisory when the realization is unstable or the gramians were
    finite-horizon.
    """
    if not 1 <= r <= bal.rank:
        raise ValueError(f"order must be in [1, {bal.rank}], got {r}")
    tail = bal.hsv[r:]
    upper = float(2.0 * tail.sum())
    lower = float(tail[0]) if tail.size else 0.0
    advisory = (not bal.stable) or bal.gramian_horizon != math.inf
    return ReducedModel(
        r,
        bal.A_eta[:r, :r].copy(),
        None if bal.B_eta is None else bal.B_eta[:r].copy(),
        None if bal.C_eta is None else bal.C_eta[:, :r].copy(),
        bal.T[:r].copy(),
        upper,
        lower,
        advisory,
    )


def simulate_reduced(rm: ReducedModel, x0=None, dictionary=None, input_dictionary=None,
                     input_signal=None, horizon: int = 1) -> np.ndarray:
    """Outputs ``y_t = C_r eta_t`` for ``t = 0..horizon``.

    ``eta_0 = lift_in psi(x0)`` (zero when ``x0`` is None).  Inputs are lifted
    with ``input_dictionary`` when given, otherwise used as-is.
    """
    from .dynsys import input_samples

    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if rm.C_r is None:
        raise KoopgramError("reduced model has no output map")
    if x0 is None:
        eta = np.zeros(rm.order)
    else:
        if dictionary is None:
            raise KoopgramError("a dictionary is needed to lift x0")
        eta = rm.lift_in @ dictionary.lift(np.asarray(x0, dtype=float))
    drive = None
    if rm.B_r is not None and input_signal is not None:
        m = input_dictionary.input_dim if input_dictionary is not None else rm.B_r.shape[1]
        U = input_samples(input_signal, horizon, m)
        if input_dictionary is not None:
            U = input_dictionary.lift(U.T).T
        drive = U @ rm.B_r.T
    ys = np.empty((horizon + 1, rm.C_r.shape[0]))
    for t in range(horizon + 1):
        ys[t] = rm.C_r @ eta
        if t < horizon:
            eta = rm.A_r @ eta + (drive[t] if drive is not None else 0.0)
    return ys


# ---------------------------------------------------------------------------
# serialization


def _mat(M):
    return None if M is None else [[float(v) for v in row] for row in np.atleast_2d(M)]


def _arr(v):
    return None if v is None else np.array(v, dtype=float)


def balanced_to_dict(bal: BalancedRealization, seed=None) -> dict:
    doc = {
        "type": "balanced-realization",
        "hsv": [float(v) for v in bal.hsv],
        "rank": bal.rank,
        "truncated": bal.truncated,
        "T": _mat(bal.T),
        "T_inv": _mat(bal.T_inv),
        "A_eta": _mat(bal.A_eta),
        "B_eta": _mat(bal.B_eta),
        "C_eta": _mat(bal.C_eta),
        "regularization_used": bal.regularization_used,
        "regularization_shift": bal.regularization_shift,
        "gramian_horizon": horizon_label(bal.gramian_horizon),
        "stable": bal.stable,
    }
    if seed is not None:
        doc["seed"] = seed
    return doc


def balanced_from_dict(data: dict) -> BalancedRealization:
    from .gramians import parse_horizon

    if data.get("type") != "balanced-realization":
        raise KoopgramError("not a balanced-realization document")
    return BalancedRealization(
        _arr(data["T"]), _arr(data["T_inv"]), _arr(data["hsv"]), _arr(data["A_eta"]),
        _arr(data.get("B_eta")), _arr(data.get("C_eta")),
        float(data.get("regularization_used", 0.0)), float(data.get("regularization_shift", 0.0)),
        int(data.get("truncated", 0)), parse_horizon(data.get("gramian_horizon", "inf")),
    )


def reduced_to_dict(rm: ReducedModel, seed=None) -> dict:
    doc = {
        "type": "reduced-model",
        "order": rm.order,
        "A_r": _mat(rm.A_r),
        "B_r": _mat(rm.B_r),
        "C_r": _mat(rm.C_r),
        "lift_in": _mat(rm.lift_in),
        "bound_upper": rm.bound_upper,
        "bound_lower": rm.bound_lower,
        "advisory_only": rm.advisory_only,
    }
    if seed is not None:
        doc["seed"] = seed
    return doc


def reduced_from_dict(data: dict) -> ReducedModel:
    if data.get("type") != "reduced-model":
        raise KoopgramError("not a reduced-model document")
    return ReducedModel(int(data["order"]), _arr(data["A_r"]), _arr(data.get("B_r")),
                        _arr(data.get("C_r")), _arr(data["lift_in"]),
                        float(data["bound_upper"]), float(data["bound_lower"]),
                        bool(data.get("advisory_only", False)))
