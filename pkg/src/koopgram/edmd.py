"""Extended DMD: snapshot assembly, regularized Koopman regression, prediction."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dictionary import (
    Dictionary,
    InputDictionary,
    Selector,
    dictionary_from_spec,
    input_dictionary_from_spec,
    state_projector,
)
from .dynsys import DiscreteSystem, DivergenceError, Trajectory, input_samples, simulate
from .errors import DimensionError, KoopgramError

log = logging.getLogger(__name__)

RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class SnapshotPair:
    """Lifted snapshot matrices; column ``j`` pairs ``psi(x_t)`` with ``psi(x_{t+1})``."""

    psi_past: np.ndarray
    psi_future: np.ndarray
    psi_u_past: np.ndarray | None = None
    states_past: np.ndarray | None = None
    states_future: np.ndarray | None = None

    def __post_init__(self):
        N = self.psi_past.shape[1]
        for name in ("psi_future", "psi_u_past", "states_past", "states_future"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[1] != N:
                raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {N}")

    @property
    def n_snapshots(self) -> int:
        return self.psi_past.shape[1]

    @property
    def has_input(self) -> bool:
        return self.psi_u_past is not None


@dataclass(frozen=True, eq=False)
class KoopmanModel:
    """Lifted linear model ``psi' = K_x psi + K_u psi_u``, ``y = W_h psi``, ``x = P_x psi``."""

    K_x: np.ndarray
    K_u: np.ndarray | None = None
    W_h: np.ndarray | None = None
    P_x: np.ndarray | None = None
    dictionary: Dictionary | None = None
    input_dictionary: InputDictionary | None = None
    regularization: float = 0.0
    fit_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K_x, dtype=float))
        nL = K.shape[0]
        if K.shape != (nL, nL):
            raise DimensionError(f"K_x must be square, got {K.shape}")
        object.__setattr__(self, "K_x", K)
        if self.K_u is not None:
            Ku = np.asarray(self.K_u, dtype=float).reshape(nL, -1)
            object.__setattr__(self, "K_u", Ku)
        for name in ("W_h", "P_x"):
            M = getattr(self, name)
            if isinstance(M, Selector):
                M = M.matrix
            if M is not None:
                M = np.atleast_2d(np.asarray(M, dtype=float))
                if M.shape[1] != nL:
                    raise DimensionError(f"{name} must have {nL} columns, got {M.shape}")
            object.__setattr__(self, name, M)
        if self.dictionary is not None and self.dictionary.lifted_dim != nL:
            raise DimensionError("dictionary size does not match K_x")
        for name in ("K_x", "K_u", "W_h", "P_x"):
            M = getattr(self, name)
            if M is not None:
                if not np.all(np.isfinite(M)):
                    raise KoopgramError(f"{name} has non-finite entries")
                M.setflags(write=False)

    @classmethod
    def from_matrices(cls, K_x, K_u=None, W_h=None, P_x=None) -> "KoopmanModel":
        return cls(K_x=K_x, K_u=K_u, W_h=W_h, P_x=P_x)

    @property
    def lifted_dim(self) -> int:
        return self.K_x.shape[0]

    @property
    def has_input(self) -> bool:
        return self.K_u is not None


@dataclass(frozen=True)
class Prediction:
    lifted: np.ndarray   # (T+1, n_L)
    states: np.ndarray | None
    outputs: np.ndarray | None
    mode: str


@dataclass(frozen=True)
class PredictionReport:
    per_channel_errors: np.ndarray
    total_error: float
    horizon: int
    mode: str
    channels: str = "output"

    def as_dict(self) -> dict:
        return {"per_channel_errors": [float(v) for v in self.per_channel_errors],
                "total_error": float(self.total_error), "horizon": self.horizon,
                "mode": self.mode, "channels": self.channels}


# ---------------------------------------------------------------------------
# snapshots and regression


def build_snapshots(trajs: Sequence[Trajectory], dictionary: Dictionary,
                    input_dict: InputDictionary | None = None) -> SnapshotPair:
    """Stack lifted consecutive-state pairs, trajectory by trajectory, in time order."""
    if not trajs:
        raise KoopgramError("no trajectories given")
    past, future, upast = [], [], []
    for k, tr in enumerate(trajs):
        if tr.states.shape[0] < 2:
            raise KoopgramError(f"trajectory {k} has fewer than 2 states")
        if tr.states.shape[1] != dictionary.state_dim:
            raise DimensionError(
                f"trajectory {k} has {tr.states.shape[1]} states, dictionary expects "
                f"{dictionary.state_dim}"
            )
        past.append(tr.states[:-1].T)
        future.append(tr.states[1:].T)
        if input_dict is not None:
            if tr.inputs.shape[1] != input_dict.input_dim:
                raise DimensionError(f"trajectory {k} has {tr.inputs.shape[1]} inputs, "
                                     f"input dictionary expects {input_dict.input_dim}")
            upast.append(tr.inputs.T)
    Xp, Xf = np.hstack(past), np.hstack(future)
    return SnapshotPair(
        psi_past=dictionary.lift(Xp),
        psi_future=dictionary.lift(Xf),
        psi_u_past=input_dict.lift(np.hstack(upast)) if input_dict is not None else None,
        states_past=Xp,
        states_future=Xf,
    )


def ridge_solve(Y: np.ndarray, Z: np.ndarray, zeta: float = 0.0) -> np.ndarray:
    """``argmin_G ||Y - G Z||_F^2 + zeta ||G||_F^2`` through the SVD of ``Z``.

    With ``zeta = 0`` singular values below ``1e-10 * s_max`` are discarded,
    giving the minimum-norm least-squares solution.
    """
    if zeta < 0:
        raise ValueError("regularization must be nonnegative")
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise KoopgramError("snapshot matrix is identically zero")
    if zeta == 0.0:
        keep = s > RCOND * s[0]
        gain = np.zeros_like(s)
        gain[keep] = 1.0 / s[keep]
    else:
        gain = s / (s**2 + zeta)
    return (Y @ Vt.T) * gain @ U.T


def fit_koopman(snaps: SnapshotPair, zeta: float = 0.0, *, dictionary=None,
                W_h=None, P_x=None) -> KoopmanModel:
    """Autonomous fit ``K = argmin ||Psi_f - K Psi_p||_F^2 + zeta ||K||_F^2``."""
    if snaps.n_snapshots < 1:
        raise KoopgramError("need at least one snapshot pair")
    K = ridge_solve(snaps.psi_future, snaps.psi_past, zeta)
    resid = float(np.linalg.norm(snaps.psi_future - K @ snaps.psi_past))
    if P_x is None and dictionary is not None:
        P_x = state_projector(dictionary)
    return KoopmanModel(K, None, W_h, P_x, dictionary, None, float(zeta), resid)


def fit_koopman_with_input(snaps: SnapshotPair, zeta: float = 0.0, *, dictionary=None,
                           input_dictionary=None, W_h=None, P_x=None) -> KoopmanModel:
    """Fit ``[K_x K_u]`` against the stacked regressors ``[Psi_p; Psi_u]``."""
    if not snaps.has_input:
        raise KoopgramError("snapshot pair has no lifted inputs")
    mL = snaps.psi_u_past.shape[0]
    if mL == 0:
        raise KoopgramError("input dictionary is empty (m_L = 0)")
    Z = np.vstack([snaps.psi_past, snaps.psi_u_past])
    G = ridge_solve(snaps.psi_future, Z, zeta)
    nL = snaps.psi_past.shape[0]
    resid = float(np.linalg.norm(snaps.psi_future - G @ Z))
    if P_x is None and dictionary is not None:
        P_x = state_projector(dictionary)
    return KoopmanModel(G[:, :nL], G[:, nL:], W_h, P_x, dictionary, input_dictionary,
                        float(zeta), resid)


def regress_output_selector(trajs: Sequence[Trajectory], dictionary: Dictionary) -> np.ndarray:
    """Least-squares ``W_h`` from recorded outputs, for when the output map is unknown."""
    X = np.hstack([tr.states.T for tr in trajs])
    Y = np.hstack([tr.outputs.T for tr in trajs])
    return ridge_solve(Y, dictionary.lift(X), 0.0)


def grid_initial_conditions(lo=-0.5, hi=0.5, shape=(5, 4)) -> np.ndarray:
    axes = [np.linspace(lo, hi, k) for k in shape]
    return np.array(list(itertools.product(*axes)))


def generate_training_data(sys: DiscreteSystem, initial_conditions, length: int = 30,
                           input_signal=None, cap: float = 1e12) -> list:
    """Simulate from each initial condition, dropping trajectories that diverge."""
    trajs = []
    for x0 in initial_conditions:
        try:
            trajs.append(simulate(sys, x0, input_signal, length, cap=cap))
        except DivergenceError as exc:
            log.info("discarding trajectory from %s: %s", list(x0), exc)
    if not trajs:
        raise KoopgramError("every training trajectory diverged")
    return trajs


# ---------------------------------------------------------------------------
# prediction


def _lift_inputs(model, U):
    if model.input_dictionary is not None:
        return model.input_dictionary.lift(U.T).T
    return U


def _finish(model, lifted, mode):
    states = lifted @ model.P_x.T if model.P_x is not None else None
    outputs = lifted @ model.W_h.T if model.W_h is not None else None
    return Prediction(lifted, states, outputs, mode)


def predict(model: KoopmanModel, x0=None, horizon: int = 1, input_signal=None, *,
            mode: str = "free-run", truth: Trajectory | None = None,
            use_input: bool = True) -> Prediction:
    """Predict lifted states, states and outputs over ``horizon`` steps.

    ``free-run`` propagates ``psi_{t+1} = K_x psi_t + K_u psi_u(u_t)`` from
    ``psi(x0)``.  ``one-step`` lifts each true state of ``truth`` and advances
    it once.  Setting ``use_input=False`` drops the ``K_u`` term.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if model.dictionary is None:
        raise KoopgramError("model has no dictionary; cannot lift states")
    with_u = model.has_input and use_input
    if mode == "one-step":
        if truth is None:
            raise ValueError("one-step prediction needs the true trajectory")
        if truth.horizon < horizon:
            raise DimensionError(f"truth covers {truth.horizon} steps, need {horizon}")
        Psi = model.dictionary.lift(truth.states[: horizon + 1].T).T
        nxt = Psi[:-1] @ model.K_x.T
        if with_u:
            U = truth.inputs[:horizon] if input_signal is None else \
                input_samples(input_signal, horizon, truth.inputs.shape[1])
            nxt = nxt + _lift_inputs(model, U) @ model.K_u.T
        lifted = np.vstack([Psi[:1], nxt])
    elif mode == "free-run":
        psi = model.dictionary.lift(np.asarray(x0, dtype=float))
        lifted = np.empty((horizon + 1, model.lifted_dim))
        lifted[0] = psi
        if with_u:
            m = model.input_dictionary.input_dim if model.input_dictionary else model.K_u.shape[1]
            Uf = _lift_inputs(model, input_samples(input_signal, horizon, m)) @ model.K_u.T
        for t in range(horizon):
            psi = model.K_x @ psi + (Uf[t] if with_u else 0.0)
            lifted[t + 1] = psi
    else:
        raise ValueError(f"unknown prediction mode {mode!r}")
    return _finish(model, lifted, mode)


def report_mode(model: KoopmanModel, mode: str, use_input: bool) -> str:
    if mode == "free-run":
        return "multi-step"
    if model.has_input:
        return "with-control" if use_input else "open-loop-ignoring-input"
    return "one-step"


def channel_errors(predicted: np.ndarray, actual: np.ndarray) -> np.ndarray:
    """2-norm over time of each channel's error; rows are time steps."""
    predicted, actual = np.asarray(predicted, float), np.asarray(actual, float)
    if predicted.shape != actual.shape:
        raise DimensionError(f"prediction {predicted.shape} and truth {actual.shape} differ")
    return np.linalg.norm(predicted - actual, axis=0)


def prediction_error(model: KoopmanModel, truth: Trajectory, mode: str = "one-step", *,
                     use_input: bool = True, channels: str = "output",
                     horizon: int | None = None) -> PredictionReport:
    """Per-channel 2-norm errors against ``truth`` and their sum.

    ``channels="output"`` compares ``W_h psi`` with the recorded outputs,
    ``channels="state"`` compares ``P_x psi`` with the recorded states.
    """
    T = truth.horizon if horizon is None else horizon
    if T > truth.horizon:
        raise DimensionError(f"truth covers {truth.horizon} steps, requested {T}")
    pred = predict(model, truth.states[0], T, truth.inputs[:T], mode=mode, truth=truth,
                   use_input=use_input)
    if channels == "output":
        errs = channel_errors(pred.outputs, truth.outputs[: T + 1])
    elif channels == "state":
        errs = channel_errors(pred.states, truth.states[: T + 1])
    else:
        raise ValueError(f"unknown channels {channels!r}")
    return PredictionReport(errs, float(errs.sum()), T, report_mode(model, mode, use_input),
                            channels)


# ---------------------------------------------------------------------------
# serialization


def _mat(M):
    return None if M is None else [[float(v) for v in row] for row in np.atleast_2d(M)]


def model_to_dict(model: KoopmanModel) -> dict:
    return {
        "type": "koopman-model",
        "lifted_dim": model.lifted_dim,
        "input_lifted_dim": 0 if model.K_u is None else int(model.K_u.shape[1]),
        "dictionary": None if model.dictionary is None else model.dictionary.spec,
        "input_dictionary": None if model.input_dictionary is None else model.input_dictionary.spec,
        "K_x": _mat(model.K_x),
        "K_u": _mat(model.K_u),
        "W_h": _mat(model.W_h),
        "P_x": _mat(model.P_x),
        "zeta": float(model.regularization),
        "fit_residual": float(model.fit_residual),
        **({"meta": model.meta} if model.meta else {}),
    }


def model_from_dict(data: dict) -> KoopmanModel:
    if data.get("type") != "koopman-model":
        raise KoopgramError("not a koopman-model document")

    def arr(key):
        v = data.get(key)
        return None if v is None else np.array(v, dtype=float)

    d = dictionary_from_spec(data["dictionary"]) if data.get("dictionary") else None
    idict = input_dictionary_from_spec(data["input_dictionary"]) if data.get("input_dictionary") else None
    return KoopmanModel(arr("K_x"), arr("K_u"), arr("W_h"), arr("P_x"), d, idict,
                        float(data.get("zeta", 0.0)), float(data.get("fit_residual", 0.0)),
                        dict(data.get("meta") or {}))
