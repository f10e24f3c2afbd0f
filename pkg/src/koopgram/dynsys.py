"""Discrete-time polynomial systems: definition, simulation and linearization.

All built-in systems are polynomial maps ``x_{t+1} = F(x_t, u_t)`` with a
polynomial output ``y_t = h(x_t)``.  Polynomials are stored term by term so
that Jacobians can be taken exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, DivergenceError, NonFiniteError

DEFAULT_DIVERGENCE_CAP = 1e12

EXAMPLE1_PARAMS = {"delta1": 0.75, "delta2": 0.9, "alpha": 0.02, "beta": 0.12, "gamma": 0.1}
EXAMPLE3_PARAMS = {**EXAMPLE1_PARAMS, "mu": 0.01}


class Poly:
    """Multivariate polynomial ``sum_k c_k prod_i z_i**e_ki`` in ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, float]):
        self.nvars = nvars
        clean = {}
        for exps, coeff in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps} for {nvars} variables")
            if coeff != 0.0:
                clean[exps] = clean.get(exps, 0.0) + float(coeff)
        self.terms = dict(sorted(clean.items()))

    @classmethod
    def linear(cls, coeffs: Sequence[float]) -> "Poly":
        n = len(coeffs)
        return cls(n, {tuple(int(i == j) for i in range(n)): c for j, c in enumerate(coeffs)})

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[1:]) if z.ndim > 1 else 0.0
        for exps, coeff in self.terms.items():
            term = coeff
            for zi, e in zip(z, exps):
                if e:
                    term = term * zi**e
            out = out + term
        return out

    def deriv(self, var: int) -> "Poly":
        terms = {}
        for exps, coeff in self.terms.items():
            e = exps[var]
            if e:
                lowered = exps[:var] + (e - 1,) + exps[var + 1:]
                terms[lowered] = terms.get(lowered, 0.0) + coeff * e
        return Poly(self.nvars, terms)

    def restrict(self, nvars: int) -> "Poly":
        """Drop trailing variables, keeping only terms that do not involve them."""
        return Poly(nvars, {e[:nvars]: c for e, c in self.terms.items() if not any(e[nvars:])})

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        return f"Poly({self.nvars}, {self.terms!r})"


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """A polynomial discrete-time system.

    ``step_polys`` act on the stacked vector ``(x_1..x_n, u_1..u_m)`` and
    ``output_polys`` act on ``x`` alone.
    """

    name: str
    state_dim: int
    input_dim: int
    output_dim: int
    step_polys: tuple
    output_polys: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.state_dim < 1 or self.output_dim < 1 or self.input_dim < 0:
            raise DimensionError("state_dim and output_dim must be positive, input_dim >= 0")
        if len(self.step_polys) != self.state_dim:
            raise DimensionError("need one step polynomial per state")
        if len(self.output_polys) != self.output_dim:
            raise DimensionError("need one output polynomial per output")
        nz = self.state_dim + self.input_dim
        if any(p.nvars != nz for p in self.step_polys):
            raise DimensionError("step polynomials must take (x, u)")
        if any(p.nvars != self.state_dim for p in self.output_polys):
            raise DimensionError("output polynomials must take x")

    def step_map(self, x, u=None):
        """Evaluate F column-wise; ``x`` may be (n,) or (n, N)."""
        x = np.asarray(x, dtype=float)
        if self.input_dim:
            u = np.zeros((self.input_dim,) + x.shape[1:]) if u is None else np.asarray(u, float)
            z = np.concatenate([x, u], axis=0)
        else:
            z = x
        return np.array([p(z) for p in self.step_polys])

    def output_map(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([p(x) for p in self.output_polys])

    def autonomous_part(self) -> "DiscreteSystem":
        """The unforced map ``f(x) = F(x, 0)``."""
        if not self.input_dim:
            return self
        n = self.state_dim
        return DiscreteSystem(
            self.name + "-unforced", n, 0, self.output_dim,
            tuple(p.restrict(n) for p in self.step_polys), self.output_polys, dict(self.params),
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray   # (T+1, n)
    inputs: np.ndarray   # (T, m)
    outputs: np.ndarray  # (T+1, p)

    def __post_init__(self):
        for name in ("states", "inputs", "outputs"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise DimensionError(f"{name} must be 2-D")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        T1 = self.states.shape[0]
        if T1 < 1 or self.outputs.shape[0] != T1 or self.inputs.shape[0] != T1 - 1:
            raise DimensionError(
                f"inconsistent lengths: states {self.states.shape}, inputs {self.inputs.shape}, "
                f"outputs {self.outputs.shape}"
            )

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dt_index(self) -> np.ndarray:
        return np.arange(self.states.shape[0])


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    A: np.ndarray
    C: np.ndarray
    x0: np.ndarray
    B: np.ndarray | None = None


# ---------------------------------------------------------------------------
# built-in systems


def _mono(nvars, **powers):
    exps = [0] * nvars
    for key, e in powers.items():
        exps[int(key[1:])] = e
    return tuple(exps)


def _two_state(params, with_input):
    p = {**EXAMPLE1_PARAMS, **params}
    nz = 3 if with_input else 2
    f1 = {_mono(nz, v0=1): p["delta1"], _mono(nz, v0=2): p["alpha"], _mono(nz, v1=2): -1.0}
    if with_input:
        f1[_mono(nz, v2=1)] = 1.0
    f2 = {_mono(nz, v1=1): p["delta2"], _mono(nz, v0=1): p["beta"], _mono(nz, v1=2): p["gamma"]}
    h = (Poly(2, {(2, 0): 1.0}), Poly(2, {(0, 2): 1.0}))
    return (Poly(nz, f1), Poly(nz, f2)), h, p


def example1_system(**params) -> DiscreteSystem:
    """Unforced two-state system with squared outputs.

    x1' = d1 x1 + a x1^2 - x2^2,  x2' = d2 x2 + b x1 + g x2^2,  y = (x1^2, x2^2).
    """
    unknown = set(params) - set(EXAMPLE1_PARAMS)
    if unknown:
        raise KeyError(f"unknown example1 parameters: {sorted(unknown)}")
    step, h, p = _two_state(params, with_input=False)
    return DiscreteSystem("example1", 2, 0, 2, step, h, p)


def example3_system(**params) -> DiscreteSystem:
    """The two-state system with an additive input on the first channel.

    ``mu`` is kept with the system as the slope of its default sin-ramp input.
    """
    unknown = set(params) - set(EXAMPLE3_PARAMS)
    if unknown:
        raise KeyError(f"unknown example3 parameters: {sorted(unknown)}")
    step, h, p = _two_state({k: v for k, v in params.items() if k != "mu"}, with_input=True)
    p["mu"] = float(params.get("mu", EXAMPLE3_PARAMS["mu"]))
    return DiscreteSystem("example3", 2, 1, 2, step, h, p)


def linear_system(A, B=None, C=None) -> DiscreteSystem:
    """``x' = A x + B u``, ``y = C x`` (C defaults to the identity)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"A must be square, got {A.shape}")
    B = np.zeros((n, 0)) if B is None else np.asarray(B, dtype=float).reshape(n, -1)
    C = np.eye(n) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[1] != n:
        raise DimensionError(f"C must have {n} columns, got {C.shape}")
    m = B.shape[1]
    step = tuple(Poly.linear(np.concatenate([A[i], B[i]])) for i in range(n))
    out = tuple(Poly.linear(C[i]) for i in range(C.shape[0]))
    params = {"A": A.tolist(), "B": B.tolist(), "C": C.tolist()}
    return DiscreteSystem("linear", n, m, C.shape[0], step, out, params)


def system_from_config(cfg: Mapping) -> DiscreteSystem:
    """Build a system from ``{"system": ..., "params": {...}}``."""
    kind = cfg.get("system")
    params = dict(cfg.get("params") or {})
    if kind == "example1":
        return example1_system(**params)
    if kind == "example3":
        return example3_system(**params)
    if kind == "linear":
        if "A" not in params:
            raise KeyError("linear system needs params.A")
        return linear_system(params["A"], params.get("B"), params.get("C"))
    raise KeyError(f"unknown system {kind!r}; expected example1, example3 or linear")


def system_config(sys: DiscreteSystem) -> dict:
    if sys.name not in ("example1", "example3", "linear"):
        raise KeyError(f"system {sys.name!r} has no configuration form")
    return {"system": sys.name, "params": dict(sys.params)}


# ---------------------------------------------------------------------------
# input signals


def sin_ramp(mu: float = 0.01, channels: int = 1) -> Callable[[int], np.ndarray]:
    """``u_1[t] = sin(t) + mu t``; any further channels are zero."""
    def signal(t):
        u = np.zeros(channels)
        u[0] = math.sin(t) + mu * t
        return u
    return signal


def zero_input(channels: int) -> Callable[[int], np.ndarray]:
    return lambda t: np.zeros(channels)


def input_from_config(cfg: Mapping | None, input_dim: int):
    """Resolve ``{"kind": "zero"|"sin_ramp"|"samples", ...}`` to a signal or sample array."""
    if cfg is None:
        return zero_input(input_dim)
    kind = cfg.get("kind", "zero")
    if kind == "zero":
        return zero_input(input_dim)
    if kind == "sin_ramp":
        return sin_ramp(float(cfg.get("mu", 0.01)), input_dim)
    if kind == "samples":
        values = np.asarray(cfg["values"], dtype=float)
        return values.reshape(len(values), -1) if values.size else values.reshape(0, input_dim)
    raise KeyError(f"unknown input kind {kind!r}")


def input_samples(signal, horizon: int, input_dim: int) -> np.ndarray:
    """Materialize an input signal as a ``(horizon, input_dim)`` array."""
    if signal is None:
        return np.zeros((horizon, input_dim))
    if callable(signal):
        rows = [np.asarray(signal(t), dtype=float).reshape(-1) for t in range(horizon)]
        U = np.array(rows).reshape(horizon, -1) if rows else np.zeros((0, input_dim))
    else:
        U = np.asarray(signal, dtype=float)
        if U.ndim == 1:
            U = U.reshape(-1, input_dim) if input_dim else U.reshape(len(U), 0)
        if U.shape[0] < horizon:
            raise DimensionError(f"input has {U.shape[0]} samples, need {horizon}")
        U = U[:horizon]
    if U.shape != (horizon, input_dim):
        raise DimensionError(f"input samples have shape {U.shape}, expected {(horizon, input_dim)}")
    return U


# ---------------------------------------------------------------------------
# operations


def _check_vec(v, dim, what):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (dim,):
        raise DimensionError(f"{what} must have dimension {dim}, got {v.shape[0]}")
    return v


def step(sys: DiscreteSystem, x, u=None) -> np.ndarray:
    """Apply one step of the system map."""
    x = _check_vec(x, sys.state_dim, "state")
    if sys.input_dim == 0:
        if u is not None and np.size(u) != 0:
            raise DimensionError("system has no input but a non-empty input was given")
        u = None
    else:
        if u is None:
            raise DimensionError(f"system needs an input of dimension {sys.input_dim}")
        u = _check_vec(u, sys.input_dim, "input")
    if not np.all(np.isfinite(x)) or (u is not None and not np.all(np.isfinite(u))):
        raise NonFiniteError("non-finite state or input")
    with np.errstate(over="ignore", invalid="ignore"):
        nxt = sys.step_map(x, u)
    if not np.all(np.isfinite(nxt)):
        raise NonFiniteError(f"step produced a non-finite state from x={x.tolist()}")
    return nxt


def simulate(sys: DiscreteSystem, x0, input_signal=None, horizon: int = 1,
             cap: float = DEFAULT_DIVERGENCE_CAP) -> Trajectory:
    """Simulate ``horizon`` steps from ``x0``.

    ``input_signal`` is a callable ``t -> u_t``, a ``(horizon, m)`` array, or
    None for zero input.  Raises :class:`DivergenceError` with the offending
    step index as soon as ``max|x_t|`` exceeds ``cap``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x = _check_vec(x0, sys.state_dim, "x0")
    U = input_samples(input_signal, horizon, sys.input_dim)
    states = np.empty((horizon + 1, sys.state_dim))
    states[0] = x
    for t in range(horizon):
        try:
            x = step(sys, x, U[t] if sys.input_dim else None)
        except NonFiniteError:
            raise DivergenceError(t + 1, math.inf, cap) from None
        mag = float(np.max(np.abs(x)))
        if mag > cap:
            raise DivergenceError(t + 1, mag, cap)
        states[t + 1] = x
    outputs = sys.output_map(states.T).T.reshape(horizon + 1, sys.output_dim)
    return Trajectory(states, U, outputs)


def _jacobian_fd(fun, z, rel_step=1e-6):
    z = np.asarray(z, dtype=float)
    cols = []
    for i in range(z.size):
        h = rel_step * max(1.0, abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        cols.append((np.asarray(fun(zp)) - np.asarray(fun(zm))) / (2 * h))
    return np.column_stack(cols)


def linearize(sys: DiscreteSystem, x0, method: str = "analytic") -> LinearizedSystem:
    """Jacobians of F (w.r.t. x and u, at u = 0) and of h at ``x0``.

    ``method="analytic"`` differentiates the polynomial terms exactly;
    ``method="fd"`` uses central differences with a 1e-6 relative step.
    """
    x0 = _check_vec(x0, sys.state_dim, "x0")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteError("x0 must be finite")
    n, m = sys.state_dim, sys.input_dim
    z0 = np.concatenate([x0, np.zeros(m)])
    if method == "analytic":
        J = np.array([[p.deriv(j)(z0) for j in range(n + m)] for p in sys.step_polys])
        C = np.array([[p.deriv(j)(x0) for j in range(n)] for p in sys.output_polys])
    elif method == "fd":
        J = _jacobian_fd(lambda z: sys.step_map(z[:n], z[n:] if m else None), z0)
        C = _jacobian_fd(sys.output_map, x0)
    else:
        raise ValueError(f"unknown method {method!r}")
    J = J.reshape(n, n + m)
    return LinearizedSystem(J[:, :n], C.reshape(sys.output_dim, n), x0, J[:, n:] if m else None)


def linear_observability_gramian(lin: LinearizedSystem, horizon=math.inf) -> np.ndarray:
    """Classical observability gramian ``sum_{t=0}^{T} (A^t)' C' C A^t``.

    Finite horizons use explicit matrix powers; the infinite horizon solves
    the Stein equation and requires a strictly stable ``A``.
    """
    from .gramians import parse_horizon, spectral_radius, stein_solve
    from .errors import UnstableOperatorError

    A, C = np.asarray(lin.A, float), np.asarray(lin.C, float)
    Q = C.T @ C
    horizon = parse_horizon(horizon)
    if horizon == math.inf:
        rho = spectral_radius(A)
        if rho >= 1 - 1e-9:
            raise UnstableOperatorError(rho, "linearized A")
        X = stein_solve(A, Q, side="left")
    else:
        X = np.zeros_like(Q)
        for t in range(horizon + 1):
            At = np.linalg.matrix_power(A, t)
            X += At.T @ Q @ At
    return (X + X.T) / 2


# ---------------------------------------------------------------------------
# CSV round trip


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trajectory_to_csv(traj: Trajectory) -> str:
    n, m, p = traj.states.shape[1], traj.inputs.shape[1], traj.outputs.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
               + [f"y{i + 1}" for i in range(p)])
    for t in range(traj.horizon + 1):
        u = [_fmt(v) for v in traj.inputs[t]] if t < traj.horizon else [""] * m
        w.writerow([str(t)] + [_fmt(v) for v in traj.states[t]] + u
                   + [_fmt(v) for v in traj.outputs[t]])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trajectory_to_csv(traj))


def trajectory_from_csv(text: str, source: str = "<csv>") -> Trajectory:
    """Parse the ``t,x1..xn,u1..um,y1..yp`` format written by :func:`trajectory_to_csv`."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError(f"{source}: empty file")
    header = rows[0]
    if not header or header[0] != "t":
        raise ValueError(f"{source}, line 1: header must start with 't'")
    cols = {"x": [], "u": [], "y": []}
    for j, name in enumerate(header[1:], start=1):
        if not name or name[0] not in cols or not name[1:].isdigit():
            raise ValueError(f"{source}, line 1, column {j + 1}: unexpected column {name!r}")
        cols[name[0]].append(j)
    states, inputs, outputs = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{source}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            if int(row[0]) != lineno - 2:
                raise ValueError(f"{source}, line {lineno}: time index {row[0]} out of sequence")
            states.append([float(row[j]) for j in cols["x"]])
            outputs.append([float(row[j]) for j in cols["y"]])
            u = [row[j] for j in cols["u"]]
            if any(u):
                inputs.append([float(v) for v in u])
        except ValueError as exc:
            if str(exc).startswith(source):
                raise
            raise ValueError(f"{source}, line {lineno}: {exc}") from None
    m = len(cols["u"])
    T = len(states) - 1
    if m and len(inputs) != T:
        raise ValueError(f"{source}: expected {T} input rows, found {len(inputs)}")
    U = np.array(inputs, dtype=float).reshape(T, m) if m else np.zeros((max(T, 0), 0))
    return Trajectory(np.array(states), U, np.array(outputs))


def read_trajectory_csv(path) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        return trajectory_from_csv(fh.read(), source=str(path))
