"""Observable dictionaries for lifting states and inputs.

A dictionary is an ordered list of scalar functions of the state.  Every
state dictionary starts with the coordinate functions ``x_1..x_n`` so the
state can be read back with a row selector.  Entries carry a symbolic
descriptor, which lets the output selector ``W_h`` and state projector
``P_x`` be built by lookup:

* ``("mono", exps)``: the monomial ``prod x_i**exps[i]``
* ``("comp", k, j)``: output component ``j`` of ``h(f^k(x))``
* ``("const",)``: the constant 1
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dynsys import DiscreteSystem, example1_system
from .errors import DimensionError, KoopgramError, NonFiniteError

DEFAULT_SIZE_LIMIT = 2000


def _mono_label(exps):
    parts = []
    for i, e in enumerate(exps):
        if e == 1:
            parts.append(f"x{i + 1}")
        elif e > 1:
            parts.append(f"x{i + 1}^{e}")
    return "*".join(parts) or "1"


def describe(desc) -> str:
    if desc[0] == "mono":
        return _mono_label(desc[1])
    if desc[0] == "comp":
        return f"h{desc[2] + 1}(f^{desc[1]}(x))"
    return "1"


@dataclass(frozen=True, eq=False)
class Dictionary:
    """State dictionary ``psi``; lifts column-stacked states ``(n, N) -> (n_L, N)``."""

    state_dim: int
    descriptors: tuple
    functions: tuple
    spec: dict

    def __post_init__(self):
        n = self.state_dim
        if len(self.descriptors) != len(self.functions):
            raise ValueError("descriptors and functions differ in length")
        if len(set(self.descriptors)) != len(self.descriptors):
            raise ValueError("duplicate dictionary descriptors")
        coords = tuple(("mono", tuple(int(i == j) for i in range(n))) for j in range(n))
        if self.descriptors[:n] != coords:
            raise ValueError("dictionary must start with the coordinate functions x_1..x_n")

    @property
    def lifted_dim(self) -> int:
        return len(self.descriptors)

    @property
    def labels(self) -> list:
        return [describe(d) for d in self.descriptors]

    def index(self, desc) -> int:
        return self.descriptors.index(desc)

    def lift(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = X.reshape(-1, 1) if single else X
        if X2.shape[0] != self.state_dim:
            raise DimensionError(f"dictionary expects {self.state_dim} states, got {X2.shape[0]}")
        with np.errstate(over="ignore", invalid="ignore"):
            rows = [np.broadcast_to(fn(X2), X2.shape[1:]) for fn in self.functions]
        out = np.array(rows, dtype=float)
        # the coordinate prefix is copied, not recomputed
        out[: self.state_dim] = X2
        if not np.all(np.isfinite(out)):
            bad = int(np.argwhere(~np.isfinite(out))[0][0])
            raise NonFiniteError(f"dictionary entry {self.labels[bad]} is not finite")
        return out[:, 0] if single else out


@dataclass(frozen=True, eq=False)
class InputDictionary:
    """Input dictionary ``psi_u``; lifts ``(m, N) -> (m_L, N)``."""

    input_dim: int
    labels: tuple
    functions: tuple
    spec: dict

    @property
    def lifted_dim(self) -> int:
        return len(self.functions)

    def lift(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        single = U.ndim == 1
        U2 = U.reshape(-1, 1) if single else U
        if U2.shape[0] != self.input_dim:
            raise DimensionError(f"input dictionary expects {self.input_dim} inputs, got {U2.shape[0]}")
        if not np.all(np.isfinite(U2)):
            raise NonFiniteError("non-finite input")
        out = np.array([fn(U2) for fn in self.functions], dtype=float).reshape(-1, U2.shape[1])
        return out[:, 0] if single else out


@dataclass(frozen=True, eq=False)
class Selector:
    """Projection matrix ``P`` (v x n_L); ``kind`` is output-selector, state-projector or general."""

    matrix: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        M = np.atleast_2d(np.array(self.matrix, dtype=float))
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        if self.kind not in ("output-selector", "state-projector", "general"):
            raise ValueError(f"unknown selector kind {self.kind!r}")
        if self.kind != "general" and not _is_row_selection(M):
            raise ValueError(f"{self.kind} rows must be canonical basis vectors")

    def __matmul__(self, other):
        return self.matrix @ other


def _is_row_selection(M):
    return bool(np.all((M == 0) | (M == 1)) and np.all(M.sum(axis=1) == 1))


# ---------------------------------------------------------------------------
# constructors


def _monomial_fn(exps):
    def fn(X):
        out = np.ones(X.shape[1:])
        for xi, e in zip(X, exps):
            if e:
                out = out * xi**e
        return out
    return fn


def _const_fn(X):
    return np.ones(X.shape[1:])


def _composed_fn(sys, k, j):
    def fn(X):
        Z = X
        for _ in range(k):
            Z = sys.step_map(Z)
        return sys.output_map(Z)[j]
    return fn


def monomial_exponents(n: int, max_degree: int):
    """Exponent vectors of total degree 1..d in graded-lexicographic order."""
    for deg in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            exps = [0] * n
            for i in combo:
                exps[i] += 1
            yield tuple(exps)


def monomial_dictionary(n: int, max_degree: int, include_constant: bool = False,
                        size_limit: int = DEFAULT_SIZE_LIMIT) -> Dictionary:
    """All monomials of degree 1..``max_degree``; the constant goes last when requested."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    size = math.comb(n + max_degree, max_degree) - 1 + int(include_constant)
    if size > size_limit:
        raise KoopgramError(f"monomial dictionary would have {size} entries (limit {size_limit})")
    descs = [("mono", e) for e in monomial_exponents(n, max_degree)]
    fns = [_monomial_fn(d[1]) for d in descs]
    if include_constant:
        descs.append(("const",))
        fns.append(_const_fn)
    spec = {"kind": "monomial", "n": n, "max_degree": max_degree,
            "include_constant": bool(include_constant)}
    return Dictionary(n, tuple(descs), tuple(fns), spec)


def identity_dictionary(n: int) -> Dictionary:
    return monomial_dictionary(n, 1, include_constant=False)


def example1_dictionary(system: DiscreteSystem | None = None):
    """The 12-entry dictionary for the two-state example, with ``W_h`` and ``P_x``.

    Entries: x1, x2, x1^2, x2^2, x1 x2^2, x1^2 x2, x1^2 x2^2, h(f(x)),
    h(f(f(x))), 1.  ``f`` is the unforced map of ``system`` (example1 with
    default coefficients when omitted).
    """
    sys = example1_system() if system is None else system
    if sys.state_dim != 2 or sys.output_dim != 2:
        raise DimensionError("example1 dictionary needs a two-state, two-output system")
    f = sys.autonomous_part()
    monos = [(1, 0), (0, 1), (2, 0), (0, 2), (1, 2), (2, 1), (2, 2)]
    descs = [("mono", e) for e in monos]
    fns = [_monomial_fn(e) for e in monos]
    for k in (1, 2):
        for j in range(2):
            descs.append(("comp", k, j))
            fns.append(_composed_fn(f, k, j))
    descs.append(("const",))
    fns.append(_const_fn)
    params = {k: v for k, v in sys.params.items() if k != "mu"}
    d = Dictionary(2, tuple(descs), tuple(fns), {"kind": "example1", "n": 2, "params": params})
    return d, output_selector(d, sys), state_projector(d)


def dictionary_from_spec(spec: Mapping) -> Dictionary:
    kind = spec.get("kind")
    if kind == "example1":
        sys = example1_system(**dict(spec.get("params") or {}))
        return example1_dictionary(sys)[0]
    if kind == "monomial":
        return monomial_dictionary(int(spec["n"]), int(spec.get("max_degree", 1)),
                                   bool(spec.get("include_constant", False)))
    if kind == "identity":
        return identity_dictionary(int(spec["n"]))
    raise KeyError(f"unknown dictionary kind {kind!r}")


def input_dictionary(kind: str = "identity", input_dim: int = 1) -> InputDictionary:
    """``identity``: psi_u(u) = u.  ``sin_augmented``: psi_u(u) = (u, sin u)."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    labels = [f"u{i + 1}" for i in range(input_dim)]
    fns = [(lambda U, i=i: U[i]) for i in range(input_dim)]
    if kind == "sin_augmented":
        labels += [f"sin(u{i + 1})" for i in range(input_dim)]
        fns += [(lambda U, i=i: np.sin(U[i])) for i in range(input_dim)]
    elif kind != "identity":
        raise KeyError(f"unknown input dictionary kind {kind!r}")
    return InputDictionary(input_dim, tuple(labels), tuple(fns),
                           {"kind": kind, "input_dim": input_dim})


def input_dictionary_from_spec(spec: Mapping, input_dim: int | None = None) -> InputDictionary:
    m = int(spec.get("input_dim", input_dim or 1))
    return input_dictionary(spec.get("kind", "identity"), m)


def evaluate(d: Dictionary, x) -> np.ndarray:
    """``psi(x)`` for a single state vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("state must be finite")
    return d.lift(x)


def evaluate_input(idict: InputDictionary, u) -> np.ndarray:
    return idict.lift(np.asarray(u, dtype=float).reshape(-1))


# ---------------------------------------------------------------------------
# selectors


def state_projector(d: Dictionary) -> Selector:
    """``P_x`` with ``P_x psi(x) = x``."""
    n = d.state_dim
    P = np.zeros((n, d.lifted_dim))
    P[np.arange(n), np.arange(n)] = 1.0
    return Selector(P, "state-projector")


def output_selector(d: Dictionary, sys: DiscreteSystem) -> Selector:
    """``W_h`` with ``W_h psi(x) = h(x)``, found by matching output terms to entries.

    Each output of ``sys`` must be a polynomial whose monomials are all
    dictionary entries (or a composed-output entry of degree zero).
    """
    if sys.state_dim != d.state_dim:
        raise DimensionError("system and dictionary state dimensions differ")
    W = np.zeros((sys.output_dim, d.lifted_dim))
    for i, poly in enumerate(sys.output_polys):
        for exps, coeff in poly.terms.items():
            desc = ("const",) if not any(exps) else ("mono", exps)
            try:
                W[i, d.index(desc)] += coeff
            except ValueError:
                raise KoopgramError(
                    f"output {i + 1} term {_mono_label(exps)} is not in the dictionary"
                ) from None
    kind = "output-selector" if _is_row_selection(W) else "general"
    return Selector(W, kind)
