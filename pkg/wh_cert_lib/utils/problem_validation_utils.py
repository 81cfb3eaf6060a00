# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Parsing of problem files with JSON-path error reporting, plus semantic checks of parsed problems."""

import logging
from typing import Any, Mapping, Optional

import numpy as np

from ..classes.polynomial import Polynomial
from ..classes.sets import QuadraticForm, SemiAlgebraicSet
from ..classes.system import (
    Controller,
    LinearController,
    LinearSystem,
    PolynomialController,
    PolynomialSystem,
    Strategy,
    System,
    input_variables,
    state_variables,
)
from ..classes.wh_constraint import WhConstraint
from ..exceptions import ProblemConfigError
from .set_utils import AnySet, box, ellipsoid, find_overlap

logger = logging.getLogger(__name__)

SET_KINDS = ("ellipsoid", "box", "quadratic", "semialgebraic", "empty")


def require(d: Mapping, key: str, path: str) -> Any:
    if not isinstance(d, Mapping):
        raise ProblemConfigError(path, "expected an object")
    if key not in d:
        raise ProblemConfigError(f"{path}.{key}", "missing required field")
    return d[key]


def parse_vector(value: Any, path: str, size: Optional[int] = None) -> np.ndarray:
    try:
        vec = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemConfigError(path, "expected a list of numbers") from None
    if vec.ndim != 1:
        raise ProblemConfigError(path, f"expected a vector, got shape {vec.shape}")
    if size is not None and vec.size != size:
        raise ProblemConfigError(path, f"expected {size} entries, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise ProblemConfigError(path, "entries must be finite")
    return vec


def parse_matrix(value: Any, path: str, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    try:
        mat = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemConfigError(path, "expected a matrix (list of rows)") from None
    if mat.ndim == 1 and cols == 1:
        mat = mat.reshape(-1, 1)
    elif mat.ndim == 1 and rows == 1:
        mat = mat.reshape(1, -1)
    if mat.ndim != 2:
        raise ProblemConfigError(path, f"expected a matrix, got shape {mat.shape}")
    if rows is not None and mat.shape[0] != rows:
        raise ProblemConfigError(path, f"expected {rows} rows, got {mat.shape[0]}")
    if cols is not None and mat.shape[1] != cols:
        raise ProblemConfigError(path, f"expected {cols} columns, got {mat.shape[1]}")
    if not np.all(np.isfinite(mat)):
        raise ProblemConfigError(path, "entries must be finite")
    return mat


def _parse_bounds(value: Any, n: int, path: str):
    if value is None:
        return None
    pairs = parse_matrix(value, path, rows=n, cols=2)
    if np.any(pairs[:, 1] <= pairs[:, 0]):
        raise ProblemConfigError(path, "every bound needs lo < hi")
    return pairs[:, 0], pairs[:, 1]


def parse_set(spec: Any, n: int, path: str, params: Optional[Mapping] = None) -> AnySet:
    """
    Builds a set from its JSON description.
    Args:
        spec: set description with a "type" field
        n: dimension of the space the set lives in
        path: JSON path of spec, used in error messages
        params: named constants usable in polynomial expressions

    Returns:
        AnySet: QuadraticForm or SemiAlgebraicSet
    """
    kind = require(spec, "type", path)
    if kind not in SET_KINDS:
        raise ProblemConfigError(f"{path}.type", f"unknown set type {kind!r}, expected one of {SET_KINDS}")
    variables = state_variables(n)
    if kind == "empty":
        return SemiAlgebraicSet.empty_set(n)
    if kind == "ellipsoid":
        center = parse_vector(require(spec, "center", path), f"{path}.center", n)
        axes = parse_vector(require(spec, "semi_axes", path), f"{path}.semi_axes", n)
        for i, a in enumerate(axes):
            if a <= 0:
                raise ProblemConfigError(f"{path}.semi_axes[{i}]", "semi-axes must be positive")
        return ellipsoid(center, axes)
    if kind == "box":
        lo = parse_vector(require(spec, "lo", path), f"{path}.lo", n)
        hi = parse_vector(require(spec, "hi", path), f"{path}.hi", n)
        for i in range(n):
            if hi[i] <= lo[i]:
                raise ProblemConfigError(f"{path}.hi[{i}]", "upper bound must exceed lower bound")
        return box(lo, hi)
    if kind == "quadratic":
        S = parse_matrix(require(spec, "S", path), f"{path}.S", n + 1, n + 1)
        if np.abs(S - S.T).max() > 1e-12:
            raise ProblemConfigError(f"{path}.S", "matrix must be symmetric")
        return QuadraticForm(S, _parse_bounds(spec.get("bounds"), n, f"{path}.bounds"))

    polys = require(spec, "polys", path)
    if not isinstance(polys, list) or not polys:
        raise ProblemConfigError(f"{path}.polys", "expected a non-empty list of expressions")
    parsed = []
    for i, text in enumerate(polys):
        try:
            parsed.append(Polynomial.from_expression(text, variables, params))
        except (ValueError, TypeError) as err:
            raise ProblemConfigError(f"{path}.polys[{i}]", str(err)) from None
    return SemiAlgebraicSet(parsed, _parse_bounds(spec.get("bounds"), n, f"{path}.bounds"))


def parse_system(spec: Any, path: str) -> System:
    kind = require(spec, "type", path)
    if kind == "linear":
        A = parse_matrix(require(spec, "A", path), f"{path}.A")
        if A.shape[0] != A.shape[1]:
            raise ProblemConfigError(f"{path}.A", f"A must be square, got {A.shape}")
        B = parse_matrix(require(spec, "B", path), f"{path}.B", rows=A.shape[0])
        return LinearSystem(A, B)
    if kind == "polynomial":
        n = require(spec, "n", path)
        m = require(spec, "m", path)
        for key, value in (("n", n), ("m", m)):
            if not isinstance(value, int) or value < 1:
                raise ProblemConfigError(f"{path}.{key}", "expected a positive integer")
        polys = require(spec, "polys", path)
        if not isinstance(polys, list) or len(polys) != n:
            raise ProblemConfigError(f"{path}.polys", f"expected a list of {n} expressions")
        params = spec.get("params", {})
        for i, text in enumerate(polys):
            try:
                Polynomial.from_expression(text, state_variables(n) + input_variables(m), params)
            except (ValueError, TypeError) as err:
                raise ProblemConfigError(f"{path}.polys[{i}]", str(err)) from None
        return PolynomialSystem.from_expressions(polys, n, m, params)
    raise ProblemConfigError(f"{path}.type", f"unknown system type {kind!r}, expected 'linear' or 'polynomial'")


def parse_controller(spec: Any, system: System, path: str, params: Optional[Mapping] = None) -> Optional[Controller]:
    if spec is None:
        return None
    if not isinstance(spec, Mapping):
        raise ProblemConfigError(path, "expected an object or null")
    if "K" in spec:
        K = parse_matrix(spec["K"], f"{path}.K", system.n_inputs, system.n_states)
        return LinearController(K)
    if "poly" in spec:
        polys = spec["poly"]
        if not isinstance(polys, list) or len(polys) != system.n_inputs:
            raise ProblemConfigError(f"{path}.poly", f"expected a list of {system.n_inputs} expressions")
        try:
            return PolynomialController.from_expressions(polys, system.n_states, params)
        except (ValueError, TypeError) as err:
            raise ProblemConfigError(f"{path}.poly", str(err)) from None
    raise ProblemConfigError(path, "controller needs a 'K' matrix or a 'poly' list")


def parse_constraint(spec: Any, path: str) -> WhConstraint:
    r = require(spec, "r", path)
    s = require(spec, "s", path)
    for key, value in (("r", r), ("s", s)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ProblemConfigError(f"{path}.{key}", "expected an integer")
    if not 1 <= r <= s:
        raise ProblemConfigError(path, f"need 1 <= r <= s, got r={r}, s={s}")
    return WhConstraint(r, s)


def parse_strategy(value: Any, path: str) -> Strategy:
    try:
        return Strategy(value)
    except ValueError:
        raise ProblemConfigError(path, f"unknown strategy {value!r}, expected 'zero' or 'hold'") from None


def is_bounded(s: AnySet) -> bool:
    if isinstance(s, SemiAlgebraicSet) and s.empty:
        return True
    return s.bounds is not None


def check_sets(
    X: AnySet, X0: AnySet, Xu: AnySet, U: Optional[AnySet], strategy: Strategy, seed: int = 0, samples: int = 20000
) -> None:
    """
    Semantic checks of a parsed problem: bounded X, bounded U under the hold strategy, disjoint X0 and Xu.
    Raises:
        ProblemConfigError: on the first failed check
    """
    if not is_bounded(X):
        raise ProblemConfigError("$.sets.X", "the state set must be bounded (box, ellipsoid or explicit bounds)")
    if not is_bounded(X0) and not (isinstance(X0, SemiAlgebraicSet) and X0.empty):
        raise ProblemConfigError("$.sets.X0", "the initial set must be bounded")
    if strategy == Strategy.HOLD:
        if U is None:
            raise ProblemConfigError("$.sets.U", "the hold strategy needs a bounded input set")
        if not is_bounded(U):
            raise ProblemConfigError("$.sets.U", "the input set must be bounded")

    witness = find_overlap(X0, Xu, n=samples, seed=seed, bounds=X0.bounds)
    if witness is not None:
        raise ProblemConfigError(
            "$.sets.Xu", f"initial and unsafe sets intersect, e.g. at x = {np.round(witness, 6).tolist()}"
        )
    logger.debug("set checks passed")

