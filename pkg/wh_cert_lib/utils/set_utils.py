# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Set builders, membership and deterministic sampling."""

import logging
import warnings
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from ..classes.polynomial import Polynomial
from ..classes.sets import SET_TOL, Bounds, QuadraticForm, SemiAlgebraicSet
from ..classes.system import state_variables

logger = logging.getLogger(__name__)

SAMPLE_CHUNK = 4096
MAX_SAMPLE_CHUNKS = 4096

AnySet = Union[QuadraticForm, SemiAlgebraicSet]


def ellipsoid(center: Sequence[float], semi_axes: Sequence[float]) -> QuadraticForm:
    """
    Axis-aligned ellipsoid sum_i ((x_i - c_i) / a_i)^2 <= 1.
    Args:
        center: center c
        semi_axes: semi-axis lengths a_i > 0

    Returns:
        QuadraticForm: ellipsoid with its bounding box attached
    """
    c = np.asarray(center, dtype=float)
    a = np.asarray(semi_axes, dtype=float)
    if c.shape != a.shape or c.ndim != 1:
        raise ValueError(f"center and semi_axes must be vectors of equal length, got {c.shape} and {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError(f"degenerate semi-axes {a.tolist()}")
    D = np.diag(1.0 / a**2)
    n = c.size
    S = np.zeros((n + 1, n + 1))
    S[:n, :n] = -D
    S[:n, n] = D @ c
    S[n, :n] = D @ c
    S[n, n] = 1.0 - c @ D @ c
    return QuadraticForm(S, (c - a, c + a))


def box(lo: Sequence[float], hi: Sequence[float]) -> SemiAlgebraicSet:
    """Hyperrectangle as one quadratic inequality (x_i - lo_i)(hi_i - x_i) >= 0 per axis."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError(f"lo and hi must be vectors of equal length, got {lo.shape} and {hi.shape}")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi <= lo):
        raise ValueError(f"degenerate box [{lo.tolist()}, {hi.tolist()}]")
    variables = state_variables(lo.size)
    polys = []
    for i, v in enumerate(variables):
        x = Polynomial.variable(v, variables)
        polys.append((x - float(lo[i])) * (float(hi[i]) - x))
    return SemiAlgebraicSet(polys, (lo, hi))


def membership(s: AnySet, x: np.ndarray, tol: float = SET_TOL):
    return s.contains(x, tol)


def as_semialgebraic(s: AnySet) -> SemiAlgebraicSet:
    return s.as_set() if isinstance(s, QuadraticForm) else s


def _candidate_stream(lo: np.ndarray, hi: np.ndarray, seed: int) -> Iterator[np.ndarray]:
    """Fixed-size chunks, half scrambled Sobol points and half uniform points, scaled to the box."""
    d = lo.size
    sobol = qmc.Sobol(d, scramble=True, seed=seed)
    rng = np.random.default_rng(seed)
    half = SAMPLE_CHUNK // 2
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            low_discrepancy = sobol.random(half)
        uniform = rng.uniform(size=(half, d))
        yield lo + (hi - lo) * np.concatenate([low_discrepancy, uniform])


def sample_box(lo: Sequence[float], hi: Sequence[float], n: int, seed: int = 0) -> np.ndarray:
    """
    Deterministic points in a box. The points for n are a prefix of the points for any larger n.
    Args:
        lo: lower corner
        hi: upper corner
        n: number of points
        seed: seed of the Sobol scrambling and the uniform generator

    Returns:
        np.ndarray: array of shape (n, d)
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    chunks = []
    stream = _candidate_stream(lo, hi, seed)
    while sum(len(c) for c in chunks) < n:
        chunks.append(next(stream))
    if not chunks:
        return np.zeros((0, lo.size))
    return np.concatenate(chunks)[:n]


def sample_set(s: AnySet, n: int, seed: int = 0, bounds: Optional[Bounds] = None) -> np.ndarray:
    """
    Rejection sampling inside the bounding box of a set. Prefix-stable in n like sample_box.
    Args:
        s: set to sample
        n: number of points
        seed: sampling seed
        bounds: box to sample from, defaults to the set's own bounds

    Returns:
        np.ndarray: array of shape (n, d); empty for the empty set
    """
    n_dim = s.n
    if isinstance(s, SemiAlgebraicSet) and s.empty:
        return np.zeros((0, n_dim))
    bounds = bounds if bounds is not None else s.bounds
    if bounds is None:
        raise ValueError(f"{s!r} has no bounding box to sample from")
    lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)

    accepted = []
    count = 0
    stream = _candidate_stream(lo, hi, seed)
    for _ in range(MAX_SAMPLE_CHUNKS):
        candidates = next(stream)
        inside = candidates[np.atleast_1d(s.contains(candidates))]
        accepted.append(inside)
        count += len(inside)
        if count >= n:
            break
    points = np.concatenate(accepted) if accepted else np.zeros((0, n_dim))
    if len(points) < n:
        logger.warning("only %d of %d samples fall into %r", len(points), n, s)
    return points[:n]


def boundary_points(s: AnySet, bounds: Optional[Bounds] = None, seed: int = 0, iterations: int = 60) -> np.ndarray:
    """
    Axis extremes of a set: from an interior point, the farthest point of the set along each axis direction,
    located by bisection.
    Returns:
        np.ndarray: array of shape (2n, n)
    """
    bounds = bounds if bounds is not None else s.bounds
    if bounds is None:
        raise ValueError(f"{s!r} has no bounding box")
    lo, hi = np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float)
    center = (lo + hi) / 2
    if not s.contains(center):
        inner = sample_set(s, 1, seed, bounds)
        if len(inner) == 0:
            return np.zeros((0, s.n))
        center = inner[0]

    points = []
    for i in range(s.n):
        for end in (lo[i], hi[i]):
            target = center.copy()
            target[i] = end
            if s.contains(target):
                points.append(target)
                continue
            inside, outside = 0.0, 1.0
            for _ in range(iterations):
                mid = (inside + outside) / 2
                if s.contains(center + mid * (target - center)):
                    inside = mid
                else:
                    outside = mid
            points.append(center + inside * (target - center))
    return np.array(points)


def find_overlap(a: AnySet, b: AnySet, n: int = 20000, seed: int = 0, bounds: Optional[Bounds] = None):
    """
    Looks for a point of `a` that also lies in `b`, among boundary points and samples of `a`.
    Returns:
        Optional[np.ndarray]: a common point, None if none was found
    """
    if isinstance(a, SemiAlgebraicSet) and a.empty or isinstance(b, SemiAlgebraicSet) and b.empty:
        return None
    candidates = np.concatenate([boundary_points(a, bounds, seed), sample_set(a, n, seed, bounds)])
    hits = np.atleast_1d(b.contains(candidates, tol=0.0))
    if np.any(hits):
        return candidates[np.argmax(hits)]
    return None
