# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from typing import Dict, Sequence, Tuple, Union

import numpy as np
import sympy

from ..classes.polynomial import Polynomial
from ..exceptions import DegreeError

DEFAULT_DEGREE_CAP = 12


def poly_eval(p: Polynomial, x: np.ndarray) -> Union[float, np.ndarray]:
    return p.evaluate(x)


def poly_compose(p: Polynomial, maps: Sequence[Polynomial], degree_cap: int = DEFAULT_DEGREE_CAP) -> Polynomial:
    """
    Substitutes maps[i] for the i-th variable of p, exactly.
    Args:
        p: outer polynomial
        maps: one polynomial per variable of p, all over the same variables
        degree_cap: largest admissible degree of the result

    Returns:
        Polynomial: p(maps[0], ..., maps[k-1]) over the variables of the maps
    """
    if len(maps) != p.n_vars:
        raise ValueError(f"expected {p.n_vars} maps, got {len(maps)}")
    variables = maps[0].variables
    if any(m.variables != variables for m in maps):
        raise ValueError("all maps must share their variables")

    bound = p.degree * max((m.degree for m in maps), default=0)
    if bound > degree_cap:
        raise DegreeError(f"composition reaches degree {bound}, above the cap {degree_cap}")

    gens = maps[0].poly.gens
    result = sympy.Poly(0, *gens, domain=sympy.QQ)
    powers: Dict[Tuple[int, int], sympy.Poly] = {}
    one = sympy.Poly(1, *gens, domain=sympy.QQ)

    def _power(i: int, e: int) -> sympy.Poly:
        if e == 0:
            return one
        if (i, e) not in powers:
            powers[(i, e)] = _power(i, e - 1) * maps[i].poly
        return powers[(i, e)]

    for mono, coeff in p.exact_terms().items():
        term = one * coeff
        for i, e in enumerate(mono):
            if e:
                term = term * _power(i, e)
        result = result + term
    return Polynomial(result)
