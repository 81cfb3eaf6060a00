# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import re
from typing import List, Tuple

import numpy as np

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_AXIS = re.compile(rf"^\s*(\w+)\s*:\s*({_NUMBER})\s*:\s*({_NUMBER})\s*:\s*(\d+)\s*$")


def parse_vector_text(text: str) -> np.ndarray:
    """
    Parses a comma- or space-separated list of numbers
    Args:
        text: e.g. "-0.5, -0.7"

    Returns:
        np.ndarray: parsed vector
    """
    parts = [p for p in re.split(r"[,\s]+", text.strip().strip("[]")) if p]
    if not parts:
        raise ValueError(f"no numbers in {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise ValueError(f"invalid number list {text!r}") from None


def parse_grid(text: str) -> Tuple[List[str], List[Tuple[float, float, int]]]:
    """
    Parses a grid description "x1:lo:hi:n,x2:lo:hi:n"
    Args:
        text: one axis per comma-separated entry

    Returns:
        Tuple[List[str], List[Tuple[float, float, int]]]: axis names and (lo, hi, points) per axis
    """
    names, axes = [], []
    for entry in text.split(","):
        match = _AXIS.match(entry)
        if match is None:
            raise ValueError(f"invalid grid axis {entry!r}, expected name:lo:hi:n")
        name, lo, hi, n = match.groups()
        if float(hi) <= float(lo) or int(n) < 2:
            raise ValueError(f"grid axis {entry!r} needs lo < hi and at least 2 points")
        names.append(name)
        axes.append((float(lo), float(hi), int(n)))
    return names, axes
