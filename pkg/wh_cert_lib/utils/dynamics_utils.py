# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Closed- and open-loop step maps of the zero and hold actuator strategies."""

from typing import Optional, Union

import numpy as np

from ..classes.system import AugmentedState, Controller, Strategy, System


def step_closed(system: System, controller: Controller, x: np.ndarray) -> np.ndarray:
    """f_c(x) = f(x, g(x))"""
    return system.step(x, controller(x))


def step_open_zero(system: System, x: np.ndarray) -> np.ndarray:
    """f_oz(x) = f(x, 0)"""
    x = np.asarray(x, dtype=float)
    return system.step(x, np.zeros(x.shape[:-1] + (system.n_inputs,)))


def step_open_hold(system: System, aug: AugmentedState) -> AugmentedState:
    """Applies the held input; the held input itself is unchanged."""
    return AugmentedState(system.step(aug.x, aug.u_held), aug.u_held.copy())


def step_open(system: System, strategy: Strategy, x: np.ndarray, u_held: Optional[np.ndarray] = None) -> np.ndarray:
    if strategy == Strategy.ZERO:
        return step_open_zero(system, x)
    return step_open_hold(system, AugmentedState(x, u_held)).x


def iterate_open(
    system: System, controller: Controller, strategy: Union[Strategy, str], x: np.ndarray, m: int
) -> np.ndarray:
    """
    One closed-loop step followed by m open-loop steps, f_o^m(f_c(x)).
    Under the hold strategy the input g(x) computed at the success instant is held.
    Args:
        system: plant
        controller: state feedback
        strategy: actuator strategy on losses
        x: state (or batch of states) at the success instant
        m: number of consecutive losses

    Returns:
        np.ndarray: state(s) after m losses
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    strategy = Strategy(strategy)
    u = controller(x)
    state = AugmentedState(system.step(x, u), u)
    for _ in range(m):
        if strategy == Strategy.ZERO:
            state = AugmentedState(step_open_zero(system, state.x), state.u_held)
        else:
            state = step_open_hold(system, state)
    return state.x
