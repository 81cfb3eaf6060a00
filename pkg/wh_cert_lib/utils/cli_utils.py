# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

import dataclasses
import logging
import sys
from enum import IntEnum
from typing import Optional

import typer

from ..classes.certificate import CertReport, CertStatus
from ..classes.problem import Schedule, WhProblem
from ..classes.system import LinearController, LinearSystem
from ..exceptions import ProblemConfigError, WhCertError


class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 2
    INFEASIBLE = 3
    UNKNOWN = 4
    COUNTEREXAMPLE = 5
    VIOLATION = 6


STATUS_EXIT = {
    CertStatus.CERTIFIED: ExitCode.OK,
    CertStatus.INFEASIBLE: ExitCode.INFEASIBLE,
    CertStatus.UNKNOWN: ExitCode.UNKNOWN,
}


def configure_logging(verbose: int):
    """
    Sends log records to stderr so stdout stays machine-readable
    Args:
        verbose: 0 for warnings, 1 for progress messages, 2 and above for solver details
    """
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def fail(err: WhCertError) -> typer.Exit:
    """Reports a library error on stderr and returns the exit to raise."""
    if isinstance(err, ProblemConfigError):
        typer.echo(f"configuration error at {err.path}: {err.message}", err=True)
    else:
        typer.echo(f"error: {err}", err=True)
    return typer.Exit(int(ExitCode.CONFIG_ERROR))


def load_schedule(path: Optional[str], seed: Optional[int]) -> Schedule:
    schedule = Schedule.from_file(path) if path else Schedule()
    if seed is not None:
        schedule = dataclasses.replace(schedule, seed=seed)
    return schedule


def load_problem(path: str, seed: Optional[int]) -> WhProblem:
    return WhProblem.from_file(path, seed=seed or 0)


def pick_method(problem: WhProblem, method: str) -> str:
    """
    Resolves "auto" to "lmi" for linear plants under linear feedback and "sos" otherwise
    Args:
        problem: parsed problem
        method: "auto", "lmi" or "sos"

    Returns:
        str: "lmi" or "sos"
    """
    if method != "auto":
        return method
    linear = isinstance(problem.system, LinearSystem) and (
        problem.controller is None or isinstance(problem.controller, LinearController)
    )
    return "lmi" if linear else "sos"


def report_exit(report: CertReport) -> typer.Exit:
    return typer.Exit(int(STATUS_EXIT[report.status]))


def write_or_echo(text: str, output: Optional[str]):
    if output:
        with open(output, "w") as f:
            f.write(text)
    else:
        typer.echo(text)
