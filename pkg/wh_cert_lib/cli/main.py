# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""CLI entry point."""

import json
import os
import shutil
from typing import Optional

import numpy as np
import typer

from ..classes.certificate import GbfVariant, load_certificate
from ..classes.problem import CONFIGS_DIR
from ..classes.system import LinearController, controller_from_dict
from ..classes.wh_constraint import LossWord, WhConstraint
from ..exceptions import WhCertError
from ..utils import cli_utils
from ..utils.cli_utils import ExitCode
from ..utils.graph_utils import build_graph, export_dot, language_equiv_check
from ..utils.lmi_utils import synthesize as synthesize_gain
from ..utils.lmi_utils import verify as verify_lmi
from ..utils.simulation_utils import falsify as falsify_search
from ..utils.simulation_utils import monitor, rollout
from ..utils.sos_utils import verify_sos
from ..utils.string_utils import parse_grid, parse_vector_text
from ..utils.validation_utils import levelset_sample, validate_cert

app = typer.Typer(name="Weakly-hard barrier certificates", no_args_is_help=True)

PROBLEM_HELP = "problem JSON file or the name of a bundled problem (see get-configs)"


@app.callback()
def main(verbose: int = typer.Option(0, "--verbose", "-v", count=True, help="-v for progress, -vv for solver details")):
    cli_utils.configure_logging(verbose)


@app.command()
def graph(
    r: int = typer.Option(..., "--r", help="minimal number of successes"),
    s: int = typer.Option(..., "--s", help="window length"),
    dot: Optional[str] = typer.Option(None, help="write the graph in DOT format to this file"),
    check_len: Optional[int] = typer.Option(None, help="compare the graph with the window semantics up to this word length"),
):
    try:
        g = build_graph(WhConstraint(r, s))
        message = f"{g.n_nodes} nodes, {g.n_edges} edges"
        if check_len is not None:
            ok, witness = language_equiv_check(g, g.constraint, check_len)
            message += ", language check OK" if ok else f", language check FAILED on {witness}"
        if dot:
            with open(dot, "w") as f:
                f.write(export_dot(g))
    except WhCertError as err:
        raise cli_utils.fail(err)
    typer.echo(message)
    if check_len is not None and not ok:
        raise typer.Exit(int(ExitCode.VIOLATION))


@app.command()
def verify(
    problem: str = typer.Option(..., help=PROBLEM_HELP),
    variant: str = typer.Option(..., help="gbf, dgbf, 1gbf or 1dgbf"),
    method: str = typer.Option("auto", help="auto, lmi or sos"),
    degree: Optional[int] = typer.Option(None, help="degree of the SOS barrier polynomials"),
    schedule: Optional[str] = typer.Option(None, help="schedule JSON overriding the numerical defaults"),
    seed: Optional[int] = typer.Option(None, help="seed of every randomized procedure"),
    no_validate: bool = typer.Option(False, "--no-validate", help="skip the sampling validation"),
    output: Optional[str] = typer.Option(None, help="write the report to this file instead of stdout"),
):
    try:
        sched = cli_utils.load_schedule(schedule, seed)
        wh = cli_utils.load_problem(problem, sched.seed)
        gbf = GbfVariant.of(variant, wh.strategy)
        if cli_utils.pick_method(wh, method) == "sos":
            report = verify_sos(gbf, wh.system, wh.controller, wh.graph, wh.sets, sched, degree, not no_validate)
        else:
            report = verify_lmi(gbf, wh.system, wh.controller, wh.graph, wh.sets, sched, validate=not no_validate)
    except (WhCertError, ValueError) as err:
        raise cli_utils.fail(err if isinstance(err, WhCertError) else WhCertError(str(err)))
    cli_utils.write_or_echo(report.to_json(), output)
    raise cli_utils.report_exit(report)


@app.command()
def synthesize(
    problem: str = typer.Option(..., help=PROBLEM_HELP),
    k_init: Optional[str] = typer.Option(None, help='initial gain, row-major, e.g. "-0.35,-0.85"'),
    schedule: Optional[str] = typer.Option(None, help="schedule JSON overriding the numerical defaults"),
    seed: Optional[int] = typer.Option(None, help="seed of every randomized procedure"),
    output: Optional[str] = typer.Option(None, help="write the result to this file instead of stdout"),
):
    try:
        sched = cli_utils.load_schedule(schedule, seed)
        wh = cli_utils.load_problem(problem, sched.seed)
        K0 = None
        if k_init is not None:
            K0 = parse_vector_text(k_init).reshape(wh.system.n_inputs, wh.system.n_states)
        elif isinstance(wh.controller, LinearController):
            K0 = wh.controller.K
        controller, report = synthesize_gain(GbfVariant.of("gbf", wh.strategy), wh.system, wh.graph, wh.sets, sched, K0)
    except (WhCertError, ValueError) as err:
        raise cli_utils.fail(err if isinstance(err, WhCertError) else WhCertError(str(err)))
    result = {"controller": controller.to_dict(), "report": report.to_dict()}
    cli_utils.write_or_echo(json.dumps(result, indent=2), output)
    raise cli_utils.report_exit(report)


@app.command()
def simulate(
    problem: str = typer.Option(..., help=PROBLEM_HELP),
    word: str = typer.Option(..., help="loss word, e.g. 10010"),
    x0: str = typer.Option(..., help='initial state, e.g. "0.1,-0.2"'),
    cert: Optional[str] = typer.Option(None, help="certificate or report JSON; adds psi and the monitor ledger"),
    ledger: Optional[str] = typer.Option(None, help="write the monitor ledger CSV to this file"),
    output: Optional[str] = typer.Option(None, help="write the trajectory CSV to this file instead of stdout"),
):
    try:
        wh = cli_utils.load_problem(problem, 0)
        loss_word = LossWord.from_string(word)
        controller = wh.controller
        certificate = None
        if cert is not None:
            with open(cert) as f:
                certificate = load_certificate(f.read())
            controller = controller or controller_from_dict(
                certificate.controller, wh.system.n_states, wh.system.n_inputs
            )
        if controller is None:
            raise WhCertError("simulation needs a controller in the problem or the certificate")
        traj = rollout(wh.system, controller, wh.strategy, parse_vector_text(x0), loss_word, wh.graph)
        psi = None
        if certificate is not None:
            book = monitor(traj, certificate, wh.graph)
            psi = np.array([e.psi for e in sorted(book.entries, key=lambda e: e.t)])
            if ledger:
                book.to_frame().to_csv(ledger, index=False)
            if not book.passed:
                bad = book.first_violation
                typer.echo(f"monitor: bound violated at t = {bad.t} on node {bad.node}", err=True)
    except (WhCertError, ValueError) as err:
        raise cli_utils.fail(err if isinstance(err, WhCertError) else WhCertError(str(err)))
    cli_utils.write_or_echo(traj.to_frame(psi).to_csv(index=False), output)


@app.command()
def falsify(
    problem: str = typer.Option(..., help=PROBLEM_HELP),
    horizon: int = typer.Option(..., help="number of time steps"),
    samples: int = typer.Option(10000, help="initial states sampled in X0"),
    seed: Optional[int] = typer.Option(None, help="sampling seed"),
    k: Optional[str] = typer.Option(None, help="gain overriding the controller of the problem"),
    output: Optional[str] = typer.Option(None, help="write the report to this file instead of stdout"),
):
    try:
        wh = cli_utils.load_problem(problem, seed)
        controller = wh.controller
        if k is not None:
            controller = LinearController(parse_vector_text(k).reshape(wh.system.n_inputs, wh.system.n_states))
        if controller is None:
            raise WhCertError("falsification needs a controller")
        report = falsify_search(wh.system, controller, wh.strategy, wh.graph, wh.sets, horizon, samples, seed or 0)
    except (WhCertError, ValueError) as err:
        raise cli_utils.fail(err if isinstance(err, WhCertError) else WhCertError(str(err)))
    cli_utils.write_or_echo(report.to_json(), output)
    raise typer.Exit(int(ExitCode.COUNTEREXAMPLE if report.found else ExitCode.OK))


@app.command()
def validate(
    problem: str = typer.Option(..., help=PROBLEM_HELP),
    cert: str = typer.Option(..., help="certificate or report JSON"),
    samples: int = typer.Option(100000, help="samples per set"),
    tol: float = typer.Option(1e-6, help="allowed violation of the non-strict conditions"),
    seed: Optional[int] = typer.Option(None, help="sampling seed"),
    output: Optional[str] = typer.Option(None, help="write the report to this file instead of stdout"),
):
    try:
        wh = cli_utils.load_problem(problem, seed)
        with open(cert) as f:
            certificate = load_certificate(f.read())
        report = validate_cert(certificate, wh.system, None, wh.graph, wh.sets, samples, seed or 0, tol)
    except (WhCertError, ValueError) as err:
        raise cli_utils.fail(err if isinstance(err, WhCertError) else WhCertError(str(err)))
    cli_utils.write_or_echo(report.to_json(), output)
    raise typer.Exit(int(ExitCode.OK if report.passed else ExitCode.VIOLATION))


@app.command()
def levelset(
    cert: str = typer.Option(..., help="certificate or report JSON"),
    node: str = typer.Option(..., help="graph node"),
    grid: str = typer.Option(..., help='grid, e.g. "x1:-1:1:101,x2:-1:1:101"'),
    plot: Optional[str] = typer.Option(None, help="also draw the zero-level sets of every node to this image"),
    output: Optional[str] = typer.Option(None, help="write the CSV to this file instead of stdout"),
):
    try:
        with open(cert) as f:
            certificate = load_certificate(f.read())
        _, axes = parse_grid(grid)
        frame = levelset_sample(certificate, node, axes)
        if plot:
            from ..utils.plot_utils import plot_levelsets

            plot_levelsets(certificate, axes, plot)
    except (WhCertError, ValueError) as err:
        raise cli_utils.fail(err if isinstance(err, WhCertError) else WhCertError(str(err)))
    cli_utils.write_or_echo(frame.to_csv(index=False), output)


@app.command()
def get_configs():
    shutil.copytree(CONFIGS_DIR, os.path.join(".", "configs"), dirs_exist_ok=True)


if __name__ == "__main__":
    app()
