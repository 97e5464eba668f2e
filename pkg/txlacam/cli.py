"""Command-Line Interface

Overview
--------

``txlacam`` ties the modules together into reproducible experiments; see ``txlacam -h``.

``txlacam program TEMPLATE``
    Compile a template CSV, program it into a fresh array with program-and-verify and write
    ``array.json``, ``conductance_map.csv`` and ``verify_report.txt``.

``txlacam search ARRAY (--query FILE | --waveform FILE)``
    Replay one initialise/evaluate cycle of an array file against a query, either given directly or
    sampled from a waveform, and write ``search_result.csv``, ``piso.txt``, ``energy.json`` and,
    with ``--traces on``, ``traces.csv``.

``txlacam sweep SPEC``
    Run a parameter sweep (see :mod:`txlacam.experiment`) and write ``sweep.csv``.

Every command also writes the effective configuration as ``config.toml`` into the output directory,
and writes every file atomically. The exit code is 0 on success, 1 if the simulated hardware cannot
do what was asked (for example a window that cannot be realized, or devices that do not verify),
and 2 for malformed input.

Functions
---------

Author, Copyright, and License
------------------------------
Copyright (c) 2024 The txlacam developers

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program. If not, see https://www.gnu.org/licenses/
"""
import logging
import argparse
from pathlib import Path
from typing import Optional
from collections.abc import Sequence
from .error import DomainError, UsageError, ParseError, ConfigError, VerifyFailed, logging_config
from .file import atomic_write
from .matchline import k_boundary, read_cycle
from .acam import PisoRegister, array_search, enter_programming_mode, exit_programming_mode, piso_load_and_shift
from .compiler import compile_templates, program_and_verify
from .energy import CellKind, search_energy
from .frontend import sample_and_hold
from .config import RunConfig, load_config, tomllib
from .experiment import parse_sweep_spec, run_sweep
from . import formats

_logger = logging.getLogger(__name__)

def _open(path :str, what :str, binary :bool = False):
    try:
        return open(path, 'rb') if binary else open(path, encoding='UTF-8')  # pylint: disable=consider-using-with
    except OSError as ex:
        raise ParseError(f"cannot open {what} {path!r}: {ex}") from ex

def cmd_program(config :RunConfig, args :argparse.Namespace) -> int:
    array = config.new_array()
    cfg = array.config
    with _open(args.template, 'template file') as fh:
        templates = formats.read_templates(fh, columns=cfg.columns, rows=cfg.rows, vdd=cfg.vdd_txl)
    cmap = compile_templates(templates, array.design, g_min=array.g_min, g_max=array.g_max, rram_rows=cfg.rram_rows)
    _logger.info("compiled %d templates into %d device targets for a %dx%d array (about %.2f mm²)", len(templates), len(cmap),
                 cfg.rows, cfg.columns, cfg.area_mm2)
    failure :Optional[VerifyFailed] = None
    try:
        array, report = program_and_verify(enter_programming_mode(array), cmap, config['compiler.tol_V'],
                                           config['compiler.max_iters'], config['run.seed'])
    except VerifyFailed as ex:
        failure = ex
        array, report = ex.array, ex.report  # type: ignore[assignment]
    array = exit_programming_mode(array)
    out = Path(args.out)
    with atomic_write(out/'array.json') as fh:
        formats.write_array(array, fh)
    with atomic_write(out/'conductance_map.csv') as fh:
        formats.write_conductance_map(cmap, fh)
    with atomic_write(out/'verify_report.txt') as fh:
        fh.write(report.render())
    if failure:
        raise failure
    return 0

def cmd_search(config :RunConfig, args :argparse.Namespace) -> int:
    with _open(args.array, 'array file') as fh:
        array = formats.read_array(fh, config.design())
    cfg = array.config
    if args.query:
        with _open(args.query, 'query file') as fh:
            query = formats.read_query(fh, cfg.columns, cfg.vdd_txl)
    else:
        with _open(args.waveform, 'waveform file') as fh:
            wave = formats.read_waveform(fh, cfg.vdd_txl)
        query = sample_and_hold(wave, config['frontend.sample_start_ns']*1e-9, config['frontend.sample_period_ns']*1e-9, cfg.columns)
    timing = config.timing()
    for event in read_cycle(timing):
        _logger.debug("%6.2f ns %s %s", event.time*1e9, event.signal, 'high' if event.level else 'low')
    result = array_search(array, query, config.v_en(), timing, config.fidelity(), matchline=config.matchline(),
                          sense_amp=config.sense_amp(), traces=config['run.traces'])
    _logger.info("%d of %d rows hit, v_th=%g V corresponds to k=%d matches", int(result.hits.sum()), result.rows,
                 result.sense_amp.v_th, k_boundary(result.levels.tolist(), result.sense_amp.v_th))
    bits = piso_load_and_shift(PisoRegister(cfg.rows), result.hit_word)
    energy = search_energy(result, config.energy_table(), config['energy.overhead'], CellKind.TXL9T4R,
                           timing=timing, vdd=cfg.vdd_txl)
    out = Path(args.out)
    with atomic_write(out/'search_result.csv') as fh:
        formats.write_search_result(result, fh)
    with atomic_write(out/'piso.txt') as fh:
        formats.write_piso(bits, fh)
    with atomic_write(out/'energy.json') as fh:
        formats.write_energy(energy, fh)
    if config['run.traces']:
        with atomic_write(out/'traces.csv') as fh:
            formats.write_traces(result, fh, t0=timing.t_initialise)
    return 0

def cmd_sweep(config :RunConfig, args :argparse.Namespace) -> int:
    with _open(args.spec, 'sweep spec', binary=True) as fh:
        try:
            spec = tomllib.load(fh)
        except tomllib.TOMLDecodeError as ex:
            raise ConfigError(f"cannot parse sweep spec {args.spec!r}: {ex}") from ex
    grid = parse_sweep_spec(spec, config)
    records = run_sweep(config, grid)
    with atomic_write(Path(args.out)/'sweep.csv') as fh:
        formats.write_sweep(records, fh)
    return 0

def main(argv :Optional[Sequence[str]] = None) -> None:
    """Command-line entry point; ``argv`` defaults to :data:`sys.argv`. Always exits via :meth:`argparse.ArgumentParser.exit`."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', help="configuration file (TOML)")
    common.add_argument('-s', '--seed', help="random seed (run.seed)", type=int)
    common.add_argument('-o', '--out', help="output directory (default: current directory)", default='.')
    common.add_argument('-f', '--fidelity', help="simulation fidelity (run.fidelity)", choices=['behavioral', 'circuit'])
    common.add_argument('-t', '--traces', help="write matchline traces (run.traces)", choices=['on', 'off'])
    common.add_argument('-v', '--verbose', help="be verbose", action="store_true")
    common.add_argument('-d', '--debug', help="enable debug output", action="store_true")
    parser = argparse.ArgumentParser(prog='txlacam', description='TXL-ACAM Analogue CAM Simulator')
    sub = parser.add_subparsers(dest='command', required=True)
    prog = sub.add_parser('program', parents=[common], help="compile and program templates into an array")
    prog.add_argument('template', help="template CSV file")
    prog.set_defaults(func=cmd_program)
    search = sub.add_parser('search', parents=[common], help="search an array")
    search.add_argument('array', help="array JSON file")
    source = search.add_mutually_exclusive_group(required=True)
    source.add_argument('-q', '--query', help="query CSV file")
    source.add_argument('-w', '--waveform', help="waveform CSV file, sampled by the sample-and-hold front end")
    search.set_defaults(func=cmd_search)
    sweep = sub.add_parser('sweep', parents=[common], help="run a parameter sweep")
    sweep.add_argument('spec', help="sweep specification (TOML)")
    sweep.set_defaults(func=cmd_sweep)
    args = parser.parse_args(argv)
    logging_config(level=logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides['run__seed'] = args.seed
        if args.fidelity is not None:
            overrides['run__fidelity'] = args.fidelity
        if args.traces is not None:
            overrides['run__traces'] = args.traces == 'on'
        if overrides:
            config = config.with_overrides(**overrides)
        with atomic_write(Path(args.out)/'config.toml') as fh:
            config.dump(fh)
        code = args.func(config, args)
    except DomainError as ex:
        _logger.error("%s", ex)
        parser.exit(1)
    except UsageError as ex:
        _logger.error("%s", ex)
        parser.exit(2)
    parser.exit(code)
