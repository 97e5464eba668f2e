"""Run Configuration

Overview
--------

All parameters of a run come from one TOML file. Nested tables are flattened into dotted keys, so

.. code-block:: toml

   [devices.nmos]
   vt_V = 0.8

and ``"devices.nmos.vt_V" = 0.8`` mean the same thing. Every key has a default in :data:`DEFAULTS`;
unknown keys and values of the wrong type raise :exc:`~txlacam.error.ConfigError`. Key names carry
their unit (``_V``, ``_S``, ``_s``, ``_J``, ...). ``array.poly_g_m1_S`` and ``array.poly_g_m2_S``
default to ``0``, meaning the reference conductance.

:class:`RunConfig` holds the merged values and builds the model objects from them;
:meth:`RunConfig.dump` writes the effective configuration back out in a form that
:func:`load_config` reads back to the same values.

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
import sys
import json
import typing
import logging
from types import MappingProxyType
from dataclasses import dataclass, field
from collections.abc import Mapping
from typing import Any, Optional
from .error import AcamError, ConfigError
from .file import Filename
from .devices import MosfetParams, Polarity
from .cell import CellDesign, Fidelity, v_en_for_current
from .matchline import MatchlineState, SenseAmp, TimingConfig
from .acam import AcamArray, ArrayConfig
from .energy import CostAnchors, EnergyTable

if sys.version_info >= (3, 11):  # cover-req-ge3.11
    import tomllib
else:  # cover-req-lt3.11
    import tomli as tomllib

_logger = logging.getLogger(__name__)

#: Every configuration key with its default value; the type of the default is the type the key accepts.
DEFAULTS :Mapping[str, Any] = MappingProxyType({
    'devices.nmos.vt_V': 0.8,
    'devices.nmos.k_AV2': 200e-6,
    'devices.nmos.lambda_V': 0.0,
    'devices.pmos.vt_V': 0.8,
    'devices.pmos.k_AV2': 100e-6,
    'devices.pmos.lambda_V': 0.0,
    'devices.rram.g_min_S': 2e-6,
    'devices.rram.g_max_S': 200e-6,
    'devices.rram.write_sigma': 0.0,
    'array.columns': 32,
    'array.rram_rows': 32,
    'array.poly_rows': 16,
    'array.vdd_txl_V': 3.0,
    'array.vdd_prog_V': 5.0,
    'array.poly_g_m1_S': 0.0,
    'array.poly_g_m2_S': 0.0,
    'cell.i_lim_A': 5e-6,
    'cell.v_ov_V': 0.3,
    'cell.match_fraction': 0.1,
    'matchline.c_ml_F': 245e-15,
    'matchline.r_leak_Ohm': 1e6,
    'matchline.r_reset_Ohm': 1e3,
    'matchline.v_th_V': 1.4,
    'timing.t_clock_s': 15e-9,
    'timing.t_evaluate_s': 5e-9,
    'timing.t_initialise_s': 10e-9,
    'timing.dt_s': 10e-12,
    'energy.txl9t4r.match.low_J': 152e-15,
    'energy.txl9t4r.match.high_J': 168e-15,
    'energy.txl9t4r.mismatch.low_J': 30e-15,
    'energy.txl9t4r.mismatch.high_J': 130e-15,
    'energy.sixt2r.match.low_J': 2.25e-12,
    'energy.sixt2r.match.high_J': 2.25e-12,
    'energy.sixt2r.mismatch.low_J': 479.2e-15,
    'energy.sixt2r.mismatch.high_J': 3.84e-12,
    'energy.overhead': 0.0,
    'compiler.tol_V': 0.02,
    'compiler.max_iters': 10,
    'frontend.sample_start_ns': 0.0,
    'frontend.sample_period_ns': 15.0,
    'run.seed': 0,
    'run.fidelity': Fidelity.BEHAVIORAL.value,
    'run.traces': False,
    'sweep.searches': 20,
})

def flatten(table :Mapping[str, Any], prefix :str = '') -> dict[str, Any]:
    """Flatten nested TOML tables into dotted keys.

    :raises ConfigError: if a key is given more than once, e.g. both nested and dotted"""
    out :dict[str, Any] = {}
    for key, value in table.items():
        full = prefix + key
        items = flatten(value, full + '.') if isinstance(value, Mapping) else {full: value}
        for k, v in items.items():
            if k in out:
                raise ConfigError(f"configuration key {k!r} given more than once")
            out[k] = v
    return out

def check_value(key :str, value :Any) -> Any:
    """Check one configuration value against its default's type; ints are accepted for floats.

    :raises ConfigError: for unknown keys and wrong types"""
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key {key!r}")
    default = DEFAULTS[key]
    if isinstance(default, bool) or isinstance(value, bool):
        ok = isinstance(value, bool) and isinstance(default, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float))
        value = float(value) if ok else value
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"configuration key {key!r} must be of type {type(default).__name__}, got {value!r}")
    return value

@dataclass(frozen=True)
class RunConfig:
    """The effective configuration: :data:`DEFAULTS` merged with the values from a file and the command line."""
    values :Mapping[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key :str) -> Any:
        return self.values[key]

    @classmethod
    def from_mapping(cls, overrides :Mapping[str, Any]) -> 'RunConfig':
        """Merge flattened ``overrides`` into the defaults and validate the result."""
        values = dict(DEFAULTS)
        for key, value in overrides.items():
            values[key] = check_value(key, value)
        conf = cls(values)
        conf.validate()
        return conf

    def with_overrides(self, **overrides :Any) -> 'RunConfig':
        """Override keys given with underscores for dots, e.g. ``run__seed=3`` for ``run.seed``."""
        return RunConfig.from_mapping({**self.values, **{k.replace('__', '.'): v for k, v in overrides.items()}})

    def validate(self) -> None:
        """Build every model object once so that inconsistent values are reported as configuration errors.

        :raises ConfigError: wrapping the underlying error"""
        try:
            self.new_array()
            self.timing()
            self.matchline()
            self.sense_amp()
            self.energy_table()
            self.fidelity()
            self.v_en()
        except (AcamError, ValueError) as ex:
            if isinstance(ex, ConfigError):
                raise
            raise ConfigError(f"invalid configuration: {ex}") from ex
        if self['compiler.max_iters'] < 1 or self['compiler.tol_V'] < 0 or self['energy.overhead'] < 0 \
                or self['sweep.searches'] < 0 or self['frontend.sample_period_ns'] <= 0:
            raise ConfigError("compiler.max_iters, compiler.tol_V, energy.overhead, sweep.searches or frontend.sample_period_ns out of range")

    def mosfet(self, polarity :Polarity) -> MosfetParams:
        name = 'nmos' if polarity is Polarity.N else 'pmos'
        return MosfetParams(polarity, self[f'devices.{name}.vt_V'], self[f'devices.{name}.k_AV2'], self[f'devices.{name}.lambda_V'])

    def design(self) -> CellDesign:
        pmos, nmos = self.mosfet(Polarity.P), self.mosfet(Polarity.N)
        return CellDesign(pmos, nmos, m_men=pmos, m_mlp=pmos, m_mln=nmos, vdd=self['array.vdd_txl_V'],
                          v_ov=self['cell.v_ov_V'], match_fraction=self['cell.match_fraction'])

    def array_config(self) -> ArrayConfig:
        return ArrayConfig(self['array.columns'], self['array.rram_rows'], self['array.poly_rows'],
                           self['array.vdd_txl_V'], self['array.vdd_prog_V'])

    def new_array(self) -> AcamArray:
        """A fresh array with all RRAM devices at the reference conductance."""
        return AcamArray.create(self.array_config(), self.design(), g_min=self['devices.rram.g_min_S'],
                                g_max=self['devices.rram.g_max_S'], write_sigma=self['devices.rram.write_sigma'],
                                poly_g_m1=self['array.poly_g_m1_S'] or None, poly_g_m2=self['array.poly_g_m2_S'] or None)

    def timing(self) -> TimingConfig:
        return TimingConfig(self['timing.t_clock_s'], self['timing.t_evaluate_s'], self['timing.t_initialise_s'], self['timing.dt_s'])

    def matchline(self) -> MatchlineState:
        return MatchlineState(c_ml=self['matchline.c_ml_F'], r_leak=self['matchline.r_leak_Ohm'],
                              r_reset=self['matchline.r_reset_Ohm'], vdd=self['array.vdd_txl_V'])

    def sense_amp(self, v_th :Optional[float] = None) -> SenseAmp:
        return SenseAmp(self['matchline.v_th_V'] if v_th is None else v_th, self['array.vdd_txl_V'])

    def energy_table(self) -> EnergyTable:
        def anchors(kind :str, outcome :str) -> CostAnchors:
            return CostAnchors(self[f'energy.{kind}.{outcome}.low_J'], self[f'energy.{kind}.{outcome}.high_J'])
        return EnergyTable(anchors('txl9t4r', 'match'), anchors('txl9t4r', 'mismatch'),
                           anchors('sixt2r', 'match'), anchors('sixt2r', 'mismatch'))

    def fidelity(self) -> Fidelity:
        try:
            return Fidelity(self['run.fidelity'])
        except ValueError as ex:
            raise ConfigError(f"run.fidelity must be one of {[f.value for f in Fidelity]}") from ex

    def v_en(self) -> float:
        """The gate bias of ``M_MEN`` that limits each cell's current to ``cell.i_lim_A``."""
        design = self.design()
        return v_en_for_current(design.m_men, design.vdd, self['cell.i_lim_A'])

    def dump(self, fh :typing.TextIO) -> None:
        """Write the configuration as TOML, one dotted key per line, in the order of :data:`DEFAULTS`."""
        for key in DEFAULTS:
            value = self.values[key]
            if isinstance(value, bool):
                text = 'true' if value else 'false'
            elif isinstance(value, float):
                text = repr(value)
            elif isinstance(value, int):
                text = str(value)
            else:
                text = json.dumps(value)
            fh.write(f'"{key}" = {text}\n')

def load_config(path :Optional[Filename] = None) -> RunConfig:
    """Load a configuration file; without a file, the defaults.

    :raises ConfigError: if the file cannot be read or parsed, or holds invalid keys or values"""
    if path is None:
        return RunConfig.from_mapping({})
    try:
        with open(path, 'rb') as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as ex:
        raise ConfigError(f"cannot load configuration {str(path)!r}: {ex}") from ex
    conf = RunConfig.from_mapping(flatten(data))
    _logger.debug("loaded configuration from %s", path)
    return conf
