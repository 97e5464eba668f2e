"""Errors and Logging

Overview
--------

All errors raised by this package derive from :exc:`AcamError`. They fall into two families,
which the command-line interface maps onto its exit codes:

- :exc:`DomainError` (exit code 1): the inputs were well-formed but the simulated hardware
  cannot do what was asked, e.g. a window bound outside the achievable range, or a
  program-and-verify loop that did not converge.
- :exc:`UsageError` (exit code 2): the inputs themselves are malformed, e.g. a bad config key
  or a template file that does not parse.

This module also provides :func:`logging_config` with its :class:`CustomFormatter`,
which logs exceptions via :func:`javaishstacktrace`.

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
import time
import logging
from pathlib import Path
from logging import Formatter
from traceback import extract_tb
from collections.abc import Generator
from typing import Optional, Literal, Union, Protocol, runtime_checkable

class AcamError(Exception):
    """Base class of all errors raised by this package."""

class DomainError(AcamError):
    """The request is well-formed, but the modelled hardware cannot satisfy it."""

class UsageError(AcamError):
    """Malformed input: a file that does not parse, a bad configuration, mismatched dimensions."""

class NoConvergence(DomainError):
    """A numerical solver did not converge within its iteration budget."""

class NoCrossing(DomainError):
    """An inverter transfer curve never crosses half the supply voltage."""

class ImmutableDevice(DomainError):
    """A write was attempted on a polysilicon element."""

class OutOfRange(DomainError, ValueError):
    """A conductance or voltage lies outside its admissible range."""

class ModeError(DomainError):
    """An operation was attempted in the wrong mode (matching vs. programming)."""

class AddressOutOfRange(DomainError, IndexError):
    """A device address does not exist in the array."""

class Unachievable(DomainError, ValueError):
    """A window bound cannot be realized by any conductance in the device range.

    :ivar target: the requested threshold voltage
    :ivar achievable: the ``(low, high)`` range of realizable thresholds
    :ivar cell: the ``(row, col)`` of the offending cell, if known"""
    def __init__(self, target :float, achievable :tuple[float, float], cell :Optional[tuple[int, int]] = None):
        self.target = target
        self.achievable = achievable
        self.cell = cell
        where = '' if cell is None else f"row {cell[0]} col {cell[1]}: "
        super().__init__(f"{where}threshold {target:.4f} V not achievable, range is [{achievable[0]:.4f}, {achievable[1]:.4f}] V")

class VerifyFailed(DomainError):
    """Program-and-verify left devices out of tolerance.

    :ivar devices: the addresses still out of tolerance
    :ivar report: the full verify report
    :ivar array: the array as left by the last write"""
    def __init__(self, message :str, devices :tuple, report :object = None, array :object = None):
        self.devices = devices
        self.report = report
        self.array = array
        super().__init__(message)

class OutOfSupport(DomainError, ValueError):
    """A sample time lies outside a waveform's support."""

class ParseError(UsageError, ValueError):
    """An input file could not be parsed."""

class ConfigError(UsageError, ValueError):
    """An invalid configuration key or value."""

class LengthMismatch(UsageError, ValueError):
    """Two sequences that must have the same length do not."""

_basepath = Path(__file__).parent.parent.resolve()

def extype_fullname(ex: type) -> str:
    """Return the name of an exception together with its module name, if any."""
    return ex.__name__ if ex.__module__ in ('builtins','__main__') else ex.__module__+"."+ex.__name__

def ex_repr(ex: BaseException) -> str:
    """Return a representation of the exception including its full name and ``.args``."""
    return extype_fullname(type(ex)) + '(' + ', '.join(map(repr, ex.args)) + ')'

def javaishstacktrace(ex :BaseException) -> Generator[str, None, None]:
    """Generate a compact stack trace, innermost exception first, with paths relative to the project.

    Can be used like so: ``"\\n".join(javaishstacktrace(ex))``"""
    chain = [ex]
    while chain[-1].__cause__:
        chain.append(chain[-1].__cause__)  # type: ignore[arg-type]
    for i, e in enumerate(reversed(chain)):
        yield ex_repr(e) if i==0 else "which caused: " + ex_repr(e)
        for item in reversed( extract_tb(e.__traceback__) ):
            fn = Path(item.filename)
            if fn.is_absolute() and fn.is_relative_to(_basepath):
                fn = fn.relative_to(_basepath)
            yield f"\tat {fn}:{item.lineno} in {item.name}"

class CustomFormatter(Formatter):
    """A :class:`logging.Formatter` with GMT ``Z``-suffixed timestamps that logs errors using :func:`javaishstacktrace`.

    :seealso: :func:`logging_config`"""
    converter = time.gmtime
    default_time_format = '%Y-%m-%d %H:%M:%S'
    default_msec_format = '%s.%03dZ'
    def formatException(self, ei :tuple) -> str:
        return '\n'.join(javaishstacktrace(ei[1]))

@runtime_checkable
class LoggingStream(Protocol):
    """The minimum required interface of a stream for :class:`logging.StreamHandler`."""
    def flush(self) -> None: ...    # pragma: no cover
    def write(self, s :str, /) -> int: ...    # pragma: no cover

def logging_config(*,
        level :int = logging.WARNING,
        stream :Union[None, Literal[True], LoggingStream] = None,
        fmt :Optional[str] = '[%(asctime)s] %(levelname)s %(name)s: %(message)s' ) -> None:
    """A replacement for :func:`logging.basicConfig` that uses :class:`CustomFormatter`.

    :param level: The root logger level, defaults to :data:`logging.WARNING`.
    :param stream: The stream for the :class:`~logging.StreamHandler`; :obj:`None` or :obj:`True` means :data:`sys.stderr`.
    :param fmt: The format string for the handler.

    Any existing handlers on the root logger are removed."""
    if stream is None or stream is True:
        stream = sys.stderr
    if not isinstance(stream, LoggingStream):
        raise TypeError(f"not a LoggingStream: {type(stream)}")
    root = logging.getLogger()
    for hnd in root.handlers[:]:
        root.removeHandler(hnd)
        hnd.close()
    hnd = logging.StreamHandler(stream)
    hnd.setFormatter(CustomFormatter(fmt=fmt))
    root.addHandler(hnd)
    root.setLevel(level)
