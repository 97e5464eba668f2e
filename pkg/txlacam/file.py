"""File-Related Utility Functions

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
import os
import typing
from pathlib import Path
from typing import Union
from decimal import Decimal
from contextlib import contextmanager
from collections.abc import Generator
from tempfile import NamedTemporaryFile

Filename = Union[str, os.PathLike]
"""A type to represent filenames."""

@contextmanager
def atomic_write(file :Filename, *, newline :str = '\n') -> Generator[typing.TextIO, None, None]:
    """Write a text file in one step: output goes to a temporary file in the same directory,
    which is renamed over ``file`` only if the ``with`` block completes without error.

    >>> with atomic_write('out.csv') as fh:  # doctest: +SKIP
    ...     fh.write('row,count\\n')

    Files are always encoded with UTF-8."""
    fn = Path(file).resolve()
    fn.parent.mkdir(parents=True, exist_ok=True)
    with NamedTemporaryFile('w', encoding='UTF-8', newline=newline, dir=fn.parent,
                            prefix='.'+fn.name+'_', delete=False) as tf:
        try:
            yield tf
        except BaseException:
            tf.close()
            os.unlink(tf.name)
            raise
    os.replace(tf.name, fn)

def scaled_str(value :float, exponent :int) -> str:
    """Render ``value * 10**exponent`` as a decimal string by shifting the decimal point of
    ``repr(value)``, so that :func:`unscaled` restores the exact same float.

    >>> scaled_str(5e-05, 6)
    '50'"""
    return format(Decimal(repr(float(value))).scaleb(exponent).normalize(), 'f')

def unscaled(text :str, exponent :int) -> float:
    """Inverse of :func:`scaled_str`.

    >>> unscaled('50', 6)
    5e-05"""
    return float(Decimal(text.strip()).scaleb(-exponent))
