"""Tests for ``txlacam.matchline``.

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
import math
import unittest
import numpy as np
from txlacam.error import OutOfRange
from txlacam.cell import I_LIM, V_OV, CellOutput, DriveCurve
from txlacam.matchline import (C_ML, R_LEAK, TimingConfig, MatchlineState, SenseAmp, SenseResult, matchline_evaluate,
                               matchline_reset, sense, closed_form_voltage, level_traces, count_levels, k_boundary,
                               boundary_voltage, read_cycle)

def outputs(matching :int, total :int = 32) -> list[CellOutput]:
    return [CellOutput(True, DriveCurve.behavioral(I_LIM, 3.0)) if i < matching else CellOutput(False, DriveCurve.zero(3.0))
            for i in range(total)]

class TestMatchline(unittest.TestCase):

    def setUp(self):
        self.maxDiff = None  # pylint: disable=invalid-name

    def test_timing(self):
        timing = TimingConfig()
        self.assertEqual( timing.steps, 500 )
        self.assertAlmostEqual( timing.cycle_rate, 1/15e-9 )
        with self.assertRaises(OutOfRange):
            TimingConfig(t_clock=20e-9)
        with self.assertRaises(OutOfRange):
            TimingConfig(dt=1e-10)
        with self.assertRaises(OutOfRange):
            TimingConfig(t_evaluate=0, t_initialise=15e-9)

    def test_levels_closed_form(self):
        for c_ml in (C_ML, 250e-15):
            levels = count_levels(32, I_LIM, c_ml=c_ml)
            self.assertEqual( levels.shape, (33,) )
            self.assertEqual( levels[0], 0.0 )
            for n in range(1, 33):
                expect = closed_form_voltage(n, I_LIM, c_ml, R_LEAK, 5e-9)
                if expect <= 3.0 - V_OV:
                    self.assertAlmostEqual( levels[n], expect, delta=expect*0.02 )
            self.assertTrue( np.all(np.diff(levels) > 0) )
            self.assertTrue( np.all(levels <= 3.0) )

    def test_k_boundary(self):
        self.assertEqual( k_boundary(count_levels(32, I_LIM).tolist(), 1.4), 14 )
        self.assertEqual( k_boundary(count_levels(32, I_LIM, c_ml=250e-15).tolist(), 1.4), 15 )
        self.assertEqual( k_boundary([0.0, 0.5, 1.0], 2.0), 3 )
        self.assertEqual( k_boundary([0.0, 0.5, 1.0], 0.5), 2 )
        self.assertEqual( boundary_voltage([0.0, 0.5, 1.0], 2), 0.75 )
        with self.assertRaises(OutOfRange):
            boundary_voltage([0.0, 0.5, 1.0], 3)
        with self.assertRaises(OutOfRange):
            boundary_voltage([0.0, 0.5, 1.0], 0)

    def test_level_traces(self):
        times, volts = level_traces(32, I_LIM)
        self.assertEqual( times.shape, (501,) )
        self.assertEqual( volts.shape, (501, 33) )
        self.assertAlmostEqual( times[-1], 5e-9 )
        self.assertTrue( np.all(np.diff(volts[:, 32]) >= 0) )
        with self.assertRaises(ValueError):
            volts[0, 0] = 1.0
        self.assertIs( level_traces(32, I_LIM)[1], volts )

    def test_evaluate(self):
        ml = matchline_evaluate(MatchlineState(), outputs(14))
        self.assertAlmostEqual( ml.v, closed_form_voltage(14, I_LIM, C_ML, R_LEAK, 5e-9), delta=1e-6 )
        self.assertAlmostEqual( ml.v, float(count_levels(32, I_LIM)[14]), delta=1e-9 )
        self.assertEqual( len(ml.trace), 501 )
        self.assertEqual( ml.trace[0], (0.0, 0.0) )
        self.assertAlmostEqual( ml.time, 5e-9 )
        self.assertIs( sense(ml.v), SenseResult.HIT )
        self.assertIs( sense(matchline_evaluate(MatchlineState(), outputs(13)).v), SenseResult.MISS )
        self.assertEqual( matchline_evaluate(MatchlineState(), outputs(0)).v, 0.0 )
        # a second phase continues the trace
        ml2 = matchline_evaluate(ml, outputs(14))
        self.assertEqual( len(ml2.trace), 1001 )
        self.assertGreater( ml2.v, ml.v )
        times = [t for t, _ in ml2.trace]
        self.assertTrue( all(b > a for a, b in zip(times, times[1:])) )

    def test_step_refinement(self):
        coarse = count_levels(32, I_LIM)
        fine = count_levels(32, I_LIM, timing=TimingConfig(dt=5e-12))
        self.assertEqual( level_traces(32, I_LIM, timing=TimingConfig(dt=5e-12))[0].shape, (1001,) )
        self.assertLess( float(np.max(np.abs(fine - coarse))), 1e-4 )
        for n in (1, 14, 32):
            a = matchline_evaluate(MatchlineState(), outputs(n)).v
            b = matchline_evaluate(MatchlineState(), outputs(n), TimingConfig(dt=5e-12)).v
            self.assertLess( abs(a - b), 1e-4 )

    def test_saturation(self):
        ml = matchline_evaluate(MatchlineState(c_ml=20e-15), outputs(32))
        self.assertLessEqual( ml.v, 3.0 )
        self.assertGreater( ml.v, 3.0 - V_OV )

    def test_reset(self):
        ml = MatchlineState(v=1.4)
        tau = ml.r_reset*ml.c_ml
        out = matchline_reset(ml, tau)
        self.assertAlmostEqual( out.v, 1.4*math.exp(-1) )
        self.assertEqual( out.trace, ((0.0, 1.4), (tau, out.v)) )
        self.assertLess( matchline_reset(MatchlineState(v=3.0), 10e-9).v, 1e-3 )
        self.assertIs( matchline_reset(ml, 0), ml )
        with self.assertRaises(OutOfRange):
            MatchlineState(v=3.5)

    def test_sense(self):
        sa = SenseAmp()
        self.assertIs( sense(1.4, sa), SenseResult.MISS )
        self.assertIs( sense(1.4001, sa), SenseResult.HIT )
        self.assertIs( sense(0.0, sa), SenseResult.MISS )
        self.assertEqual( sa.output_level(SenseResult.HIT), 0.0 )
        self.assertEqual( sa.output_level(SenseResult.MISS), 5.0 )
        with self.assertRaises(OutOfRange):
            sense(-0.1, sa)
        with self.assertRaises(OutOfRange):
            sense(3.1, sa)
        with self.assertRaises(OutOfRange):
            SenseAmp(v_th=3.0)

    def test_read_cycle(self):
        events = read_cycle()
        self.assertEqual( [ (e.signal, e.level) for e in events ], [
            ('SA_RES_EN', True), ('SA_RES_EN', False), ('TXL_EN', True), ('SA_CLK', True), ('TXL_EN', False) ] )
        times = [ e.time for e in events ]
        self.assertEqual( times, sorted(times) )
        self.assertAlmostEqual( events[2].time, 10e-9 )
        self.assertAlmostEqual( events[3].time - events[2].time, 5e-9 )
