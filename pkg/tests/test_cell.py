"""Tests for ``txlacam.cell``.

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
import dataclasses
import numpy as np
from txlacam.error import ModeError, OutOfRange, Unachievable
from txlacam.devices import PMOS, G_MIN, G_MAX, ElementKind, MosfetParams, Polarity, reference_conductance, inverter_threshold
from txlacam.cell import (I_LIM, Mode, Fidelity, Outcome, Which, MatchWindow, DriveCurve, TxlCell, men_current,
                          v_en_for_current, cell_window, cell_evaluate, cell_set_mode, programming_paths,
                          sixt2r_window, sixt2r_evaluate, compile_sixt2r)
from txlacam.compiler import design_curve

G_REF = reference_conductance(G_MIN, G_MAX)
V_EN = v_en_for_current(PMOS, 3.0, I_LIM)

class TestCell(unittest.TestCase):

    def setUp(self):
        self.maxDiff = None  # pylint: disable=invalid-name

    def test_match_window(self):
        win = MatchWindow(1.2, 1.5)
        self.assertTrue( win.contains(1.3) )
        self.assertFalse( win.contains(1.2) )
        self.assertFalse( win.contains(1.5) )
        self.assertFalse( win.empty )
        self.assertAlmostEqual( win.midpoint, 1.35 )
        self.assertTrue( MatchWindow(1.5, 1.5).empty )
        self.assertFalse( MatchWindow(1.5, 1.2).contains(1.3) )
        with self.assertRaises(OutOfRange):
            MatchWindow(-0.1, 1.0)
        self.assertIs( win.check_supply(3.0), win )
        self.assertEqual( MatchWindow(0.0, 3.0).check_supply(3.0), MatchWindow(0.0, 3.0) )
        with self.assertRaises(OutOfRange):
            MatchWindow(1.2, 3.2).check_supply(3.0)
        with self.assertRaises(OutOfRange):
            compile_sixt2r(MatchWindow(1.2, 3.2))

    def test_drive_curve(self):
        beh = DriveCurve.behavioral(5e-6, 3.0)
        self.assertAlmostEqual( float(beh(0.0)), 5e-6 )
        self.assertAlmostEqual( float(beh(2.7)), 5e-6 )
        self.assertAlmostEqual( float(beh(2.85)), 2.5e-6 )
        self.assertAlmostEqual( float(beh(3.0)), 0.0 )
        total = DriveCurve.total([beh, beh, DriveCurve.zero(3.0)], 3.0)
        self.assertAlmostEqual( float(total(1.0)), 10e-6 )
        self.assertAlmostEqual( float(total(2.85)), 5e-6 )

    def test_men_current(self):
        self.assertAlmostEqual( men_current(PMOS, 3.0, V_EN), I_LIM )
        self.assertAlmostEqual( men_current(PMOS, 3.0, v_en_for_current(PMOS, 3.0, 2e-6)), 2e-6 )
        self.assertEqual( men_current(PMOS, 3.0, 3.0), 0.0 )
        with self.assertRaises(OutOfRange):
            v_en_for_current(PMOS, 3.0, 1.0)

    def test_window(self):
        cell = TxlCell.build(G_REF/2, 2*G_REF, G_REF)
        win = cell_window(cell)
        self.assertLess( win.v_low, win.v_high )
        self.assertAlmostEqual( win.v_low, inverter_threshold(cell.inv_low), delta=5e-5 )
        self.assertAlmostEqual( win.v_high, inverter_threshold(cell.inv_high), delta=5e-5 )
        self.assertTrue( cell_window(TxlCell.build(2*G_REF, G_REF/2, G_REF)).empty )
        with self.assertRaises(OutOfRange):
            TxlCell.build(1e-3, G_REF, G_REF)

    def test_window_batched(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            g_m1, g_m2 = np.exp(rng.uniform(math.log(G_MIN), math.log(G_MAX), 2))
            cell = TxlCell.build(float(g_m1), float(g_m2), G_REF)
            win = cell_window(cell)
            self.assertAlmostEqual( win.v_low, inverter_threshold(cell.inv_low), delta=5e-5 )
            self.assertAlmostEqual( win.v_high, inverter_threshold(cell.inv_high), delta=5e-5 )
        # inverters built from different transistors are solved one at a time
        odd = dataclasses.replace(cell, inv_high=dataclasses.replace(cell.inv_high, nmos=MosfetParams(Polarity.N, 0.7, 250e-6)))
        win = cell_window(odd)
        self.assertAlmostEqual( win.v_low, inverter_threshold(odd.inv_low), delta=5e-5 )
        self.assertAlmostEqual( win.v_high, inverter_threshold(odd.inv_high), delta=5e-5 )
        self.assertNotAlmostEqual( win.v_high, cell_window(cell).v_high, delta=1e-3 )

    def test_behavioral(self):
        cell = TxlCell.build(G_REF/2, 2*G_REF, G_REF)
        win = cell_window(cell)
        out = cell_evaluate(cell, win.midpoint, V_EN)
        self.assertTrue( out.matching )
        self.assertAlmostEqual( float(out.i_drive(0.0)), I_LIM )
        for v_in in (0.0, win.v_low, win.v_high, 3.0):
            out = cell_evaluate(cell, v_in, V_EN)
            self.assertFalse( out.matching )
            self.assertEqual( float(out.i_drive(0.0)), 0.0 )
        with self.assertRaises(OutOfRange):
            cell_evaluate(cell, 3.5, V_EN)
        with self.assertRaises(OutOfRange):
            cell_evaluate(cell, 1.0, -1.0)

    def test_circuit_agrees(self):
        for g_m1, g_m2 in ((G_REF/2, 2*G_REF), (G_REF/1.5, 1.5*G_REF), (G_REF/2, G_REF)):
            cell = TxlCell.build(g_m1, g_m2, G_REF)
            win = cell_window(cell)
            for v_in in (0.2, win.midpoint, 2.9):
                beh = cell_evaluate(cell, v_in, V_EN, Fidelity.BEHAVIORAL)
                cir = cell_evaluate(cell, v_in, V_EN, Fidelity.CIRCUIT)
                self.assertEqual( beh.matching, cir.matching, (g_m1, g_m2, v_in) )
                if cir.matching:
                    self.assertAlmostEqual( float(cir.i_drive(0.0)), I_LIM, delta=I_LIM*0.05 )
                    # the stack current falls as the matchline charges up
                    self.assertTrue( np.all(np.diff(cir.i_drive.i) <= 0) )
                    self.assertAlmostEqual( float(cir.i_drive(3.0)), 0.0, delta=I_LIM*0.01 )

    def test_circuit_agrees_near_bounds(self):
        curve = design_curve()
        lo, hi = curve.achievable
        rng = np.random.default_rng(11)
        for i in range(100):
            v_low = rng.uniform(lo + 0.02, hi - 0.2)
            v_high = rng.uniform(v_low + 0.12, hi - 0.02)
            g_m1, g_m2 = curve.conductance([v_low, v_high])
            cell = TxlCell.build(float(g_m1), float(g_m2), G_REF)
            win = cell_window(cell)
            inputs = [win.v_low - 0.05, win.v_low + 0.05, win.v_high - 0.05, win.v_high + 0.05]
            if i % 5 == 0:
                inputs += [win.v_low - 0.2, win.v_high + 0.2]
            for v_in in inputs:
                beh = cell_evaluate(cell, v_in, V_EN, Fidelity.BEHAVIORAL)
                cir = cell_evaluate(cell, v_in, V_EN, Fidelity.CIRCUIT)
                self.assertEqual( beh.matching, win.contains(v_in) )
                self.assertEqual( cir.matching, beh.matching, (win, v_in) )

    def test_modes(self):
        cell = TxlCell.build(G_REF/2, 2*G_REF, G_REF)
        prog = cell_set_mode(cell, Mode.PROGRAMMING)
        self.assertIs( prog.mode, Mode.PROGRAMMING )
        with self.assertRaises(ModeError):
            cell_window(prog)
        with self.assertRaises(ModeError):
            cell_evaluate(prog, 1.3, V_EN)
        with self.assertRaises(ModeError):
            programming_paths(cell)
        paths = programming_paths(prog)
        self.assertEqual( set(paths), {Which.M1, Which.M2} )
        self.assertEqual( paths[Which.M1].conductance, G_REF/2 )
        self.assertEqual( paths[Which.M2].conductance, 2*G_REF )
        self.assertIs( paths[Which.M1].kind, ElementKind.RRAM )
        self.assertEqual( cell_set_mode(prog, Mode.MATCHING), cell )

    def test_sixt2r(self):
        target = MatchWindow(1.2, 1.5)
        cell = compile_sixt2r(target)
        self.assertTrue( G_MIN <= cell.g_lo <= G_MAX )
        self.assertTrue( G_MIN <= cell.g_hi <= G_MAX )
        win = sixt2r_window(cell)
        self.assertAlmostEqual( win.v_low, 1.2, delta=1e-6 )
        self.assertAlmostEqual( win.v_high, 1.5, delta=1e-6 )
        self.assertIs( sixt2r_evaluate(cell, 1.35), Outcome.MATCH )
        self.assertIs( sixt2r_evaluate(cell, 1.0), Outcome.MISMATCH )
        self.assertIs( sixt2r_evaluate(cell, 1.6), Outcome.MISMATCH )
        with self.assertRaises(OutOfRange):
            sixt2r_evaluate(cell, 4.0)
        with self.assertRaises(Unachievable):
            compile_sixt2r(MatchWindow(0.5, 1.5))

    def test_sixt2r_paired_sweep(self):
        curve = design_curve()
        grid = (np.arange(3001)*1e-3).tolist()
        for target in (MatchWindow(1.2, 1.5), MatchWindow(1.1, 1.3), MatchWindow(1.45, 1.65)):
            g_m1, g_m2 = curve.conductance([target.v_low, target.v_high])
            win = cell_window(TxlCell.build(float(g_m1), float(g_m2), G_REF))
            sixt = compile_sixt2r(target)
            txl_match = [ win.contains(v) for v in grid ]
            sixt_match = [ sixt2r_evaluate(sixt, v) is Outcome.MATCH for v in grid ]
            self.assertAlmostEqual( sum(sixt_match), round((target.v_high - target.v_low)*1000) - 1, delta=2 )
            # the two cells disagree only within the compiled window's tolerance of a bound
            differ = [ v for v, a, b in zip(grid, txl_match, sixt_match) if a != b ]
            self.assertLessEqual( len(differ), 4, target )
            for v in differ:
                self.assertLess( min(abs(v - target.v_low), abs(v - target.v_high)), 2e-3, (target, v) )
