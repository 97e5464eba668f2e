"""Tests for ``txlacam.acam``.

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
import random
import unittest
import itertools
import numpy as np
from txlacam.error import AddressOutOfRange, ImmutableDevice, LengthMismatch, ModeError, OutOfRange, ParseError
from txlacam.devices import PMOS, G_MIN, G_MAX, ElementKind
from txlacam.cell import I_LIM, Fidelity, MatchWindow, Mode, Which, v_en_for_current, cell_window
from txlacam.acam import (CELL_DENSITY_PER_MM2, DIE_AREA_MM2, PROTOTYPE_CELLS, ArrayConfig, AcamArray, DeviceAddress,
                          SipoRegister, PisoRegister, ProgrammingSession,
                          address_decode, address_encode, array_search, program_device, enter_programming_mode,
                          exit_programming_mode, sipo_load, piso_load_and_shift, control_fields, encode_control,
                          decode_control)
from txlacam.compiler import Template, compile_templates, design_curve, program_and_verify

V_EN = v_en_for_current(PMOS, 3.0, I_LIM)

def programmed(templates :list[Template], config :ArrayConfig = ArrayConfig()) -> AcamArray:
    array = AcamArray.create(config)
    cmap = compile_templates(templates, rram_rows=config.rram_rows)
    array, _report = program_and_verify(enter_programming_mode(array), cmap)
    return exit_programming_mode(array)

class TestAcam(unittest.TestCase):

    def setUp(self):
        self.maxDiff = None  # pylint: disable=invalid-name

    def test_config(self):
        cfg = ArrayConfig()
        self.assertEqual( cfg.rows, 48 )
        self.assertEqual( cfg.be_lines, 64 )
        self.assertEqual( cfg.cells, PROTOTYPE_CELLS )
        # 1536 cells at 3135 cells/mm² need about half a square millimetre of the 3.8 mm² die
        self.assertAlmostEqual( cfg.area_mm2, 1536/3135 )
        self.assertLess( cfg.area_mm2, DIE_AREA_MM2 )
        self.assertAlmostEqual( ArrayConfig(columns=8, rram_rows=2, poly_rows=2).area_mm2, 32/CELL_DENSITY_PER_MM2 )
        with self.assertRaises(OutOfRange):
            ArrayConfig(columns=0)
        with self.assertRaises(OutOfRange):
            ArrayConfig(rram_rows=0, poly_rows=0)

    def test_address_decode(self):
        self.assertEqual( address_decode(DeviceAddress(0, 0, Which.M1)), (0, 0) )
        self.assertEqual( address_decode(DeviceAddress(0, 0, Which.M2)), (0, 1) )
        self.assertEqual( address_decode(DeviceAddress(31, 31, Which.M2)), (31, 63) )
        seen = set()
        for row, col, which in itertools.product(range(32), range(32), Which):
            addr = DeviceAddress(row, col, which)
            lines = address_decode(addr)
            seen.add(lines)
            self.assertEqual( address_encode(*lines), addr )
        self.assertEqual( len(seen), 2048 )
        for bad in (DeviceAddress(48, 0, Which.M1), DeviceAddress(0, 32, Which.M1), DeviceAddress(-1, 0, Which.M2)):
            with self.assertRaises(AddressOutOfRange):
                address_decode(bad)
        with self.assertRaises(AddressOutOfRange):
            address_encode(0, 64)

    def test_create(self):
        array = AcamArray.create()
        self.assertAlmostEqual( array.g_ref, 20e-6 )
        self.assertIs( array.kind(31), ElementKind.RRAM )
        self.assertIs( array.kind(32), ElementKind.POLYSILICON )
        self.assertIs( array.element(DeviceAddress(40, 0, Which.M1)).kind, ElementKind.POLYSILICON )
        self.assertTrue( array.window(0, 0).empty )
        self.assertTrue( array.window(40, 5).empty )
        with self.assertRaises(ValueError):
            array.g_m1[0, 0] = 1.0
        with self.assertRaises(OutOfRange):
            AcamArray(ArrayConfig(), np.full((48, 32), 1e-3), np.full((48, 32), 20e-6))
        with self.assertRaises(LengthMismatch):
            AcamArray(ArrayConfig(), np.full((32, 32), 20e-6), np.full((32, 32), 20e-6))
        poly = AcamArray.create(poly_g_m1=10e-6, poly_g_m2=40e-6)
        self.assertFalse( poly.window(40, 0).empty )
        self.assertTrue( poly.window(0, 0).empty )

    def test_windows_match_cells(self):
        rng = np.random.default_rng(5)
        g = np.exp(rng.uniform(np.log(G_MIN), np.log(G_MAX), (2, 48, 32)))
        g[:, 32:] = 20e-6
        array = AcamArray(ArrayConfig(), g[0], g[1])
        for row, col in ((0, 0), (7, 19), (31, 31)):
            expect = cell_window(array.cell(row, col))
            win = array.window(row, col)
            self.assertAlmostEqual( win.v_low, expect.v_low, delta=1e-3 )
            self.assertAlmostEqual( win.v_high, expect.v_high, delta=1e-3 )

    def test_fresh_search(self):
        result = array_search(AcamArray.create(), [1.3]*32, V_EN)
        self.assertEqual( result.rows, 48 )
        self.assertEqual( result.counts.tolist(), [0]*48 )
        self.assertFalse( np.any(result.hits) )
        self.assertEqual( result.hit_word, '0'*48 )
        self.assertEqual( result.sa_levels.tolist(), [5.0]*48 )
        self.assertAlmostEqual( result.i_lim, I_LIM )
        self.assertIsNone( result.traces )

    def test_search_construction(self):
        lo, hi = design_curve().achievable
        rng = np.random.default_rng(11)
        query = rng.uniform(lo + 0.2, hi - 0.2, 32)
        inside = tuple(MatchWindow(q - 0.06, q + 0.06) for q in query)
        below = tuple(MatchWindow(q - 0.15, q - 0.05) for q in query)
        half = tuple(inside[i] if i%2 else below[i] for i in range(32))
        array = programmed([Template(3, inside), Template(4, below), Template(5, half), Template(6, inside[:14] + below[14:]),
                            Template(7, inside[:13] + below[13:])])
        result = array_search(array, query.tolist(), V_EN, traces=True)
        expect = [0]*48
        expect[3], expect[5], expect[6], expect[7] = 32, 16, 14, 13
        self.assertEqual( result.counts.tolist(), expect )
        self.assertEqual( [ r for r in range(48) if result.hits[r] ], [3, 5, 6] )
        self.assertEqual( result.sa_levels[3], 0.0 )
        self.assertEqual( result.hit_word, '000101100' + '0'*39 )
        self.assertEqual( result.traces.shape, (501, 48) )
        self.assertEqual( result.times.shape, (501,) )
        self.assertTrue( np.allclose(result.traces[-1], result.v_ml) )
        self.assertAlmostEqual( result.v_ml[6], result.levels[14] )
        with self.assertRaises(LengthMismatch):
            array_search(array, query.tolist()[:31], V_EN)
        with self.assertRaises(OutOfRange):
            array_search(array, [3.5]*32, V_EN)
        with self.assertRaises(ModeError):
            array_search(enter_programming_mode(array), query.tolist(), V_EN)

    def test_search_vs_brute_force(self):
        rng = np.random.default_rng(17)
        g = np.exp(rng.uniform(np.log(G_MIN), np.log(G_MAX), (2, 48, 32)))
        g[:, 32:] = 20e-6
        array = AcamArray(ArrayConfig(), g[0], g[1])
        lo, hi = design_curve().achievable
        # every cell's window solved on its own, bypassing the array's threshold table
        oracle = [ [ cell_window(array.cell(row, col)) for col in range(32) ] for row in range(48) ]
        bounds = np.array([ [ (w.v_low, w.v_high) for w in line ] for line in oracle ])
        def query_value(col :int) -> float:
            while True:
                q = float(rng.uniform(lo, hi))
                if np.min(np.abs(bounds[:, col, :] - q)) >= 1e-3:
                    return q
        for _ in range(100):
            query = [ query_value(col) for col in range(32) ]
            result = array_search(array, query, V_EN)
            expect = np.array([ [ w.contains(q) for w, q in zip(line, query) ] for line in oracle ])
            self.assertEqual( result.matching.tolist(), expect.tolist() )
            self.assertEqual( result.counts.tolist(), expect.sum(axis=1).tolist() )
            for row in range(48):
                self.assertEqual( bool(result.hits[row]), float(result.levels[result.counts[row]]) > 1.4 )

    def test_row_permutation(self):
        rng = np.random.default_rng(23)
        g = np.exp(rng.uniform(np.log(G_MIN), np.log(G_MAX), (2, 48, 32)))
        g[:, 32:] = 20e-6
        perm = np.concatenate([rng.permutation(32), np.arange(32, 48)])
        array = AcamArray(ArrayConfig(), g[0].copy(), g[1].copy())
        shuffled = AcamArray(ArrayConfig(), g[0][perm], g[1][perm])
        query = rng.uniform(1.1, 1.6, 32).tolist()
        a = array_search(array, query, V_EN)
        b = array_search(shuffled, query, V_EN)
        self.assertEqual( a.counts[perm].tolist(), b.counts.tolist() )
        self.assertEqual( a.hits[perm].tolist(), b.hits.tolist() )

    def test_circuit_fidelity(self):
        cfg = ArrayConfig(columns=4, rram_rows=3, poly_rows=0)
        g_ref = 20e-6
        lo = float(design_curve().threshold(g_ref/2))
        hi = float(design_curve().threshold(2*g_ref))
        g_m1 = np.array([[g_ref/2]*4, [g_ref/2, g_ref/2, 2*g_ref, 2*g_ref], [2*g_ref]*4])
        g_m2 = np.array([[2*g_ref]*4, [2*g_ref, 2*g_ref, g_ref/2, g_ref/2], [g_ref/2]*4])
        array = AcamArray(cfg, g_m1, g_m2)
        query = [(lo + hi)/2]*4
        beh = array_search(array, query, V_EN, fidelity=Fidelity.BEHAVIORAL)
        cir = array_search(array, query, V_EN, fidelity=Fidelity.CIRCUIT)
        self.assertEqual( beh.counts.tolist(), [4, 2, 0] )
        self.assertEqual( cir.counts.tolist(), [4, 2, 0] )
        self.assertEqual( cir.matching.tolist(), beh.matching.tolist() )
        self.assertIs( cir.fidelity, Fidelity.CIRCUIT )
        for row in range(2):
            self.assertAlmostEqual( cir.v_ml[row], beh.v_ml[row], delta=beh.v_ml[row]*0.05 )
        self.assertEqual( cir.v_ml[2], 0.0 )

    def test_program_device(self):
        array = enter_programming_mode(AcamArray.create())
        addr = DeviceAddress(5, 7, Which.M1)
        new = program_device(array, addr, 80e-6, 1)
        self.assertEqual( new.conductance(addr), 80e-6 )
        changed = (new.g_m1 != array.g_m1)
        self.assertEqual( int(changed.sum()), 1 )
        self.assertTrue( changed[5, 7] )
        self.assertTrue( np.array_equal(new.g_m2, array.g_m2) )
        self.assertEqual( array.conductance(addr), 20e-6 )
        with self.assertRaises(ImmutableDevice):
            program_device(array, DeviceAddress(40, 0, Which.M1), 80e-6, 1)
        with self.assertRaises(AddressOutOfRange):
            program_device(array, DeviceAddress(0, 40, Which.M1), 80e-6, 1)
        with self.assertRaises(ModeError):
            program_device(exit_programming_mode(array), addr, 80e-6, 1)
        with self.assertRaises(OutOfRange):
            program_device(array, addr, 1.0, 1)

    def test_program_all(self):
        array = enter_programming_mode(AcamArray.create())
        targets = np.geomspace(G_MIN, G_MAX, 2048).reshape(32, 32, 2)
        for row, col in itertools.product(range(32), range(32)):
            array = program_device(array, DeviceAddress(row, col, Which.M1), targets[row, col, 0], 0)
            array = program_device(array, DeviceAddress(row, col, Which.M2), targets[row, col, 1], 0)
        self.assertTrue( np.array_equal(array.g_m1[:32], targets[:, :, 0]) )
        self.assertTrue( np.array_equal(array.g_m2[:32], targets[:, :, 1]) )
        self.assertTrue( np.all(array.g_m1[32:] == 20e-6) )
        # the mode round trip leaves conductances alone
        back = enter_programming_mode(exit_programming_mode(array))
        self.assertTrue( np.array_equal(back.g_m1, array.g_m1) )

    def test_session(self):
        array = AcamArray.create()
        with ProgrammingSession(array) as session:
            self.assertIs( session.array.mode, Mode.PROGRAMMING )
            self.assertEqual( session.sipo.width, 13 )
            self.assertEqual( session.write(DeviceAddress(9, 30, Which.M2), 55e-6, 3), 55e-6 )
            self.assertEqual( decode_control(session.sipo.outputs), (Mode.PROGRAMMING, 9, 61) )
            self.assertEqual( session.read(DeviceAddress(9, 30, Which.M2)), 55e-6 )
            self.assertEqual( session.writes, 1 )
        self.assertIs( session.array.mode, Mode.MATCHING )
        self.assertEqual( session.array.conductance(DeviceAddress(9, 30, Which.M2)), 55e-6 )
        self.assertEqual( array.conductance(DeviceAddress(9, 30, Which.M2)), 20e-6 )
        with self.assertRaises(ModeError):
            with ProgrammingSession(enter_programming_mode(array)):
                pass  # pragma: no cover
        with self.assertRaises(ModeError):
            ProgrammingSession(array).write(DeviceAddress(0, 0, Which.M1), 55e-6, 3)

    def test_control_word(self):
        self.assertEqual( control_fields(), (6, 6) )
        word = encode_control(Mode.PROGRAMMING, 5, 14)
        self.assertEqual( word, '1000101001110' )
        self.assertEqual( decode_control([int(b) for b in word]), (Mode.PROGRAMMING, 5, 14) )
        self.assertEqual( decode_control([int(b) for b in encode_control(Mode.MATCHING, 47, 63)]), (Mode.MATCHING, 47, 63) )
        with self.assertRaises(AddressOutOfRange):
            encode_control(Mode.PROGRAMMING, 48, 0)
        with self.assertRaises(LengthMismatch):
            decode_control([0]*12)

    def test_sipo(self):
        reg = SipoRegister(8)
        self.assertEqual( sipo_load(reg, '00000000').outputs, (0,)*8 )
        self.assertEqual( sipo_load(reg, '10110001').outputs, (1, 0, 1, 1, 0, 0, 0, 1) )
        rnd = random.Random(1)
        for _ in range(200):
            bits = tuple(rnd.randint(0, 1) for _ in range(13))
            self.assertEqual( sipo_load(SipoRegister(13), bits).outputs, bits )
        with self.assertRaises(LengthMismatch):
            sipo_load(reg, '101')
        with self.assertRaises(ParseError):
            sipo_load(reg, '1011000x')

    def test_piso(self):
        reg = PisoRegister(48)
        rnd = random.Random(2)
        for _ in range(1000):
            word = ''.join(rnd.choice('01') for _ in range(48))
            self.assertEqual( piso_load_and_shift(reg, word), word )
        bit, after = PisoRegister(3).load('100').shift()
        self.assertEqual( bit, 1 )
        self.assertEqual( after.stages, (0, 0, 0) )
        with self.assertRaises(LengthMismatch):
            piso_load_and_shift(reg, '1'*47)
