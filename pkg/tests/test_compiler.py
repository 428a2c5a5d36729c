import itertools
import json
import math

import numpy as np
import pytest

from clustersim import circuit as circ
from clustersim import cluster as cl
from clustersim import compiler as cp
from clustersim import statevec as sv
from clustersim.compiler import CZLayer, HZLayer, NormalFormCircuit
from clustersim.errors import DomainError, ParseError

from conftest import op_on


def xp(a):
    return np.linalg.matrix_power(sv.X, a)


def zp(a):
    return np.linalg.matrix_power(sv.Z, a)


def two_wire(a1, b1, a2, b2):
    return NormalFormCircuit(2, [HZLayer(0, a1), HZLayer(1, b1), CZLayer(0, 1), HZLayer(0, a2), HZLayer(1, b2)])


def random_program(rng, n_wires, n_layers):
    layers = []
    for _ in range(n_layers):
        if n_wires > 1 and rng.random() < 0.35:
            a, b = rng.choice(n_wires, 2, replace=False)
            layers.append(CZLayer(int(a), int(b)))
        else:
            layers.append(HZLayer(int(rng.integers(n_wires)), float(rng.uniform(-math.pi, math.pi))))
    return NormalFormCircuit(n_wires, layers)


class TestFrameAlgebra:
    @pytest.mark.parametrize("a,b", list(itertools.product((0, 1), repeat=2)))
    def test_hadamard_swaps(self, a, b):
        assert np.allclose(sv.H @ xp(a) @ zp(b), zp(a) @ xp(b) @ sv.H)

    @pytest.mark.parametrize("a", [0, 1])
    def test_cz_spreads_x(self, a):
        lhs = sv.CZ @ op_on(2, {0: xp(a)})
        rhs = op_on(2, {0: xp(a), 1: zp(a)}) @ sv.CZ
        assert np.allclose(lhs, rhs)

    @pytest.mark.parametrize("alpha", [0.3, -1.7])
    def test_sign_flip(self, alpha):
        # Z_{-alpha} X = X Z_alpha
        assert np.allclose(sv.rz(-alpha) @ sv.X, sv.X @ sv.rz(alpha))


class TestCompile:
    def test_single_wire_two_layers(self):
        prog = cp.compile(NormalFormCircuit(1, [HZLayer(0, 0.2), HZLayer(0, 0.5)]))
        assert prog.graph == cl.path_graph(3)
        s1, s2 = prog.pattern.steps
        assert (s1.vertex, s1.deps) == (0, frozenset())
        assert (s2.vertex, s2.deps) == (1, frozenset({0}))
        assert prog.wire_outputs == (2,)
        assert prog.frame.x_sets == (frozenset({1}),)
        assert prog.frame.z_sets == (frozenset({0}),)

    def test_two_wire_graph(self):
        prog = cp.compile(two_wire(0.1, 0.2, 0.3, 0.4))
        assert prog.graph.sorted_edges() == [(0, 2), (1, 3), (2, 3), (2, 4), (3, 5)]
        assert [s.time for s in prog.pattern.steps] == [1, 1, 2, 2]
        assert prog.wire_outputs == (4, 5)
        # vertical edge between columns 1 of both wires
        assert prog.layout[2] == (0, 1) and prog.layout[3] == (1, 1)

    def test_empty(self):
        prog = cp.compile(NormalFormCircuit(1, []))
        assert prog.graph == cl.path_graph(1)
        assert prog.pattern.steps == ()
        _, out = cp.run_compiled(prog, forced=[])
        assert np.allclose(out.amplitudes, sv.KET["plus"])

    def test_deps_equal_x_set(self, rng):
        # independent replay of the frame rules (no alignment, so vertex ids
        # follow creation order)
        for _ in range(20):
            nf = random_program(rng, 3, 7)
            prog = cp.compile(nf, align=False)
            x = [frozenset() for _ in range(3)]
            z = [frozenset() for _ in range(3)]
            current = [0, 1, 2]
            nxt = 3
            expected = {}
            for layer in nf.layers:
                if isinstance(layer, HZLayer):
                    w, v = layer.wire, current[layer.wire]
                    expected[v] = x[w]
                    x[w], z[w] = z[w] ^ {v}, x[w]
                    current[w], nxt = nxt, nxt + 1
                else:
                    a, b = layer.a, layer.b
                    z[a], z[b] = z[a] ^ x[b], z[b] ^ x[a]
            assert {s.vertex: s.deps for s in prog.pattern.steps} == expected
            assert prog.frame.x_sets == tuple(x) and prog.frame.z_sets == tuple(z)
            assert prog.wire_outputs == tuple(current)

    def test_invalid(self):
        for nf in (
            NormalFormCircuit(1, [HZLayer(1, 0.0)]),
            NormalFormCircuit(2, [CZLayer(0, 0)]),
            NormalFormCircuit(1, [HZLayer(0, float("inf"))]),
            NormalFormCircuit(0, []),
        ):
            with pytest.raises(DomainError):
                cp.compile(nf)

    def test_alignment_padding(self):
        nf = NormalFormCircuit(
            2, [HZLayer(0, 0.3), HZLayer(0, 0.4), HZLayer(0, 0.5), CZLayer(0, 1), HZLayer(1, 0.6)]
        )
        prog = cp.compile(nf)
        cz = [e for e in prog.graph.sorted_edges() if prog.layout[e[0]][0] != prog.layout[e[1]][0]]
        assert len(cz) == 1
        u, v = cz[0]
        # odd gap of 3 cannot be padded, so the edge stays diagonal
        assert prog.layout[u][1] != prog.layout[v][1]
        nf2 = NormalFormCircuit(2, [HZLayer(0, 0.3), HZLayer(0, 0.4), CZLayer(0, 1), HZLayer(1, 0.6)])
        prog2 = cp.compile(nf2)
        (u, v), = [e for e in prog2.graph.sorted_edges() if prog2.layout[e[0]][0] != prog2.layout[e[1]][0]]
        assert prog2.layout[u][1] == prog2.layout[v][1]
        assert cp.verify_compilation(nf2, prog2).passed
        assert cp.verify_compilation(nf2, cp.compile(nf2, align=False)).passed

    def test_repeated_cz_cancels_edge(self):
        nf = NormalFormCircuit(2, [HZLayer(0, 0.3), CZLayer(0, 1), CZLayer(1, 0), HZLayer(1, 0.2)])
        prog = cp.compile(nf)
        assert cp.verify_compilation(nf, prog).passed


class TestRunCompiled:
    def test_zero_branch_needs_no_correction(self):
        a1, a2 = 0.7, -0.4
        prog = cp.compile(NormalFormCircuit(1, [HZLayer(0, a1), HZLayer(0, a2)]))
        tr, _ = cp.run_compiled(prog, forced=[0, 0])
        expect = sv.H @ sv.rz(a2) @ sv.H @ sv.rz(a1) @ sv.KET["plus"]
        assert sv.fidelity_up_to_phase(tr.output_state, sv.StateVector(expect)) > 1 - 1e-12

    def test_one_one_branch(self):
        a1, a2 = 0.7, -0.4
        nf = NormalFormCircuit(1, [HZLayer(0, a1), HZLayer(0, a2)])
        prog = cp.compile(nf)
        tr, corrected = cp.run_compiled(prog, forced=[1, 1])
        base = sv.H @ sv.rz(a2) @ sv.H @ sv.rz(a1) @ sv.KET["plus"]
        assert sv.fidelity_up_to_phase(tr.output_state, sv.StateVector(sv.X @ sv.Z @ base)) > 1 - 1e-12
        assert sv.fidelity_up_to_phase(corrected, nf.simulate()) > 1 - 1e-12

    def test_two_wire_all_branches(self, rng):
        nf = two_wire(*rng.uniform(-math.pi, math.pi, 4))
        report = cp.verify_compilation(nf)
        assert len(report.branches) == 16 and report.passed

    def test_random_programs(self, rng):
        for _ in range(15):
            nf = random_program(rng, int(rng.integers(1, 4)), int(rng.integers(0, 6)))
            report = cp.verify_compilation(nf)
            assert report.passed, nf
            assert len(report.branches) == 2**report.n_measurements
            for b in report.branches:
                assert abs(b.probability - 2.0 ** -report.n_measurements) < 1e-10

    def test_per_step_uniformity(self, rng):
        nf = random_program(rng, 3, 5)
        prog = cp.compile(nf)
        for tr in cl.enumerate_pattern_branches(prog.graph, prog.pattern):
            assert all(abs(r.probability - 0.5) < 1e-10 for r in tr.records)

    def test_sampled_verification(self, rng):
        nf = random_program(rng, 2, 5)
        report = cp.verify_compilation(nf, samples=10, seed=5)
        assert len(report.branches) == 10 and report.passed

    def test_failure_detected(self):
        nf = two_wire(0.1, 0.2, 0.3, 0.4)
        prog = cp.compile(nf)
        broken = cp.CompiledProgram(
            prog.graph, prog.pattern, cp.ByproductFrame(prog.frame.z_sets, prog.frame.x_sets), prog.wire_outputs
        )
        assert not cp.verify_compilation(nf, broken).passed


class TestLift:
    def test_normal_form_is_identity(self):
        c = circ.parse_circuit("qubits 2\ninit 0 plus\ninit 1 plus\nhz 0 0.3\ncz 0 1\nhz 1 0.5\nh 0\n")
        nf = cp.lift_general_circuit(c)
        assert nf.layers.index(CZLayer(0, 1)) == 1
        assert [layer for layer in nf.layers if getattr(layer, "wire", None) == 0] == [HZLayer(0, 0.3), HZLayer(0, 0.0)]
        assert [layer for layer in nf.layers if getattr(layer, "wire", None) == 1] == [HZLayer(1, 0.5)]

    def test_rx(self):
        c = circ.Circuit(1, [circ.RX(0, 0.3)], ["plus"])
        nf = cp.lift_general_circuit(c)
        assert len(nf.layers) == 4 and all(isinstance(layer, HZLayer) for layer in nf.layers)
        direct = circ.simulate_circuit(c, forced=[]).final_state
        assert sv.fidelity_up_to_phase(direct, nf.simulate()) > 1 - 1e-10
        assert cp.verify_compilation(nf).passed

    def test_cnot_on_basis_inputs(self):
        c = circ.Circuit(2, [circ.CNOT(0, 1)], ["plus", "plus"])
        nf = cp.lift_general_circuit(c)
        assert any(isinstance(layer, CZLayer) for layer in nf.layers)
        u_nf = circ.circuit_unitary(nf.to_circuit())
        cnot = op_on(2, {0: np.diag([1, 0])}) + op_on(2, {0: np.diag([0, 1]), 1: sv.X})
        for k in range(4):
            e = np.zeros(4, dtype=complex)
            e[k] = 1
            assert abs(np.vdot(cnot @ e, u_nf @ e)) > 1 - 1e-10
        # one global phase for every input
        assert abs(abs(np.trace(u_nf.conj().T @ cnot)) / 4 - 1) < 1e-10

    def test_random_circuits(self, rng):
        kinds = [circ.H, circ.X, circ.Y, circ.Z]
        for _ in range(10):
            n = int(rng.integers(1, 5))
            ops = []
            for _ in range(6):
                r = rng.random()
                if n > 1 and r < 0.3:
                    a, b = (int(x) for x in rng.choice(n, 2, replace=False))
                    ops.append(circ.CNOT(a, b) if rng.random() < 0.5 else circ.CZ(a, b))
                elif r < 0.6:
                    ops.append(kinds[int(rng.integers(4))](int(rng.integers(n))))
                else:
                    rot = [circ.RX, circ.RY, circ.RZ][int(rng.integers(3))]
                    ops.append(rot(int(rng.integers(n)), float(rng.uniform(-3, 3))))
            c = circ.Circuit(n, ops, ["plus"] * n)
            nf = cp.lift_general_circuit(c)
            u1 = circ.circuit_unitary(c)
            u2 = circ.circuit_unitary(nf.to_circuit())
            assert abs(abs(np.trace(u1.conj().T @ u2)) / 2**n - 1) < 1e-10

    def test_rejects_measurement(self):
        with pytest.raises(DomainError):
            cp.lift_general_circuit(circ.Circuit(1, [circ.Measure(0, "a")], ["plus"]))

    def test_rejects_zero_inputs(self):
        with pytest.raises(DomainError):
            cp.lift_general_circuit(circ.Circuit(1, [circ.H(0)]))


class TestProgramJson:
    def test_roundtrip(self, rng):
        nf = random_program(rng, 3, 6)
        prog = cp.compile(nf)
        again = cp.program_from_dict(json.loads(json.dumps(cp.program_to_dict(prog))))
        assert again.graph == prog.graph
        assert again.pattern == prog.pattern
        assert again.frame == prog.frame
        assert again.wire_outputs == prog.wire_outputs
        assert again.layout == prog.layout
        assert cp.verify_compilation(nf, again).passed

    def test_frame_must_match_outputs(self):
        doc = cp.program_to_dict(cp.compile(two_wire(0.1, 0.2, 0.3, 0.4)))
        doc["frame"]["wires"][0]["output"] = 5
        with pytest.raises(ParseError):
            cp.program_from_dict(doc)

    def test_frame_unknown_vertex(self):
        doc = cp.program_to_dict(cp.compile(two_wire(0.1, 0.2, 0.3, 0.4)))
        doc["frame"]["wires"][0]["x"] = [5]
        with pytest.raises(ParseError):
            cp.program_from_dict(doc)
