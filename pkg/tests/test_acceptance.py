"""Acceptance criteria, one check per criterion.

Each check prints a single ``[PASS]``/``[FAIL]`` line (visible with or
without ``-s``) and then asserts. Run standalone with
``python tests/test_acceptance.py`` for just the summary lines.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from clustersim import circuit as circ
from clustersim import cluster as cl
from clustersim import compiler as cp
from clustersim import groundstate as gs
from clustersim import linearsim as ls
from clustersim import statevec as sv
from clustersim.compiler import CZLayer, HZLayer, NormalFormCircuit

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def _emit(number, ok, title, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    capman = getattr(_emit, "capman", None)
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print(line)
    else:
        print(line)
    return line


@pytest.fixture(autouse=True)
def _uncaptured(request):
    _emit.capman = request.config.pluginmanager.getplugin("capturemanager")
    yield
    _emit.capman = None


# ---------------------------------------------------------------- criteria


def check_1():
    t = time.perf_counter()
    graphs = [cl.path_graph(n) for n in range(2, 9)]
    graphs += [cl.grid_graph(2, 3), cl.grid_graph(3, 3), cl.torus_graph(3, 3)]
    worst = max(cl.verify_stabilized(cl.prepare_cluster(g), cl.stabilizer_generators(g))[1] for g in graphs)
    dt = time.perf_counter() - t
    return worst < 1e-10 and dt < 5, "stabilization suite", f"max deviation {worst:.1e}, {dt:.2f}s"


def check_2():
    rng = np.random.default_rng(2)
    t = time.perf_counter()
    worst_f, worst_p = 1.0, 0.0
    for _ in range(100):
        psi, theta = sv.random_ket(rng), float(rng.uniform(-math.pi, math.pi))
        c = circ.Circuit(2, [circ.CZ(0, 1), circ.Measure(0, "m", sv.hz(theta))], [psi, "plus"])
        for m in (0, 1):
            tr = circ.simulate_circuit(c, forced=[m])
            out = sv.extract_qubits(tr.final_state, [1], {0: m})
            expect = np.linalg.matrix_power(sv.X, m) @ sv.H @ sv.rz(theta) @ psi
            worst_f = min(worst_f, sv.fidelity_up_to_phase(out, sv.StateVector(expect)))
            worst_p = max(worst_p, abs(tr.joint_probability - 0.5))
    dt = time.perf_counter() - t
    ok = worst_f >= 1 - 1e-10 and worst_p <= 1e-10 and dt < 1
    return ok, "one-bit teleportation", f"min fidelity {worst_f:.12f}, max |p-1/2| {worst_p:.1e}, {dt:.2f}s"


def _random_nf(rng, n_wires, n_layers):
    layers = []
    for _ in range(n_layers):
        if n_wires > 1 and rng.random() < 0.35:
            a, b = rng.choice(n_wires, 2, replace=False)
            layers.append(CZLayer(int(a), int(b)))
        else:
            layers.append(HZLayer(int(rng.integers(n_wires)), float(rng.uniform(-math.pi, math.pi))))
    return NormalFormCircuit(n_wires, layers)


def check_3():
    rng = np.random.default_rng(3)
    t = time.perf_counter()
    programs = []
    for k in range(1, 5):
        programs.append(NormalFormCircuit(1, [HZLayer(0, float(a)) for a in rng.uniform(-math.pi, math.pi, k)]))
    a1, b1, a2, b2 = (float(x) for x in rng.uniform(-math.pi, math.pi, 4))
    programs.append(NormalFormCircuit(2, [HZLayer(0, a1), HZLayer(1, b1), CZLayer(0, 1), HZLayer(0, a2), HZLayer(1, b2)]))
    programs += [_random_nf(rng, 3, int(rng.integers(1, 5))) for _ in range(10)]
    branches = failed = 0
    for nf in programs:
        report = cp.verify_compilation(nf, fidelity_tol=1e-9, probability_tol=1e-10)
        branches += len(report.branches)
        failed += len(report.branches) - report.n_passed
        if len(report.branches) != 2**report.n_measurements:
            failed += 1
    dt = time.perf_counter() - t
    return failed == 0 and dt < 30, "compiler equivalence", f"{branches - failed}/{branches} branches pass, {dt:.2f}s"


def check_4():
    a1, a2 = 0.83, -2.17
    prog = cp.compile(NormalFormCircuit(1, [HZLayer(0, a1), HZLayer(0, a2)]))
    base = sv.H @ sv.rz(a2) @ sv.H @ sv.rz(a1) @ sv.KET["plus"]
    worst = 1.0
    for m1 in (0, 1):
        for m2 in (0, 1):
            tr, _ = cp.run_compiled(prog, forced=[m1, m2])
            expect = np.linalg.matrix_power(sv.X, m2) @ np.linalg.matrix_power(sv.Z, m1) @ base
            worst = min(worst, sv.fidelity_up_to_phase(tr.output_state, sv.StateVector(expect)))
    return abs(worst - 1) <= 1e-10, "closed-form two-layer outputs", f"min fidelity over 4 branches {worst:.12f}"


def check_5():
    t = time.perf_counter()
    paths_ok = all(gs.analyze_graph(cl.path_graph(n)).qualifying == [] for n in range(3, 9))
    torus = gs.analyze_graph(cl.torus_graph(3, 3))
    grid = gs.analyze_graph(cl.grid_graph(3, 3))
    center_ok = 4 in grid.qualifying
    boundary = [v for v in (0, 1, 2, 3, 5, 6, 7, 8) if not grid.vertices[v].satisfies]
    g = cl.grid_graph(3, 3)
    witness_ok = any(
        b is not None and gs.syndrome(g, a) == gs.syndrome(g, b)
        for v in boundary
        for a, b in grid.vertices[v].witnesses
    )
    torus_ok = len(torus.qualifying) == 9
    dt = time.perf_counter() - t
    ok = paths_ok and torus_ok and center_ok and bool(boundary) and witness_ok and dt < 1
    detail = (
        f"paths 3..8 zero qualifying: {paths_ok}; 3x3 torus qualifying {len(torus.qualifying)}/9 (expected 9); "
        f"3x3 grid center qualifies: {center_ok}, boundary witness verified: {witness_ok}; {dt:.2f}s"
    )
    return ok, "ground-state analyzer", detail


def check_6():
    rng = np.random.default_rng(6)
    torus = cl.torus_graph(3, 3)
    residuals = [gs.verify_not_eigenstate(torus, gs.random_coefficients(torus, rng)) for _ in range(20)]
    grid = cl.grid_graph(2, 3)
    overlaps = [gs.ground_state_overlap(grid, gs.random_coefficients(grid, rng)) ** 2 for _ in range(20)]
    ok = min(residuals) > 1e-6 and max(overlaps) < 1 - 1e-4
    detail = (
        f"torus min residual {min(residuals):.3f}; 2x3 grid |<C|g>|^2 "
        f"min {min(overlaps):.4f} mean {np.mean(overlaps):.4f} max {max(overlaps):.4f}"
    )
    return ok, "eigenstate exclusion numerics", detail


def _adaptive_plan(rng, order):
    steps, done = [], []
    for q in order:
        if done:
            on = tuple(int(x) for x in rng.choice(done, min(2, len(done)), replace=False))
            table = {key: sv.random_unitary(2, rng) for key in ls._bit_tuples(len(on))}
            steps.append(ls.PlanStep(int(q), ls.AdaptiveBasis(on, table)))
        else:
            steps.append(ls.PlanStep(int(q), sv.random_unitary(2, rng)))
        done.append(int(q))
    return ls.MeasurementPlan(tuple(steps))


def check_7():
    rng = np.random.default_rng(7)
    t = time.perf_counter()
    worst, count = 0.0, 0
    for n in range(4, 11):
        for _ in range(50):
            prep = ls.random_preparation(n, rng)
            plans = [
                ls.MeasurementPlan(tuple(ls.PlanStep(q, sv.random_unitary(2, rng)) for q in range(n))),
                ls.MeasurementPlan(tuple(ls.PlanStep(q, sv.random_unitary(2, rng)) for q in range(n - 1, -1, -1))),
                ls.MeasurementPlan(tuple(ls.PlanStep(int(q), sv.random_unitary(2, rng)) for q in rng.permutation(n))),
                _adaptive_plan(rng, rng.permutation(n)),
            ]
            for k, plan in enumerate(plans):
                method = "forward" if k == 0 else "chain"
                tv = ls.total_variation(ls.joint_distribution(prep, plan, method), ls.joint_distribution(prep, plan, "oracle"))
                worst = max(worst, tv)
                count += 1
    dt = time.perf_counter() - t
    return worst < 1e-8 and dt < 60, "linear simulator equivalence", f"{count} plans, max TV {worst:.1e}, {dt:.1f}s"


def check_8():
    import tracemalloc

    rng = np.random.default_rng(8)
    n = 20000
    prep = ls.random_preparation(n, rng)
    plan = ls.MeasurementPlan.of(range(n), sv.H)
    timings, peaks = [], []
    for run in (
        lambda: ls.simulate_forward(prep, plan, 1),
        lambda: ls.simulate_any_order(prep, plan, 1),
        lambda: ls.simulate_any_order(prep, ls.MeasurementPlan.of(range(n - 1, -1, -1), sv.H), 1),
    ):
        tracemalloc.start()
        t = time.perf_counter()
        tr = run()
        timings.append(time.perf_counter() - t)
        peaks.append(tracemalloc.get_traced_memory()[1])
        tracemalloc.stop()
        assert len(tr.steps) == n
    # memory linear in n: a few hundred bytes per qubit, nothing like 2^n
    per_qubit = max(peaks) / n
    ok = max(timings) < 10 and per_qubit < 4096
    detail = (
        "forward {:.2f}s, any-order ascending {:.2f}s, descending {:.2f}s; peak {:.0f} B/qubit".format(*timings, per_qubit)
    )
    return ok, "linear scaling at n = 20000", detail


def check_9():
    rng = np.random.default_rng(9)
    ranks = [ls.linear_preparability_witness(ls.random_preparation(int(rng.integers(2, 11)), rng)).max_rank for _ in range(50)]
    grid = ls.linear_preparability_witness(cl.prepare_cluster(cl.grid_graph(3, 3)))
    ok = max(ranks) <= 2 and grid.max_rank >= 3
    return ok, "Schmidt witness", f"random preps max rank {max(ranks)}; 3x3 cluster row-major ranks {list(grid.ranks)}"


CLI_SUITE = [
    ["prepare", "--torus", "3x3", "--by-measurement"],
    ["stabilizers", "--grid", "3x3"],
    ["simulate-circuit", "--circuit", str(SAMPLES / "bell_teleport.qc")],
    ["compile", "--circuit", str(SAMPLES / "two_wire.qc")],
    ["run-pattern", "--pattern", str(SAMPLES / "two_wire.pattern.json")],
    ["verify-compile", "--circuit", str(SAMPLES / "two_wire.qc"), "--branches", "sample", "--samples", "8"],
    ["analyze-ground", "--grid", "3x3", "--hamiltonians", "4"],
    ["simulate-linear", "--prep", str(SAMPLES / "line6.prep.json"), "--plan", str(SAMPLES / "line6.plan.json"), "--oracle-check"],
]


def check_10():
    mismatches, runs = [], 0
    for argv in CLI_SUITE:
        for fmt in ("text", "json"):
            cmd = [sys.executable, "-m", "clustersim", *argv, "--seed", "4242", "--format", fmt]
            a = subprocess.run(cmd, capture_output=True)
            b = subprocess.run(cmd, capture_output=True)
            runs += 1
            if a.returncode != 0 or a.stdout != b.stdout:
                mismatches.append(f"{argv[0]}/{fmt}")
    ok = not mismatches
    return ok, "CLI determinism", f"{runs - len(mismatches)}/{runs} reports byte-identical" + (
        f"; differing: {mismatches}" if mismatches else ""
    )


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9, check_10]


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number):
    ok, title, detail = CHECKS[number - 1]()
    _emit(number, ok, title, detail)
    assert ok, detail


if __name__ == "__main__":
    results = []
    for i, check in enumerate(CHECKS, start=1):
        ok, title, detail = check()
        _emit(i, ok, title, detail)
        results.append(ok)
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
