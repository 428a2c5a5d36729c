"""Command-line front end: ``clustersim <command> [options]``.

Every report starts with a header naming the command and seed. Output is a
pure function of argv and the input files, so repeated runs are
byte-identical. Exit codes: 0 success, 1 domain error, 2 parse or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from . import circuit as circ
from . import cluster, compiler, groundstate, linearsim
from . import statevec as sv
from .errors import DomainError, ImpossibleBranchError, ParseError

DEFAULT_SEED = 20240607
MAX_SEED = 2**64 - 1


# ------------------------------------------------------------ formatting


def _num(x: float, digits: int = 12) -> str:
    return f"{round(float(x), digits) + 0.0:.{digits}f}"


def _amp(z: complex) -> str:
    re_, im = round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0
    return f"{re_:+.12f}{im:+.12f}j"


def _amps_json(state: sv.StateVector) -> list[list[float]]:
    return [[round(z.real, 12) + 0.0, round(z.imag, 12) + 0.0] for z in state.amplitudes]


def _state_lines(state: sv.StateVector, tol: float = 1e-12) -> list[str]:
    n = state.n_qubits
    out = []
    for i, z in enumerate(state.amplitudes):
        if abs(z) > tol:
            bits = "".join(str((i >> q) & 1) for q in range(n))  # qubit 0 first
            out.append(f"  |{bits}> {_amp(z)}")
    return out


# --------------------------------------------------------------- inputs


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _dims(text: str) -> tuple[int, int]:
    try:
        r, c = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}") from None
    return r, c


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _graph_from(args) -> cluster.Graph:
    if args.graph is not None:
        return cluster.parse_graph(_read(args.graph))
    if args.path is not None:
        return cluster.path_graph(args.path)
    if args.grid is not None:
        return cluster.grid_graph(*args.grid)
    return cluster.torus_graph(*args.torus)


def _graph_label(args) -> str:
    if args.graph is not None:
        return f"file {args.graph}"
    if args.path is not None:
        return f"path {args.path}"
    if args.grid is not None:
        return "grid {}x{}".format(*args.grid)
    return "torus {}x{}".format(*args.torus)


def _normal_form(path: str) -> compiler.NormalFormCircuit:
    return compiler.lift_general_circuit(circ.parse_circuit(_read(path)))


def _load_json(path: str):
    return linearsim.load_json(_read(path))


# -------------------------------------------------------------- commands


def cmd_prepare(args) -> tuple[list[str], dict]:
    graph = _graph_from(args)
    if args.by_measurement:
        prep = cluster.prepare_cluster_by_measurement(graph, args.seed)
        state = prep.corrected_state()
        extra = {"eigenvalues": prep.eigenvalues, "correction": prep.correction.letters}
    else:
        state = cluster.prepare_cluster(graph)
        extra = {}
    ok, dev = cluster.verify_stabilized(state, cluster.stabilizer_generators(graph))
    lines = [f"graph: {_graph_label(args)} ({graph.n_vertices} vertices, {len(graph.edges)} edges)"]
    if extra:
        lines.append("eigenvalues: " + " ".join(f"{e:+d}" for e in extra["eigenvalues"]))
        lines.append(f"correction: {extra['correction']}")
    lines.append(f"stabilized: {'yes' if ok else 'no'} (max deviation {dev:.3e})")
    if args.amplitudes:
        lines.append("amplitudes (qubit 0 first):")
        lines += _state_lines(state)
    data = {
        "graph": {"vertices": graph.n_vertices, "edges": [list(e) for e in graph.sorted_edges()]},
        "stabilized": ok,
        "max_deviation": float(dev),
        **extra,
    }
    if args.amplitudes:
        data["amplitudes"] = _amps_json(state)
    return lines, data


def cmd_stabilizers(args) -> tuple[list[str], dict]:
    graph = _graph_from(args)
    gens = cluster.stabilizer_generators(graph)
    state = cluster.prepare_cluster(graph)
    lines, rows = [], []
    for v, g in enumerate(gens):
        dev = float(np.linalg.norm(g.apply(state).amplitudes - state.amplitudes))
        lines.append(f"S_{v} = {g.letters}  deviation {dev:.3e}")
        rows.append({"vertex": v, "letters": g.letters, "deviation": dev})
    return lines, {"generators": rows}


def cmd_simulate_circuit(args) -> tuple[list[str], dict]:
    circuit = circ.parse_circuit(_read(args.circuit))
    k = len(circuit.measure_ops())
    if args.branches == "all":
        if k > linearsim.MAX_ENUMERATION_STEPS:
            raise DomainError(f"--branches all is limited to {linearsim.MAX_ENUMERATION_STEPS} measurements")
        runs = []
        for bits in circ.iter_branches(k):
            try:
                runs.append(circ.simulate_circuit(circuit, forced=bits))
            except ImpossibleBranchError:
                continue
    else:
        runs = [circ.simulate_circuit(circuit, args.seed)]
    lines, branches = [], []
    for tr in runs:
        label = " ".join(f"{rid}={b}" for rid, b, _ in tr.outcomes) or "(no measurements)"
        lines.append(f"branch {label} probability {_num(tr.joint_probability)}")
        lines += _state_lines(tr.final_state)
        branches.append(
            {
                "outcomes": [{"id": rid, "bit": b, "probability": round(p, 12)} for rid, b, p in tr.outcomes],
                "probability": round(tr.joint_probability, 12),
                "amplitudes": _amps_json(tr.final_state),
            }
        )
    return lines, {"branches": branches}


def cmd_compile(args) -> tuple[list[str], dict]:
    nf = _normal_form(args.circuit)
    program = compiler.compile(nf)
    doc = compiler.program_to_dict(program)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise ParseError(f"cannot write {args.output}: {exc.strerror}") from None
    lines = [
        f"wires: {nf.n_wires}  layers: {len(nf.layers)}",
        f"cluster: {program.graph.n_vertices} vertices, {len(program.graph.edges)} edges",
        "edges: " + " ".join(f"{u}-{v}" for u, v in program.graph.sorted_edges()),
    ]
    for s in program.pattern.steps:
        deps = ",".join(map(str, sorted(s.deps))) or "-"
        lines.append(f"t={s.time} measure {s.vertex} alpha={_num(s.alpha)} sign-from={deps}")
    for w in range(program.n_wires):
        xs = ",".join(map(str, sorted(program.frame.x_sets[w]))) or "-"
        zs = ",".join(map(str, sorted(program.frame.z_sets[w]))) or "-"
        lines.append(f"wire {w} -> vertex {program.wire_outputs[w]}  X^[{xs}] Z^[{zs}]")
    return lines, doc


def cmd_run_pattern(args) -> tuple[list[str], dict]:
    doc = _load_json(args.pattern)
    if not isinstance(doc, dict):
        raise ParseError("pattern document must be a JSON object")
    program = compiler.program_from_dict(doc) if "frame" in doc else None
    graph, pattern = cluster.pattern_from_dict(doc)
    if args.branches == "all":
        if len(pattern.steps) > linearsim.MAX_ENUMERATION_STEPS:
            raise DomainError(f"--branches all is limited to {linearsim.MAX_ENUMERATION_STEPS} measurements")
        runs = list(cluster.enumerate_pattern_branches(graph, pattern))
    else:
        runs = [cluster.execute_pattern(graph, pattern, args.seed)]
    lines, branches = [], []
    for tr in runs:
        label = " ".join(f"{r.vertex}={r.outcome}" for r in tr.records) or "(none)"
        lines.append(f"branch {label} probability {_num(tr.joint_probability)}")
        entry = {
            "records": [
                {"vertex": r.vertex, "outcome": r.outcome, "sign": r.sign, "probability": round(r.probability, 12)}
                for r in tr.records
            ],
            "probability": round(tr.joint_probability, 12),
        }
        out = tr.output_state
        if program is not None:
            out = compiler.correct_output(program, tr)
            lines.append("  corrected output (wire 0 first):")
        elif out is not None:
            lines.append("  output (output vertex order):")
        if out is not None:
            lines += _state_lines(out)
            entry["output"] = _amps_json(out)
        branches.append(entry)
    return lines, {"corrected": program is not None, "branches": branches}


def cmd_verify_compile(args) -> tuple[list[str], dict]:
    nf = _normal_form(args.circuit)
    samples = None if args.branches == "all" else args.samples
    report = compiler.verify_compilation(nf, samples=samples, seed=args.seed)
    lines = []
    for b in report.branches:
        status = "pass" if report.branch_ok(b) else "FAIL"
        bits = "".join(map(str, b.bits)) or "-"
        lines.append(f"branch {bits}: fidelity {_num(b.fidelity)} probability {_num(b.probability)} {status}")
    total = len(report.branches)
    lines.append(f"{report.n_passed}/{total} branches pass")
    data = {
        "measurements": report.n_measurements,
        "branches": [
            {
                "bits": list(b.bits),
                "fidelity": round(b.fidelity, 12),
                "probability": round(b.probability, 12),
                "pass": report.branch_ok(b),
            }
            for b in report.branches
        ],
        "passed": report.n_passed,
        "total": total,
    }
    return lines, data, 0 if report.passed else 1


def cmd_analyze_ground(args) -> tuple[list[str], dict]:
    graph = _graph_from(args)
    report = groundstate.analyze_graph(graph)
    lines = [f"graph: {_graph_label(args)}"] + groundstate.format_report(report).splitlines()
    data = report.to_dict()
    if args.hamiltonians:
        rng = np.random.default_rng(args.seed)
        residuals = []
        for _ in range(args.hamiltonians):
            residuals.append(groundstate.verify_not_eigenstate(graph, groundstate.random_coefficients(graph, rng)))
        lines.append(
            f"random Hamiltonians: {len(residuals)}  min orthogonal residual {min(residuals):.6e}"
        )
        data["residuals"] = [round(r, 12) for r in residuals]
    return lines, data


def cmd_simulate_linear(args) -> tuple[list[str], dict]:
    prep = linearsim.prep_from_dict(_load_json(args.prep))
    raw_plan = _load_json(args.plan)
    if not isinstance(raw_plan, list):
        raise ParseError("plan document must be a JSON list")
    plan = linearsim.plan_from_list(raw_plan)
    if args.method == "forward":
        tr = linearsim.simulate_forward(prep, plan, args.seed)
    else:
        tr = linearsim.simulate_any_order(prep, plan, args.seed)
    lines = [f"qubits: {prep.n}  steps: {len(plan)}  method: {args.method}"]
    for q, b, p in tr.steps:
        lines.append(f"qubit {q}: {b} (p={_num(p)})")
    lines.append(f"joint probability {tr.joint_probability:.12e}")
    data = {
        "method": args.method,
        "steps": [{"qubit": q, "bit": b, "probability": round(p, 12)} for q, b, p in tr.steps],
        "log_probability": round(tr.log_probability, 12),
    }
    if args.oracle_check:
        ref = linearsim.oracle_simulate(prep, plan, args.seed)
        agree = ref.bits == tr.bits and all(abs(a[2] - b[2]) < 1e-9 for a, b in zip(ref.steps, tr.steps))
        lines.append(f"oracle check: {'agree' if agree else 'DISAGREE'}")
        data["oracle_agrees"] = agree
        if len(plan) <= linearsim.MAX_ENUMERATION_STEPS:
            tv = linearsim.total_variation(
                linearsim.joint_distribution(prep, plan), linearsim.joint_distribution(prep, plan, "oracle")
            )
            lines.append(f"oracle total variation {tv:.3e}")
            data["oracle_total_variation"] = float(f"{tv:.3e}")
        if not agree:
            return lines, data, 1
    if args.witness:
        w = linearsim.linear_preparability_witness(prep)
        lines.append("cut ranks: " + " ".join(map(str, w.ranks)))
        lines.append(f"note: {w.note}")
        data["cut_ranks"] = list(w.ranks)
    return lines, data


# ----------------------------------------------------------------- parser


def _add_graph_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", metavar="FILE", help="graph file ('graph N' then 'edge U V' lines)")
    g.add_argument("--path", type=int, metavar="N", help="path graph on N vertices")
    g.add_argument("--grid", type=_dims, metavar="RxC", help="rectangular grid")
    g.add_argument("--torus", type=_dims, metavar="RxC", help="periodic grid (both sides >= 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustersim", description="Cluster-state computation toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help=f"PRNG seed (default {DEFAULT_SEED})")
    common.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="prepare a cluster state and check its stabilizers")
    _add_graph_source(p)
    p.add_argument("--by-measurement", action="store_true", help="prepare by measuring the stabilizers")
    p.add_argument("--amplitudes", action="store_true", help="print non-zero amplitudes")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("stabilizers", parents=[common], help="list stabilizer generators")
    _add_graph_source(p)
    p.set_defaults(func=cmd_stabilizers)

    p = sub.add_parser("simulate-circuit", parents=[common], help="run a circuit file")
    p.add_argument("--circuit", required=True, metavar="FILE")
    p.add_argument("--branches", choices=("sample", "all"), default="sample")
    p.set_defaults(func=cmd_simulate_circuit)

    p = sub.add_parser("compile", parents=[common], help="compile a circuit into a measurement pattern")
    p.add_argument("--circuit", required=True, metavar="FILE")
    p.add_argument("--output", metavar="FILE", help="also write the pattern JSON here")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run-pattern", parents=[common], help="execute a pattern JSON file")
    p.add_argument("--pattern", required=True, metavar="FILE")
    p.add_argument("--branches", choices=("sample", "all"), default="sample")
    p.set_defaults(func=cmd_run_pattern)

    p = sub.add_parser("verify-compile", parents=[common], help="check compiled patterns against the circuit")
    p.add_argument("--circuit", required=True, metavar="FILE")
    p.add_argument("--branches", choices=("sample", "all"), default="all")
    p.add_argument("--samples", type=int, default=32, help="branches drawn with --branches sample")
    p.set_defaults(func=cmd_verify_compile)

    p = sub.add_parser("analyze-ground", parents=[common], help="unique syndrome analysis of a graph")
    _add_graph_source(p)
    p.add_argument("--hamiltonians", type=int, default=0, metavar="K", help="also test K random Hamiltonians")
    p.set_defaults(func=cmd_analyze_ground)

    p = sub.add_parser("simulate-linear", parents=[common], help="measure a linearly prepared state")
    p.add_argument("--prep", required=True, metavar="FILE")
    p.add_argument("--plan", required=True, metavar="FILE")
    p.add_argument("--method", choices=("forward", "chain"), default="chain")
    p.add_argument("--oracle-check", action="store_true", help="compare with the dense simulator")
    p.add_argument("--witness", action="store_true", help="report Schmidt ranks across every cut")
    p.set_defaults(func=cmd_simulate_linear)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    lines, data, *rest = result
    code = rest[0] if rest else 0
    if args.format == "json":
        doc = {"command": args.command, "seed": args.seed, "report": data}
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write("\n".join([f"# clustersim {args.command} seed={args.seed}", *lines]) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
