"""Batch command-line front end.

Every subcommand reads JSON documents, runs one library operation and writes
a result document (to ``--out`` or standard output).  Exit status is 0 on
success, 1 when the input is well formed but outside an operation's domain,
and 2 for malformed input or bad usage.
"""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import asdict

from . import builder, checkers, documents as docs
from .cap import amalgamate_over_normal
from .chains import ChainDecomposition, decompose, jep_boolean, normalize, refinement_embedding
from .core import (
    AmbientAlgebra,
    DomainError,
    MalformedError,
    PartialIsoSystem,
    SystemEmbedding,
    sort_atoms,
)
from .grid import GridPermutation, factor_grid_permutation, factorization_failures
from .measured import MeasuredSystem, amalgamate_measured, jep_measured_systems
from .metric import (
    MetricSystem,
    amalgamate_metric,
    jep_metric_systems,
    union_isometry,
)
from .relational import RelSystem
from .shift import shift_independence
from .trees import TreeIso, extend_to_tree_automorphism


def _emit(doc: dict, path: str | None) -> None:
    if path is None:
        sys.stdout.write(docs.dumps(doc))
    else:
        docs.write(path, doc)


def _blocks(blocks) -> list:
    return [list(sort_atoms(b)) for b in blocks]


def _single(S: PartialIsoSystem):
    if S.n != 1:
        raise DomainError("this operation takes a single partial iso (n = 1)")
    return S.isos[0]


# ------------------------------------------------------------ subcommands


def cmd_normalize(args) -> int:
    S = docs.load(docs.read(args.input), "boolean-system")
    psi = _single(S)
    refined, _ = normalize(psi)
    _emit(docs.save(refined), args.out)
    if args.witness:
        emb = refinement_embedding(psi, refined)
        docs.write(args.witness, docs.wrap("boolean-embedding", docs.embedding_to_payload(emb.base)))
    return 0


def decomposition_payload(dec) -> dict:
    if not isinstance(dec, ChainDecomposition):
        return {"normal": False, "violation": {"clause": dec.clause, "atom": sorted(dec.atom),
                                               "side": dec.side, "reason": dec.reason}}
    return {
        "normal": True,
        "cyclic": [_blocks(c) for c in dec.cyclic],
        "stable": [{"orientation": ch.orientation, "terms": _blocks(ch.terms),
                    "end": list(sort_atoms(ch.end)), "free": _blocks(ch.free)}
                   for ch in dec.stable],
        "linking": [_blocks(c) for c in dec.linking],
    }


def cmd_decompose(args) -> int:
    S = docs.load(docs.read(args.input), "boolean-system")
    _emit(docs.wrap("chain-decomposition", decomposition_payload(decompose(_single(S)))), args.out)
    return 0


def _extension(doc, base_kind: str):
    """A target structure plus the embedding of the base into it."""
    kind, p = docs.unwrap(doc, (f"{base_kind}-extension",))
    if not isinstance(p, dict) or "embedding" not in p:
        raise MalformedError(f"{kind} payload needs an embedding")
    return p, docs.embedding_from_payload(p["embedding"])


def cmd_amalgamate(args) -> int:
    base_doc = docs.read(args.input)
    kind, _ = docs.unwrap(base_doc)
    left_doc, right_doc = docs.read(args.left), docs.read(args.right)
    if kind == "boolean-system":
        S = docs.load(base_doc, kind)
        lp, f = _extension(left_doc, "boolean")
        rp, g = _extension(right_doc, "boolean")
        L, R = docs.system_from_payload(lp["system"]), docs.system_from_payload(rp["system"])
        am = amalgamate_over_normal(S, SystemEmbedding(f, S, L), SystemEmbedding(g, S, R))
        _emit(docs.save(am.system), args.out)
        witness = {"left": docs.embedding_to_payload(am.left.base),
                   "right": docs.embedding_to_payload(am.right.base),
                   "cells": sorted([[b, c, am.cell_label[(b, c)]] for b, c in am.cell_label],
                                   key=lambda t: int(t[2]))}
    elif kind == "measured-system":
        M = docs.load(base_doc, kind)
        lp, f = _extension(left_doc, "measured")
        rp, g = _extension(right_doc, "measured")
        nu, rho = docs.measure_from_payload(lp["measure"]), docs.measure_from_payload(rp["measure"])
        am = amalgamate_measured(M.measure, f, nu, g, rho)
        _emit(docs.wrap("measure", docs.measure_to_payload(am.measure)), args.out)
        witness = {"left": docs.embedding_to_payload(am.left),
                   "right": docs.embedding_to_payload(am.right),
                   "cells": [list(c) for c in am.cells]}
    elif kind == "metric-system":
        A = docs.load(base_doc, kind)
        B, C = docs.load(left_doc, kind), docs.load(right_doc, kind)
        for side in (B, C):
            if side.space.restrict(A.space.points) != A.space:
                raise DomainError("base space is not a subspace of both sides")
        if set(B.space.points) & set(C.space.points) != set(A.space.points):
            raise DomainError("the sides must share exactly the base points")
        D = amalgamate_metric(B.space, C.space)
        if B.n != C.n:
            raise DomainError("systems have different arity")
        isos = tuple(tuple(sorted(union_isometry(phi, B.space, chi, C.space, D).items()))
                     for phi, chi in zip(B.maps(), C.maps()))
        _emit(docs.save(MetricSystem(D, isos)), args.out)
        witness = {"left": sorted([p, p] for p in B.space.points),
                   "right": sorted([p, p] for p in C.space.points)}
    else:
        raise MalformedError(f"cannot amalgamate {kind} documents")
    if args.witness:
        docs.write(args.witness, docs.wrap("amalgam-witness", witness))
    return 0


def cmd_jep(args) -> int:
    S = docs.load(docs.read(args.input))
    T = docs.load(docs.read(args.other))
    if type(S) is not type(T):
        raise MalformedError("both inputs must have the same kind")
    if isinstance(S, PartialIsoSystem):
        U, eS, eT = jep_boolean(S, T)
        witness = {"left": docs.embedding_to_payload(eS.base),
                   "right": docs.embedding_to_payload(eT.base)}
    elif isinstance(S, MeasuredSystem):
        U, eS, eT = jep_measured_systems(S, T)
        witness = {"left": docs.embedding_to_payload(eS.base),
                   "right": docs.embedding_to_payload(eT.base)}
    elif isinstance(S, MetricSystem):
        U, eS, eT = jep_metric_systems(S, T)
        witness = {"left": sorted(map(list, eS.items())), "right": sorted(map(list, eT.items()))}
    else:
        raise MalformedError("joint embedding takes Boolean, measured or metric systems")
    _emit(docs.save(U), args.out)
    if args.witness:
        docs.write(args.witness, docs.wrap("joint-embedding-witness", witness))
    return 0


def _pinned_base(driver):
    """The one-point structure (one-atom algebra) every system contains."""
    if isinstance(driver, checkers.BooleanDriver):
        return AmbientAlgebra.of_size(1)
    return RelSystem(1, (), ())


def cmd_check_class(args) -> int:
    driver = checkers.get_driver(args.cls, args.cofinal)
    if args.n < 1 or args.bound < 1:
        raise DomainError("n and bound must be positive")
    if args.property == "jep":
        report = checkers.check_jep(driver, args.n, args.bound)
    elif args.property == "cjep":
        report = checkers.check_jep(driver, args.n, args.bound, pinned_base=_pinned_base(driver))
    elif args.property == "wap":
        report = checkers.check_wap(driver, args.n, args.bound)
    else:
        report = checkers.check_cap(driver, args.n, args.bound)
    print(report.summary(), file=sys.stderr)
    _emit(docs.wrap("check-report", asdict(report)), args.out)
    return 0


def _schedule(args):
    if args.cls == "boolean":
        return builder.boolean_schedule(args.depth, args.max_blocks)
    if args.cls == "metric":
        return builder.metric_schedule()
    return builder.tree_schedule(2, args.depth, args.max_nodes)


def cmd_build_generic(args) -> int:
    if args.replay:
        driver, trace = builder.trace_from_doc(docs.read(args.replay))
        bad = builder.replay(driver, trace)
        for line in bad:
            print(line, file=sys.stderr)
        status = "incomplete" if not trace.complete else "complete"
        print(f"{len(trace.stages)} stages, {status}, "
              f"{'replay failed' if bad else 'every stage replays'}", file=sys.stderr)
        return 1 if bad else 0
    driver = builder.get_build_driver(args.cls)
    schedule = _schedule(args)
    if args.mode == "dense":
        trace = builder.build_dense_orbit_approx(driver, schedule, args.budget)
    else:
        trace = builder.build_generic_approx(driver, schedule, args.budget, args.extensions)
    print(f"{len(trace.stages)} stages over {trace.scheduled} scheduled conditions, "
          f"{'complete' if trace.complete else 'incomplete'}", file=sys.stderr)
    _emit(builder.trace_to_doc(driver, trace), args.out)
    return 0


def cmd_factor_grid(args) -> int:
    if args.input:
        rho = docs.load(docs.read(args.input), "grid-permutation")
    else:
        if args.n is None or args.m is None or args.perm is None:
            raise MalformedError("give --in or all of --n, --m, --perm")
        rho = GridPermutation.parse(args.n, args.m, args.perm)
    f1, h, f2 = factor_grid_permutation(rho)
    bad = factorization_failures(rho, f1, h, f2)
    if bad:
        raise AssertionError("; ".join(bad))
    payload = {"input": docs.grid_to_payload(rho), "f1": docs.grid_to_payload(f1),
               "h": docs.grid_to_payload(h), "f2": docs.grid_to_payload(f2)}
    _emit(docs.wrap("grid-factorization", payload), args.out)
    return 0


def cmd_tree_extend(args) -> int:
    phi = docs.load(docs.read(args.input), "tree-iso")
    g = extend_to_tree_automorphism(phi, args.m, args.depth)
    _emit(docs.save(TreeIso.from_map(g.as_dict())), args.out)
    return 0


def cmd_shift_independence(args) -> int:
    depth = 2 * (2 * args.k + 1) + 2 if args.depth is None else args.depth
    cert = shift_independence(args.k, depth)
    _emit(docs.wrap("shift-certificate", asdict(cert)), args.out)
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraisse-kit", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized drivers (default 0)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    def add(name, fn, help_text, needs_in=True):
        p = sub.add_parser(name, help=help_text)
        if needs_in:
            p.add_argument("--in", dest="input", required=True, help="input document")
        p.add_argument("--out", help="result document (default: standard output)")
        p.set_defaults(func=fn)
        return p

    p = add("normalize", cmd_normalize, "normal refinement of a partial iso")
    p.add_argument("--witness", help="write the refinement embedding here")
    add("decompose", cmd_decompose, "chain decomposition or first normality violation")
    p = add("amalgamate", cmd_amalgamate, "amalgam of two extensions of a base")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--witness")
    p = add("jep", cmd_jep, "joint embedding of two systems")
    p.add_argument("--with", dest="other", required=True)
    p.add_argument("--witness")
    p = add("check-class", cmd_check_class, "bounded JEP/CJEP/WAP/CAP check", needs_in=False)
    p.add_argument("--class", dest="cls", required=True, choices=checkers.CLASS_NAMES)
    p.add_argument("--property", required=True, choices=("jep", "cjep", "wap", "cap"))
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--cofinal", choices=("whole", "full"), default=None,
                   help="cofinal subclass for cap on relational or metric classes")
    p = add("build-generic", cmd_build_generic, "stagewise construction trace", needs_in=False)
    p.add_argument("--class", dest="cls", choices=("boolean", "metric", "tree"), default="boolean")
    p.add_argument("--mode", choices=("dense", "generic"), default="generic")
    p.add_argument("--budget", type=int, default=10000)
    p.add_argument("--extensions", type=int, default=2)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--max-blocks", type=int, default=2)
    p.add_argument("--max-nodes", type=int, default=3)
    p.add_argument("--replay", help="validate an existing trace instead of building")
    p = add("factor-grid", cmd_factor_grid, "row/column/row factorization", needs_in=False)
    p.add_argument("--in", dest="input")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--perm", help="comma-separated row-major images")
    p = add("tree-extend", cmd_tree_extend, "extend a tree partial iso to the box")
    p.add_argument("--m", type=int, required=True, help="branching width")
    p.add_argument("--depth", type=int, help="box depth (default: m)")
    p = add("shift-independence", cmd_shift_independence, "window independence certificate",
            needs_in=False)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--depth", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    random.seed(args.seed)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MalformedError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
