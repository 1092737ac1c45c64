"""Versioned JSON documents for structures, results and traces."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from .core import (
    AlgebraEmbedding,
    AmbientAlgebra,
    MalformedError,
    PartialIso,
    PartialIsoSystem,
    Subalgebra,
    rational,
    rational_str,
    sort_atoms,
    sort_blocks,
)
from .grid import GridPermutation
from .measured import MeasuredSystem, RationalMeasure
from .metric import FiniteMetricSpace, MetricSystem
from .trees import FiniteTree, TreeIso, node_key

FORMAT_VERSION = 1

STRUCTURE_KINDS = ("boolean-system", "measured-system", "metric-system", "tree-iso",
                   "grid-permutation")


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def wrap(kind: str, payload: Any) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": kind, "payload": payload}


def unwrap(doc: Any, kinds: tuple[str, ...] | str | None = None) -> tuple[str, Any]:
    if not isinstance(doc, dict) or "kind" not in doc or "payload" not in doc:
        raise MalformedError("document needs kind and payload fields")
    if doc.get("format_version") != FORMAT_VERSION:
        raise MalformedError(f"unsupported format version {doc.get('format_version')!r}")
    kinds = (kinds,) if isinstance(kinds, str) else kinds
    if kinds is not None and doc["kind"] not in kinds:
        raise MalformedError(f"expected a {' or '.join(kinds)} document, got {doc['kind']}")
    return doc["kind"], doc["payload"]


def read(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedError(f"{path}: not valid JSON ({exc.msg})") from exc


def write(path: str | Path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def _need(payload: Any, *fields: str) -> None:
    if not isinstance(payload, dict):
        raise MalformedError("payload must be an object")
    missing = [f for f in fields if f not in payload]
    if missing:
        raise MalformedError(f"payload lacks {', '.join(missing)}")


# ----------------------------------------------------------- Boolean systems


def block_list(block) -> list:
    return list(sort_atoms(block))


def iso_to_payload(psi: PartialIso) -> dict:
    return {"domain": {"blocks": [block_list(b) for b in psi.domain.blocks]},
            "range": {"blocks": [block_list(c) for c in psi.range.blocks]},
            "map": [[block_list(b), block_list(c)] for b, c in psi.pairs]}


def system_to_payload(S: PartialIsoSystem) -> dict:
    return {"ambient": {"atoms": list(S.ambient.atoms)},
            "isos": [iso_to_payload(p) for p in S.isos]}


def iso_from_payload(amb: AmbientAlgebra, p: Any) -> PartialIso:
    _need(p, "map")
    try:
        pairs = tuple((frozenset(map(str, b)), frozenset(map(str, c))) for b, c in p["map"])
    except (TypeError, ValueError) as exc:
        raise MalformedError("map entries must be [domain block, range block]") from exc
    psi = PartialIso(Subalgebra(amb, tuple(b for b, _ in pairs)),
                     Subalgebra(amb, tuple(c for _, c in pairs)), pairs)
    for side, sub in (("domain", psi.domain), ("range", psi.range)):
        if side in p:
            given = sort_blocks(frozenset(map(str, b)) for b in p[side]["blocks"])
            if given != sub.blocks:
                raise MalformedError(f"{side} blocks disagree with the map")
    return psi


def system_from_payload(p: Any) -> PartialIsoSystem:
    _need(p, "ambient", "isos")
    amb = AmbientAlgebra(tuple(str(a) for a in p["ambient"]["atoms"]))
    return PartialIsoSystem(amb, tuple(iso_from_payload(amb, q) for q in p["isos"]))


def embedding_to_payload(e: AlgebraEmbedding) -> dict:
    return {"source": list(e.source.atoms), "target": list(e.target.atoms),
            "image": {a: block_list(t) for a, t in e.image}}


def embedding_from_payload(p: Any) -> AlgebraEmbedding:
    _need(p, "source", "target", "image")
    src = AmbientAlgebra(tuple(p["source"]))
    tgt = AmbientAlgebra(tuple(p["target"]))
    return AlgebraEmbedding.from_map(src, tgt, {a: frozenset(t) for a, t in p["image"].items()})


# ------------------------------------------------------------------ measures


def measure_to_payload(mu: RationalMeasure) -> dict:
    return {"ambient": {"atoms": list(mu.ambient.atoms)},
            "mass": {a: rational_str(q) for a, q in mu.mass}, "dyadic": mu.dyadic}


def measure_from_payload(p: Any) -> RationalMeasure:
    _need(p, "mass")
    masses = {str(a): rational(q) for a, q in p["mass"].items()}
    return RationalMeasure.of(masses, bool(p.get("dyadic", False)))


def measured_to_payload(M: MeasuredSystem) -> dict:
    return {"system": system_to_payload(M.system), "measure": measure_to_payload(M.measure)}


def measured_from_payload(p: Any) -> MeasuredSystem:
    _need(p, "system", "measure")
    S = system_from_payload(p["system"])
    mu = measure_from_payload(p["measure"])
    if mu.ambient != S.ambient:
        raise MalformedError("measure and system atoms differ")
    return MeasuredSystem(S, mu)


# -------------------------------------------------------------------- metric


def space_to_payload(X: FiniteMetricSpace) -> dict:
    return {"points": list(X.points), "dist": [[rational_str(d) for d in row] for row in X.dist]}


def space_from_payload(p: Any) -> FiniteMetricSpace:
    _need(p, "points", "dist")
    return FiniteMetricSpace(tuple(map(str, p["points"])),
                             tuple(tuple(rational(d) for d in row) for row in p["dist"]))


def metric_to_payload(S: MetricSystem) -> dict:
    return {"space": space_to_payload(S.space), "isos": [[list(pr) for pr in m] for m in S.isos]}


def metric_from_payload(p: Any) -> MetricSystem:
    _need(p, "space", "isos")
    return MetricSystem(space_from_payload(p["space"]),
                        tuple(tuple((str(x), str(y)) for x, y in m) for m in p["isos"]))


# --------------------------------------------------------------------- trees


def nodes_payload(nodes) -> list:
    return [list(u) for u in sorted(nodes, key=node_key)]


def tree_iso_to_payload(phi: TreeIso) -> dict:
    return {"source": {"nodes": nodes_payload(phi.source.nodes)},
            "target": {"nodes": nodes_payload(phi.target.nodes)},
            "map": [[list(u), list(v)] for u, v in phi.map]}


def tree_iso_from_payload(p: Any) -> TreeIso:
    _need(p, "map")
    try:
        mapping = {tuple(int(x) for x in u): tuple(int(x) for x in v) for u, v in p["map"]}
    except (TypeError, ValueError) as exc:
        raise MalformedError("tree map entries must be [node, node]") from exc
    phi = TreeIso(FiniteTree(frozenset(mapping)), FiniteTree(frozenset(mapping.values())),
                  tuple(mapping.items()))
    for side in ("source", "target"):
        if side in p and {tuple(u) for u in p[side]["nodes"]} != getattr(phi, side).nodes:
            raise MalformedError(f"{side} nodes disagree with the map")
    return phi


# ---------------------------------------------------------------------- grid


def grid_to_payload(g: GridPermutation) -> dict:
    return {"n": g.n, "m": g.m, "perm": list(g.perm)}


def grid_from_payload(p: Any) -> GridPermutation:
    _need(p, "n", "m", "perm")
    return GridPermutation(int(p["n"]), int(p["m"]), tuple(p["perm"]))


_LOADERS = {
    "boolean-system": system_from_payload,
    "measured-system": measured_from_payload,
    "metric-system": metric_from_payload,
    "tree-iso": tree_iso_from_payload,
    "grid-permutation": grid_from_payload,
}

_SAVERS = {
    PartialIsoSystem: ("boolean-system", system_to_payload),
    MeasuredSystem: ("measured-system", measured_to_payload),
    MetricSystem: ("metric-system", metric_to_payload),
    TreeIso: ("tree-iso", tree_iso_to_payload),
    GridPermutation: ("grid-permutation", grid_to_payload),
}


def save(value) -> dict:
    """Structure document for a library value."""
    if isinstance(value, PartialIso):
        value = PartialIsoSystem.single(value)
    try:
        kind, fn = _SAVERS[type(value)]
    except KeyError as exc:
        raise MalformedError(f"no document kind for {type(value).__name__}") from exc
    return wrap(kind, fn(value))


def load(doc: Any, kinds: tuple[str, ...] | str | None = None):
    kind, payload = unwrap(doc, kinds)
    if kind not in _LOADERS:
        raise MalformedError(f"unknown structure kind {kind!r}")
    try:
        return _LOADERS[kind](payload)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, MalformedError):
            raise
        raise MalformedError(f"bad {kind} payload: {exc}") from exc


def fraction_str(q: Fraction) -> str:
    return rational_str(q)
