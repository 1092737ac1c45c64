"""Stagewise constructions of finite approximations to automorphisms with a
dense or comeager conjugacy class.

A condition is a finite system; each stage extends it so that one scheduled
requirement is met, and records a witness embedding.  Dense stages embed the
requirement itself.  Generic stages first embed a WAP witness S_hat of the
requirement and then, for each scheduled extension theta of S_hat, extend the
condition so that theta embeds agreeing with the S_hat witness on the
requirement.  Every witness is pushed forward through the later extension
links and re-validated against the final condition by ``replay``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Any, Optional

from . import documents as docs
from .cap import amalgamate_over_normal
from .chains import coarsen_to_join, jep_boolean, wap_witness
from .checkers import BooleanDriver
from .core import (
    AmbientAlgebra,
    DomainError,
    MalformedError,
    PartialIsoSystem,
    SystemEmbedding,
    all_partial_isos,
    embed_join_system,
    embedding_violations,
    trivial_system,
)
from .metric import FiniteMetricSpace, MetricSystem, jep_metric_systems, metric_embedding_failures
from .trees import (
    FiniteTree,
    TreeIso,
    all_subtrees,
    all_tree_isos,
    box,
    extend_to_tree_automorphism,
    node_key,
    tree_map_failures,
)


# ------------------------------------------------------------------- trace


@dataclass
class Stage:
    kind: str  # "dense", "hat" or "extension"
    requirement: Any
    condition: int
    witness: Any
    origin: Any = None  # hat: the scheduled requirement
    into: Any = None  # hat: origin -> S_hat; extension: S_hat -> theta
    parent: Optional[int] = None  # extension: index of its hat stage


@dataclass
class ConstructionTrace:
    driver: str
    mode: str
    conditions: list = field(default_factory=list)
    links: list = field(default_factory=list)  # links[k]: conditions[k] -> conditions[k+1]
    stages: list = field(default_factory=list)
    complete: bool = True
    budget: int = 0
    scheduled: int = 0
    note: str = ""

    @property
    def final(self):
        return self.conditions[-1]


# ----------------------------------------------------------------- drivers


class BuildDriver:
    name = "abstract"

    def initial(self):
        raise NotImplementedError

    def reduce(self, req):
        """The system a dense stage actually embeds for requirement ``req``."""
        return req

    def meet(self, cond, req):
        """(new condition or None, link, witness req -> condition)."""
        raise NotImplementedError

    def embed(self, S, T):
        """Some embedding S -> T, or None; used only to share WAP witnesses."""
        return None

    def wap(self, req):
        raise DomainError(f"driver {self.name} has no WAP witnesses")

    def extensions(self, hat, count: int) -> list:
        raise DomainError(f"driver {self.name} has no WAP witnesses")

    def meet_local(self, cond, h, hat, theta, e):
        raise DomainError(f"driver {self.name} has no WAP witnesses")

    def compose(self, e1, e2):
        raise NotImplementedError

    def same(self, e1, e2) -> bool:
        return e1 == e2

    def failures(self, e, S, T) -> list[str]:
        raise NotImplementedError

    def extends(self, old, new, link) -> list[str]:
        return self.failures(link, old, new)

    def dump_system(self, S):
        raise NotImplementedError

    def load_system(self, p):
        raise NotImplementedError

    def dump_emb(self, e):
        raise NotImplementedError

    def load_emb(self, p, S, T):
        raise NotImplementedError


class BooleanBuildDriver(BuildDriver):
    name = "boolean"

    def initial(self):
        return trivial_system(1)

    def reduce(self, req):
        """Only the domain and range of a requirement matter, so it is met
        over the join of the two."""
        if req.n != 1:
            raise DomainError("boolean requirements are single partial isos")
        coarse, _ = coarsen_to_join(req.isos[0])
        return PartialIsoSystem.single(coarse)

    def meet(self, cond, req):
        e = embed_join_system(req, cond)
        if e is not None:
            return None, None, e
        U, e_c, e_r = jep_boolean(cond, req)
        return U, e_c, e_r

    def embed(self, S, T):
        return embed_join_system(S, T)

    def wap(self, req):
        if req.n != 1:
            raise DomainError("boolean WAP witnesses are for single partial isos")
        coarse, base, _ = wap_witness(req.isos[0])
        hat = PartialIsoSystem.single(coarse)
        return hat, SystemEmbedding(base, req, hat)

    def extensions(self, hat, count):
        return BooleanDriver().probes(hat)[1:count + 1]

    def meet_local(self, cond, h, hat, theta, e):
        am = amalgamate_over_normal(hat, h, e)
        return am.system, am.left, am.right

    def compose(self, e1, e2):
        return e1.compose(e2)

    def same(self, e1, e2):
        return e1.base == e2.base

    def failures(self, e, S, T):
        if e.source != S or e.target != T:
            return ["embedding endpoints differ from the recorded systems"]
        return embedding_violations(e.base, S, T)

    def dump_system(self, S):
        return docs.system_to_payload(S)

    def load_system(self, p):
        return docs.system_from_payload(p)

    def dump_emb(self, e):
        return docs.embedding_to_payload(e.base)

    def load_emb(self, p, S, T):
        return SystemEmbedding(docs.embedding_from_payload(p), S, T)


class MetricBuildDriver(BuildDriver):
    name = "metric"

    def initial(self):
        return MetricSystem(FiniteMetricSpace(("p0",), ((0,),)), (((),)))

    def meet(self, cond, req):
        pts = cond.space.points
        for img in permutations(pts, len(req.space.points)):
            e = dict(zip(req.space.points, img))
            if not metric_embedding_failures(e, req, cond):
                return None, None, e
        U, e_c, e_r = jep_metric_systems(cond, req)
        rename = {p: f"p{i}" for i, p in enumerate(U.space.points)}
        space = FiniteMetricSpace(tuple(rename[p] for p in U.space.points), U.space.dist)
        V = MetricSystem(space, tuple(tuple((rename[x], rename[y]) for x, y in m) for m in U.isos))
        return (V, {x: rename[y] for x, y in e_c.items()}, {x: rename[y] for x, y in e_r.items()})

    def compose(self, e1, e2):
        return {x: e2[y] for x, y in e1.items()}

    def failures(self, e, S, T):
        return metric_embedding_failures(e, S, T)

    def dump_system(self, S):
        return docs.metric_to_payload(S)

    def load_system(self, p):
        return docs.metric_from_payload(p)

    def dump_emb(self, e):
        return sorted([x, y] for x, y in e.items())

    def load_emb(self, p, S, T):
        return {str(x): str(y) for x, y in p}


def _support(phi: TreeIso) -> set:
    return set(phi.source.nodes) | set(phi.target.nodes)


class TreeBuildDriver(BuildDriver):
    """Conditions are partial isos between finite subtrees; a requirement is
    met by conjugating it onto fresh labels below the root, so the width of
    the condition grows while its depth stays that of the requirements."""

    name = "tree"

    def __init__(self, width: int = 2, depth: int = 2):
        self.width = width
        self.depth = depth

    def initial(self):
        return TreeIso.from_map({(): ()})

    @staticmethod
    def _fresh_children(nodes: set, parent, k: int, taken: set) -> list[int]:
        used = {u[-1] for u in nodes if len(u) == len(parent) + 1 and u[:-1] == parent} | taken
        out, x = [], 0
        while len(out) < k:
            if x not in used:
                out.append(x)
            x += 1
        return out

    def _conjugate(self, cond: TreeIso, req: TreeIso, fixed: dict) -> tuple[TreeIso, dict]:
        """Embed req's support by j (agreeing with ``fixed``), sending every
        other node to a fresh child label, and add j req j^-1 to cond."""
        nodes = _support(cond)
        j = dict(fixed)
        j.setdefault((), ())
        taken: dict = {}
        for u in sorted(_support(req), key=node_key):
            if u in j:
                continue
            parent = j[u[:-1]]
            (label,) = self._fresh_children(nodes, parent, 1, taken.setdefault(parent, set()))
            taken[parent].add(label)
            j[u] = parent + (label,)
        mapping = cond.as_dict()
        for u, v in req.map:
            w = j[v]
            if mapping.setdefault(j[u], w) != w:
                raise AssertionError("conjugated requirement clashes with the condition")
        return TreeIso.from_map(mapping), j

    def meet(self, cond, req):
        new, j = self._conjugate(cond, req, {})
        return new, None, j

    def wap(self, req):
        full = extend_to_tree_automorphism(req, self.width, self.depth)
        hat = TreeIso.from_map(full.as_dict())
        return hat, {u: u for u in _support(req)}

    def extensions(self, hat, count):
        """Automorphisms of the box twice as wide extending S_hat; the new
        root children are fixed or swapped in pairs."""
        w = 2 * self.width
        out = []
        fresh = list(range(self.width, w))
        for variant in range(count):
            m = hat.as_dict()
            if variant % 2 == 1:
                for a, b in zip(fresh[::2], fresh[1::2]):
                    m[(a,)], m[(b,)] = (b,), (a,)
            full = extend_to_tree_automorphism(m, w, self.depth)
            theta = TreeIso.from_map(full.as_dict())
            out.append((theta, {u: u for u in _support(hat)}))
        return out

    def meet_local(self, cond, h, hat, theta, e):
        fixed = {e[u]: h[u] for u in _support(hat)}
        new, j = self._conjugate(cond, theta, fixed)
        return new, None, j

    def compose(self, e1, e2):
        return {x: e2[y] for x, y in e1.items()}

    def failures(self, e, S, T):
        out = []
        if set(e) != _support(S):
            return ["witness must be defined on the whole support"]
        out += tree_map_failures(e)
        f = T.as_dict()
        for u, v in S.map:
            if f.get(e[u]) != e[v]:
                out.append(f"witness square fails at {u}")
        return out

    def extends(self, old, new, link):
        f, g = old.as_dict(), new.as_dict()
        return [] if all(g.get(u) == v for u, v in f.items()) else ["condition shrank"]

    def dump_system(self, S):
        return docs.tree_iso_to_payload(S)

    def load_system(self, p):
        return docs.tree_iso_from_payload(p)

    def dump_emb(self, e):
        return [[list(u), list(v)] for u, v in sorted(e.items(), key=lambda kv: node_key(kv[0]))]

    def load_emb(self, p, S, T):
        return {tuple(u): tuple(v) for u, v in p}


def get_build_driver(name: str) -> BuildDriver:
    table = {"boolean": BooleanBuildDriver, "metric": MetricBuildDriver, "tree": TreeBuildDriver}
    if name not in table:
        raise DomainError(f"no builder for class {name!r}")
    return table[name]()


# --------------------------------------------------------------- schedules


def boolean_schedule(depth: int = 2, max_blocks: int | None = 2) -> list[PartialIsoSystem]:
    """Every partial iso between subalgebras with at most max_blocks atoms of
    the algebra of depth-``depth`` cylinders."""
    atoms = tuple(format(i, f"0{depth}b") for i in range(2 ** depth)) if depth else ("0",)
    A = AmbientAlgebra(atoms)
    return [PartialIsoSystem.single(p) for p in all_partial_isos(A, max_blocks)]


def metric_schedule(values=(1, 2), max_points: int = 2) -> list[MetricSystem]:
    """Every partial isometry of a space with at most max_points points and
    distances in ``values``."""
    out = []
    for k in range(1, max_points + 1):
        pts = tuple("abcdefgh"[:k])
        spaces = []
        if k == 1:
            spaces.append(FiniteMetricSpace(pts, ((0,),)))
        else:
            from itertools import combinations, product
            prs = list(combinations(pts, 2))
            for vals in product(values, repeat=len(prs)):
                try:
                    spaces.append(FiniteMetricSpace.from_pairs(pts, dict(zip(prs, vals))))
                except MalformedError:
                    continue
        for X in spaces:
            for r in range(k + 1):
                from itertools import combinations as comb
                for dom in comb(pts, r):
                    for ran in permutations(pts, r):
                        m = tuple(zip(dom, ran))
                        try:
                            out.append(MetricSystem(X, (m,)))
                        except MalformedError:
                            continue
    return out


def tree_schedule(width: int = 2, depth: int = 2, max_nodes: int = 3) -> list[TreeIso]:
    trees = all_subtrees(width, depth, max_nodes)
    out = []
    for S in trees:
        for T in trees:
            for m in all_tree_isos(S, T):
                out.append(TreeIso(S, T, tuple(m.items())))
    return out


# ------------------------------------------------------------ construction


def _advance(trace: ConstructionTrace, new, link) -> None:
    if new is not None:
        trace.conditions.append(new)
        trace.links.append(link)


def build_dense_orbit_approx(driver: BuildDriver, schedule: list, budget: int) -> ConstructionTrace:
    """Meet every scheduled requirement psi: record g with g psi g^-1 inside
    the condition, as an embedding of the requirement system."""
    trace = ConstructionTrace(driver.name, "dense", [driver.initial()], budget=budget,
                              scheduled=len(schedule),
                              note="finite schedule; genericity is approximated, not complete")
    for req in schedule:
        if len(trace.stages) >= budget:
            trace.complete = False
            break
        small = driver.reduce(req)
        new, link, witness = driver.meet(trace.final, small)
        _advance(trace, new, link)
        trace.stages.append(Stage("dense", small, len(trace.conditions) - 1, witness, origin=req))
    return trace


def build_generic_approx(driver: BuildDriver, schedule: list, budget: int,
                         extensions: int = 2) -> ConstructionTrace:
    """Dense stages through a WAP witness S_hat of each requirement, followed
    by ``extensions`` local stages per requirement, each embedding an
    extension of S_hat so that it agrees with the S_hat witness on the
    requirement.

    A requirement that embeds (by sigma) into one already handled reuses its
    S_hat, entered through sigma: amalgamation over the larger system implies
    amalgamation over the smaller, and the earlier local witnesses still
    agree on the image of sigma."""
    trace = ConstructionTrace(driver.name, "generic", [driver.initial()], budget=budget,
                              scheduled=len(schedule),
                              note=f"finite schedule; {extensions} extensions of each witness")
    handled: list[tuple[Any, int]] = []  # (reduced requirement, its hat stage)
    for req in schedule:
        small = driver.reduce(req)
        if len(trace.stages) + 1 + extensions > budget:
            trace.complete = False
            break
        reuse = None
        for rep, idx in handled:
            sigma = driver.embed(small, rep)
            if sigma is not None:
                reuse = sigma, idx
                break
        if reuse is not None:
            sigma, idx = reuse
            old = trace.stages[idx]
            parent = len(trace.stages)
            trace.stages.append(Stage("hat", old.requirement, old.condition, old.witness,
                                      origin=req, into=driver.compose(sigma, old.into)))
            kids = [st for st in trace.stages if st.kind == "extension" and st.parent == idx]
            for st in kids[:extensions]:
                trace.stages.append(Stage("extension", st.requirement, st.condition, st.witness,
                                          into=st.into, parent=parent))
            continue
        hat, into = driver.wap(small)
        new, link, h = driver.meet(trace.final, hat)
        _advance(trace, new, link)
        parent = len(trace.stages)
        handled.append((small, parent))
        trace.stages.append(Stage("hat", hat, len(trace.conditions) - 1, h, origin=req, into=into))
        for theta, e in driver.extensions(hat, extensions):
            h_now = _push(driver, trace, h, trace.stages[parent].condition)
            new, link, j = driver.meet_local(trace.final, h_now, hat, theta, e)
            _advance(trace, new, link)
            trace.stages.append(Stage("extension", theta, len(trace.conditions) - 1, j,
                                      into=e, parent=parent))
    return trace


def _push(driver: BuildDriver, trace: ConstructionTrace, e, start: int, stop: int | None = None):
    stop = len(trace.conditions) - 1 if stop is None else stop
    for k in range(start, stop):
        if trace.links[k] is not None:
            e = driver.compose(e, trace.links[k])
    return e


def replay(driver: BuildDriver, trace: ConstructionTrace) -> list[str]:
    """Re-check the whole trace from its recorded data: the conditions form
    a chain, and every pushed-forward witness is valid in the final condition."""
    out = []
    for k, link in enumerate(trace.links):
        bad = driver.extends(trace.conditions[k], trace.conditions[k + 1], link)
        out += [f"link {k}: {b}" for b in bad]
    final = trace.final
    pushed = []
    for s, st in enumerate(trace.stages):
        try:
            w = _push(driver, trace, st.witness, st.condition)
        except (MalformedError, DomainError) as exc:
            out.append(f"stage {s}: witness does not push forward ({exc})")
            pushed.append(None)
            continue
        pushed.append(w)
        try:
            out += [f"stage {s}: {b}" for b in _stage_failures(driver, trace, st, w, pushed, final)]
        except (MalformedError, DomainError) as exc:
            out.append(f"stage {s}: {exc}")
    return out


def _stage_failures(driver, trace, st, w, pushed, final) -> list[str]:
    out = list(driver.failures(w, st.requirement, final))
    if st.kind == "dense" and driver.reduce(st.origin) != st.requirement:
        out.append("requirement is not the reduced scheduled condition")
    if st.kind == "hat":
        out += driver.failures(st.into, driver.reduce(st.origin), st.requirement)
    if st.kind == "extension":
        if not (0 <= st.parent < len(pushed) - 1) or trace.stages[st.parent].kind != "hat":
            return out + ["parent is not an earlier hat stage"]
        parent = trace.stages[st.parent]
        out += driver.failures(st.into, parent.requirement, st.requirement)
        if pushed[st.parent] is None:
            return out + ["parent witness is broken"]
        lhs = driver.compose(parent.into, driver.compose(st.into, w))
        rhs = driver.compose(parent.into, pushed[st.parent])
        if not driver.same(lhs, rhs):
            out.append("witness moves the requirement's algebra")
    return out


# ------------------------------------------------------------ documents


def trace_to_doc(driver: BuildDriver, trace: ConstructionTrace) -> dict:
    stages = []
    for st in trace.stages:
        d = {"kind": st.kind, "requirement": driver.dump_system(st.requirement),
             "condition": st.condition, "witness": driver.dump_emb(st.witness)}
        if st.kind in ("dense", "hat"):
            d["origin"] = driver.dump_system(st.origin)
        if st.kind == "hat":
            d["into"] = driver.dump_emb(st.into)
        if st.kind == "extension":
            d["into"] = driver.dump_emb(st.into)
            d["parent"] = st.parent
        stages.append(d)
    payload = {
        "driver": trace.driver, "mode": trace.mode, "complete": trace.complete,
        "budget": trace.budget, "scheduled": trace.scheduled, "note": trace.note,
        "conditions": [driver.dump_system(c) for c in trace.conditions],
        "links": [None if l is None else driver.dump_emb(l) for l in trace.links],
        "stages": stages,
    }
    return docs.wrap("construction-trace", payload)


def trace_from_doc(doc: dict) -> tuple[BuildDriver, ConstructionTrace]:
    _, p = docs.unwrap(doc, "construction-trace")
    try:
        driver = get_build_driver(p["driver"])
        conds = [driver.load_system(c) for c in p["conditions"]]
        links = [None if l is None else driver.load_emb(l, conds[k], conds[k + 1])
                 for k, l in enumerate(p["links"])]
        stages = []
        for d in p["stages"]:
            req = driver.load_system(d["requirement"])
            cond = conds[d["condition"]]
            st = Stage(d["kind"], req, d["condition"], driver.load_emb(d["witness"], req, cond))
            if st.kind in ("dense", "hat"):
                st.origin = driver.load_system(d["origin"])
            if st.kind == "hat":
                st.into = driver.load_emb(d["into"], driver.reduce(st.origin), req)
            elif st.kind == "extension":
                st.parent = d["parent"]
                st.into = driver.load_emb(d["into"], stages[st.parent].requirement, req)
            stages.append(st)
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedError(f"bad construction trace: {exc}") from exc
    trace = ConstructionTrace(p["driver"], p["mode"], conds, links, stages, p["complete"],
                              p["budget"], p.get("scheduled", 0), p.get("note", ""))
    return driver, trace
