"""Small relational classes given by a label on each pair of distinct points
and a constraint on triples, with systems of partial isomorphisms and an
exhaustive amalgam search."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations, product
from typing import Callable, Iterator, Optional, Sequence

from .core import MalformedError

Pair = tuple[int, int]


@dataclass(frozen=True)
class RelationalClass:
    name: str
    alphabet: tuple
    flip: Callable[[object], object]
    triple_ok: Callable[[object, object, object], bool]  # labels of (x,y), (y,z), (x,z)


def _no_flip(a):
    return a


def _equiv2_ok(xy, yz, xz) -> bool:
    if xy == "=" and yz == "=" and xz != "=":
        return False
    return not (xy == yz == xz == "!")


def _order_ok(xy, yz, xz) -> bool:
    return not (xy == "<" and yz == "<" and xz != "<")


EQUIV2 = RelationalClass("equiv2", ("=", "!"), _no_flip, _equiv2_ok)
LINEAR_ORDER = RelationalClass("linear-order", ("<", ">"), lambda a: "<" if a == ">" else ">", _order_ok)
GRAPH = RelationalClass("graph", (0, 1), _no_flip, lambda *_: True)
METRIC12 = RelationalClass("metric", (1, 2), _no_flip, lambda xy, yz, xz: xz <= xy + yz)


def pair_list(size: int) -> list[Pair]:
    return list(combinations(range(size), 2))


@dataclass(frozen=True)
class RelSystem:
    """Points 0..size-1, one label per pair i < j, and n partial maps."""

    size: int
    labels: tuple
    isos: tuple[tuple[Pair, ...], ...]

    def label(self, x: int, y: int, cls: RelationalClass):
        i = self._pix[(min(x, y), max(x, y))]
        a = self.labels[i]
        return a if x < y else cls.flip(a)

    def __post_init__(self):
        if len(self.labels) != self.size * (self.size - 1) // 2:
            raise MalformedError("one label per pair of points is required")
        isos = tuple(tuple(sorted(m)) for m in self.isos)
        for m in isos:
            dom = [x for x, _ in m]
            ran = [y for _, y in m]
            if len(set(dom)) != len(dom) or len(set(ran)) != len(ran):
                raise MalformedError("partial maps must be injective")
            if any(not (0 <= p < self.size) for p in dom + ran):
                raise MalformedError("partial map leaves the structure")
        object.__setattr__(self, "isos", isos)
        object.__setattr__(self, "_pix", {p: i for i, p in enumerate(pair_list(self.size))})

    @property
    def n(self) -> int:
        return len(self.isos)

    def maps(self) -> list[dict]:
        return [dict(m) for m in self.isos]


def structure_ok(cls: RelationalClass, size: int, lab: Callable[[int, int], object]) -> bool:
    return all(cls.triple_ok(lab(x, y), lab(y, z), lab(x, z))
               for x, y, z in permutations(range(size), 3))


def system_ok(cls: RelationalClass, S: RelSystem) -> bool:
    if not structure_ok(cls, S.size, lambda x, y: S.label(x, y, cls)):
        return False
    for m in S.maps():
        for x, y in combinations(m, 2):
            if S.label(x, y, cls) != S.label(m[x], m[y], cls):
                return False
    return True


def relabel(cls: RelationalClass, S: RelSystem, perm: Sequence[int]) -> RelSystem:
    """Copy of S with point x renamed perm[x]."""
    inv = {perm[x]: x for x in range(S.size)}
    labels = tuple(S.label(inv[i], inv[j], cls) for i, j in pair_list(S.size))
    isos = tuple(tuple((perm[x], perm[y]) for x, y in m) for m in S.isos)
    return RelSystem(S.size, labels, isos)


def _key(S: RelSystem) -> tuple:
    return (S.size, tuple(map(str, S.labels)), S.isos)


def canonical(cls: RelationalClass, S: RelSystem) -> RelSystem:
    return min((relabel(cls, S, p) for p in permutations(range(S.size))), key=_key)


def embedding_failures(cls: RelationalClass, e: Sequence[int], S: RelSystem, T: RelSystem) -> list[str]:
    out = []
    if len(e) != S.size or len(set(e)) != len(e) or any(not 0 <= v < T.size for v in e):
        return ["embedding must be an injection into the target"]
    for x, y in combinations(range(S.size), 2):
        if S.label(x, y, cls) != T.label(e[x], e[y], cls):
            out.append(f"pair {x},{y} changes label")
    if S.n != T.n:
        return out + ["different arity"]
    for psi, phi in zip(S.maps(), T.maps()):
        for x, y in psi.items():
            if phi.get(e[x]) != e[y]:
                out.append(f"square fails at {x}")
    return out


def all_systems(cls: RelationalClass, n: int, max_size: int, min_size: int = 1) -> list[RelSystem]:
    """Every n-system with min_size..max_size points, one per isomorphism type."""
    seen = set()
    out = []
    for size in range(min_size, max_size + 1):
        pts = range(size)
        structs = []
        for labels in product(cls.alphabet, repeat=len(pair_list(size))):
            S0 = RelSystem(size, labels, ())
            if structure_ok(cls, size, lambda x, y: S0.label(x, y, cls)):
                structs.append(labels)
        maps = []
        for k in range(size + 1):
            for dom in combinations(pts, k):
                for ran in permutations(pts, k):
                    maps.append(tuple(zip(dom, ran)))
        for labels in structs:
            S0 = RelSystem(size, labels, ())
            good = [m for m in maps if all(S0.label(x, y, cls) == S0.label(u, v, cls)
                                           for (x, u), (y, v) in combinations(m, 2))]
            for isos in product(good, repeat=n):
                S = canonical(cls, RelSystem(size, labels, isos))
                k = _key(S)
                if k not in seen:
                    seen.add(k)
                    out.append(S)
    return sorted(out, key=_key)


# ------------------------------------------------------------------- search


@dataclass(frozen=True)
class RelAmalgam:
    system: RelSystem
    left: tuple[int, ...]
    right: tuple[int, ...]


def _matchings(left: list[int], right: list[int]) -> Iterator[list[Pair]]:
    """Partial injective matchings, smallest first."""
    for k in range(min(len(left), len(right)) + 1):
        for ls in combinations(left, k):
            for rs in permutations(right, k):
                yield list(zip(ls, rs))


def amalgam_search(cls: RelationalClass, T1: RelSystem, T2: RelSystem,
                   forced: Sequence[Pair] = ()) -> Optional[RelAmalgam]:
    """First system U with embeddings of T1 and T2 identifying each forced
    pair (x1, x2), searching every gluing of the remaining points and every
    labeling of the new cross pairs.  U is covered by the two images, so this
    is exhaustive for amalgams of any size."""
    if T1.n != T2.n:
        return None
    forced = list(forced)
    f1 = {a for a, _ in forced}
    f2 = {b for _, b in forced}
    rest1 = [x for x in range(T1.size) if x not in f1]
    rest2 = [y for y in range(T2.size) if y not in f2]
    for extra in _matchings(rest1, rest2):
        glue = dict((b, a) for a, b in forced + extra)
        if not _glue_consistent(cls, T1, T2, glue):
            continue
        new = [y for y in range(T2.size) if y not in glue]
        emb2 = dict(glue)
        for i, y in enumerate(new):
            emb2[y] = T1.size + i
        size = T1.size + len(new)
        chis = []
        ok = True
        for psi, phi in zip(T1.maps(), T2.maps()):
            chi = dict(psi)
            for x, y in phi.items():
                u, v = emb2[x], emb2[y]
                if chi.setdefault(u, v) != v:
                    ok = False
            if len(set(chi.values())) != len(chi):
                ok = False
            chis.append(chi)
        if not ok:
            continue
        found = _label_search(cls, T1, T2, emb2, size, chis)
        if found is not None:
            U = RelSystem(size, found, tuple(tuple(sorted(c.items())) for c in chis))
            return RelAmalgam(U, tuple(range(T1.size)), tuple(emb2[y] for y in range(T2.size)))
    return None


def _glue_consistent(cls, T1, T2, glue: dict) -> bool:
    items = list(glue.items())
    for (b, a), (d, c) in combinations(items, 2):
        if T1.label(a, c, cls) != T2.label(b, d, cls):
            return False
    return True


def _label_search(cls, T1, T2, emb2, size, chis) -> Optional[tuple]:
    known: dict[Pair, object] = {}
    for x, y in pair_list(T1.size):
        known[(x, y)] = T1.label(x, y, cls)
    for x, y in combinations(range(T2.size), 2):
        u, v = emb2[x], emb2[y]
        a = T2.label(x, y, cls)
        known[(min(u, v), max(u, v))] = a if u < v else cls.flip(a)
    pairs = pair_list(size)
    free = [p for p in pairs if p not in known]
    lab = dict(known)

    def L(x, y):
        return lab[(x, y)] if x < y else cls.flip(lab[(y, x)])

    def has(x, y):
        return (min(x, y), max(x, y)) in lab

    constraints = []  # ((x, y), (u, v)) with L(x, y) == L(u, v)
    for chi in chis:
        for x, y in combinations(chi, 2):
            constraints.append(((x, y), (chi[x], chi[y])))
    touching: dict[Pair, list] = {p: [] for p in pairs}
    for c in constraints:
        for x, y in c:
            touching[(min(x, y), max(x, y))].append(c)

    def ok_at(p: Pair) -> bool:
        x, y = p
        for z in range(size):
            if z in p:
                continue
            if has(x, z) and has(y, z):
                for a, b, c in permutations((x, y, z)):
                    if not cls.triple_ok(L(a, b), L(b, c), L(a, c)):
                        return False
        for (a, b), (c, d) in touching[p]:
            if has(a, b) and has(c, d) and L(a, b) != L(c, d):
                return False
        return True

    for (a, b), (c, d) in constraints:
        if has(a, b) and has(c, d) and L(a, b) != L(c, d):
            return None

    def go(i: int) -> bool:
        if i == len(free):
            return True
        p = free[i]
        for a in cls.alphabet:
            lab[p] = a
            if ok_at(p) and go(i + 1):
                return True
        del lab[p]
        return False

    if not free:
        if not structure_ok(cls, size, L):
            return None
        return tuple(lab[p] for p in pairs)
    if go(0):
        return tuple(lab[p] for p in pairs)
    return None


def one_point_extensions(cls: RelationalClass, S: RelSystem) -> list[tuple[RelSystem, tuple]]:
    """Extensions of S adding one map pair among its points or one new point
    (with any labels and any new map pairs at that point), with embeddings."""
    out = []
    ident = tuple(range(S.size))
    for i, m in enumerate(S.maps()):
        for x in range(S.size):
            if x in m:
                continue
            for y in range(S.size):
                if y in m.values():
                    continue
                mm = dict(m)
                mm[x] = y
                isos = list(S.isos)
                isos[i] = tuple(sorted(mm.items()))
                T = RelSystem(S.size, S.labels, tuple(isos))
                if system_ok(cls, T):
                    out.append((T, ident))
    new = S.size
    for labs in product(cls.alphabet, repeat=S.size):
        T0 = RelSystem(S.size + 1, _extend_labels(S, labs), S.isos)
        if not structure_ok(cls, T0.size, lambda x, y: T0.label(x, y, cls)):
            continue
        options = []
        for m in S.maps():
            opts = [m]
            for y in range(S.size + 1):
                if y not in m.values():
                    opts.append({**m, new: y})
            for x in range(S.size):
                if x not in m:
                    opts.append({**m, x: new})
            options.append(opts)
        for choice in product(*options):
            T = RelSystem(T0.size, T0.labels, tuple(tuple(sorted(c.items())) for c in choice))
            if system_ok(cls, T):
                out.append((T, ident))
    return out


def _extend_labels(S: RelSystem, labs) -> tuple:
    """Labels of S plus a new point S.size with label labs[x] on (x, new)."""
    size = S.size + 1
    out = []
    for x, y in pair_list(size):
        out.append(labs[x] if y == S.size else S.labels[S._pix[(x, y)]])
    return tuple(out)


def extensions_up_to(cls: RelationalClass, S: RelSystem, max_size: int) -> Iterator[tuple[RelSystem, tuple]]:
    """Extensions of S (containing S on points 0..|S|-1) with at most
    max_size points, breadth first by one-point steps, deduplicated."""
    seen = {_key(S)}
    ident = tuple(range(S.size))
    frontier = [S]
    yield S, ident
    while frontier:
        nxt = []
        for T in frontier:
            for U, _ in one_point_extensions(cls, T):
                k = _key(U)
                if U.size > max_size or k in seen:
                    continue
                seen.add(k)
                nxt.append(U)
                yield U, ident
        frontier = nxt
