"""Finite metric spaces with rational distances, their joint embeddings and
the shortest-path amalgam over a common subspace."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from typing import Mapping

from .core import DomainError, MalformedError, rational

Point = str


@dataclass(frozen=True)
class FiniteMetricSpace:
    points: tuple[Point, ...]
    dist: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise MalformedError("metric spaces must be nonempty")
        if len(set(pts)) != len(pts):
            raise MalformedError("duplicate point labels")
        d = tuple(tuple(rational(x) for x in row) for row in self.dist)
        n = len(pts)
        if len(d) != n or any(len(row) != n for row in d):
            raise MalformedError("distance matrix has the wrong shape")
        for i in range(n):
            if d[i][i] != 0:
                raise MalformedError("self-distance must be 0")
            for j in range(i + 1, n):
                if d[i][j] != d[j][i] or d[i][j] <= 0:
                    raise MalformedError("distances must be symmetric and positive")
        for i, j, k in permutations(range(n), 3):
            if d[i][k] > d[i][j] + d[j][k]:
                raise MalformedError("triangle inequality fails")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "_ix", {p: i for i, p in enumerate(pts)})

    @classmethod
    def from_pairs(cls, points, pairs: Mapping[tuple[Point, Point], object]) -> "FiniteMetricSpace":
        points = tuple(points)
        ix = {p: i for i, p in enumerate(points)}
        d = [[Fraction(0)] * len(points) for _ in points]
        for (x, y), v in pairs.items():
            d[ix[x]][ix[y]] = d[ix[y]][ix[x]] = rational(v)
        return cls(points, tuple(map(tuple, d)))

    def d(self, x: Point, y: Point) -> Fraction:
        return self.dist[self._ix[x]][self._ix[y]]

    def __contains__(self, p) -> bool:
        return p in self._ix

    @property
    def diameter(self) -> Fraction:
        return max((self.d(x, y) for x in self.points for y in self.points), default=Fraction(0))

    def restrict(self, pts) -> "FiniteMetricSpace":
        pts = tuple(p for p in self.points if p in set(pts))
        return FiniteMetricSpace(pts, tuple(tuple(self.d(x, y) for y in pts) for x in pts))


def isometry_failures(space: FiniteMetricSpace, mapping: Mapping[Point, Point]) -> list[str]:
    out = []
    if len(set(mapping.values())) != len(mapping):
        out.append("map is not injective")
    for x, y in list(mapping.items()):
        if x not in space or y not in space:
            out.append(f"{x}->{y} leaves the space")
    if out:
        return out
    for x, y in combinations(mapping, 2):
        if space.d(x, y) != space.d(mapping[x], mapping[y]):
            out.append(f"distance {x},{y} not preserved")
    return out


@dataclass(frozen=True)
class MetricSystem:
    space: FiniteMetricSpace
    isos: tuple[tuple[tuple[Point, Point], ...], ...]  # each a sorted pair list

    def __post_init__(self):
        isos = tuple(tuple(sorted(dict(m).items())) for m in self.isos)
        if not isos:
            raise MalformedError("a metric system needs at least one partial isometry")
        for m in isos:
            bad = isometry_failures(self.space, dict(m))
            if bad:
                raise MalformedError("; ".join(bad))
        object.__setattr__(self, "isos", isos)

    @property
    def n(self) -> int:
        return len(self.isos)

    def maps(self) -> list[dict]:
        return [dict(m) for m in self.isos]


def metric_embedding_failures(emb: Mapping[Point, Point], S: MetricSystem, T: MetricSystem) -> list[str]:
    """An embedding is an isometric injection with e psi_i contained in phi_i e."""
    out = []
    if set(emb) != set(S.space.points):
        return ["embedding must be defined on every point"]
    if len(set(emb.values())) != len(emb):
        out.append("embedding is not injective")
    for x, y in combinations(S.space.points, 2):
        if S.space.d(x, y) != T.space.d(emb[x], emb[y]):
            out.append(f"distance {x},{y} not preserved")
    if S.n != T.n:
        return out + ["systems have different arity"]
    for psi, phi in zip(S.maps(), T.maps()):
        for x, y in psi.items():
            if phi.get(emb[x]) != emb[y]:
                out.append(f"square fails at {x}")
    return out


def jep_metric_systems(S: MetricSystem, T: MetricSystem):
    """Disjoint union with every cross distance diam(S) + diam(T) + 1."""
    if S.n != T.n:
        raise DomainError("systems have different arity")
    k = S.space.diameter + T.space.diameter + 1
    e_S = {p: f"s.{p}" for p in S.space.points}
    e_T = {p: f"t.{p}" for p in T.space.points}
    pts = tuple(e_S.values()) + tuple(e_T.values())
    pairs = {}
    for x, y in combinations(S.space.points, 2):
        pairs[(e_S[x], e_S[y])] = S.space.d(x, y)
    for x, y in combinations(T.space.points, 2):
        pairs[(e_T[x], e_T[y])] = T.space.d(x, y)
    for x in S.space.points:
        for y in T.space.points:
            pairs[(e_S[x], e_T[y])] = k
    space = FiniteMetricSpace.from_pairs(pts, pairs)
    isos = []
    for psi, phi in zip(S.maps(), T.maps()):
        chi = {e_S[x]: e_S[y] for x, y in psi.items()}
        chi.update({e_T[x]: e_T[y] for x, y in phi.items()})
        isos.append(tuple(chi.items()))
    U = MetricSystem(space, tuple(isos))
    for e, src in ((e_S, S), (e_T, T)):
        bad = metric_embedding_failures(e, src, U)
        if bad:
            raise AssertionError("; ".join(bad))
    return U, e_S, e_T


def amalgamate_metric(B: FiniteMetricSpace, C: FiniteMetricSpace) -> FiniteMetricSpace:
    """Amalgam of B and C over their shared points A, with
    d(x, y) = min over z in A of d_B(x, z) + d_C(z, y) across the sides."""
    shared = [p for p in B.points if p in C]
    if not shared:
        raise DomainError("spaces share no points to amalgamate over")
    for x, y in combinations(shared, 2):
        if B.d(x, y) != C.d(x, y):
            raise DomainError(f"shared points {x},{y} have different distances")
    pts = B.points + tuple(p for p in C.points if p not in B)
    pairs = {}
    for x, y in combinations(pts, 2):
        if x in B and y in B:
            pairs[(x, y)] = B.d(x, y)
        elif x in C and y in C:
            pairs[(x, y)] = C.d(x, y)
        else:
            b, c = (x, y) if x in B else (y, x)
            pairs[(x, y)] = min(B.d(b, z) + C.d(z, c) for z in shared)
    return FiniteMetricSpace.from_pairs(pts, pairs)


def union_isometry(phi: Mapping[Point, Point], B: FiniteMetricSpace,
                   chi: Mapping[Point, Point], C: FiniteMetricSpace,
                   amalgam: FiniteMetricSpace | None = None) -> dict[Point, Point]:
    """theta = phi u chi on the amalgam of B and C, checked pair by pair."""
    for m, space in ((phi, B), (chi, C)):
        bad = isometry_failures(space, m)
        if bad:
            raise MalformedError("; ".join(bad))
    shared = {p for p in B.points if p in C}
    for z in shared:
        if (z in phi) != (z in chi) or phi.get(z) != chi.get(z):
            raise DomainError(f"maps disagree on shared point {z}")
    for m in (phi, chi):
        for x, y in m.items():
            if (x in shared) != (y in shared):
                raise DomainError("maps must send shared points to shared points")
    if amalgam is None:
        amalgam = amalgamate_metric(B, C)
    theta = dict(phi)
    theta.update(chi)
    bad = isometry_failures(amalgam, theta)
    if bad:
        raise DomainError("; ".join(bad))
    return theta
