"""Factor any permutation of an n x m grid as row-preserving, then
column-preserving, then row-preserving, by edge-coloring the row-to-row
multigraph with perfect matchings."""

from __future__ import annotations

from dataclasses import dataclass

from .core import MalformedError


@dataclass(frozen=True)
class GridPermutation:
    """perm[i*m + j] is the row-major index of the image of cell (i, j)."""

    n: int
    m: int
    perm: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise MalformedError("grid dimensions must be positive")
        perm = tuple(int(x) for x in self.perm)
        if sorted(perm) != list(range(self.n * self.m)):
            raise MalformedError("perm is not a bijection of the grid cells")
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, n: int, m: int) -> "GridPermutation":
        return cls(n, m, tuple(range(n * m)))

    @classmethod
    def parse(cls, n: int, m: int, text: str) -> "GridPermutation":
        try:
            perm = tuple(int(x) for x in text.split(",") if x.strip())
        except ValueError as exc:
            raise MalformedError(f"bad permutation string {text!r}") from exc
        return cls(n, m, perm)

    def __str__(self) -> str:
        return ",".join(map(str, self.perm))

    def cell(self, i: int, j: int) -> tuple[int, int]:
        return divmod(self.perm[i * self.m + j], self.m)

    def then(self, after: "GridPermutation") -> "GridPermutation":
        """``after`` applied to the result of ``self``."""
        return GridPermutation(self.n, self.m, tuple(after.perm[x] for x in self.perm))

    def keeps_rows(self) -> bool:
        return all(self.perm[k] // self.m == k // self.m for k in range(len(self.perm)))

    def keeps_columns(self) -> bool:
        return all(self.perm[k] % self.m == k % self.m for k in range(len(self.perm)))


def _matching(counts: list[list[int]], n: int) -> list[int]:
    """Perfect matching rows -> target rows on the positive entries of a
    regular count matrix (Kuhn's augmenting paths)."""
    match_of_target = [-1] * n

    def augment(r: int, seen: list[bool]) -> bool:
        for t in range(n):
            if counts[r][t] and not seen[t]:
                seen[t] = True
                if match_of_target[t] < 0 or augment(match_of_target[t], seen):
                    match_of_target[t] = r
                    return True
        return False

    for r in range(n):
        if not augment(r, [False] * n):
            raise AssertionError("regular multigraph without a perfect matching")
    out = [0] * n
    for t, r in enumerate(match_of_target):
        out[r] = t
    return out


def factor_grid_permutation(rho: GridPermutation) -> tuple[GridPermutation, GridPermutation, GridPermutation]:
    """(f1, h, f2) with rho = f1 . h . f2 (f2 applied first); f1 and f2 keep
    every cell in its row and h keeps every cell in its column."""
    n, m = rho.n, rho.m
    counts = [[0] * n for _ in range(n)]
    cells: list[list[list[int]]] = [[[] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(m):
            t = rho.perm[i * m + j] // m
            counts[i][t] += 1
            cells[i][t].append(j)
    color = {}
    for c in range(m):
        match = _matching(counts, n)
        for i, t in enumerate(match):
            counts[i][t] -= 1
            color[(i, cells[i][t].pop(0))] = c
    f2 = [0] * (n * m)
    h = list(range(n * m))
    f1 = [0] * (n * m)
    for i in range(n):
        for j in range(m):
            c = color[(i, j)]
            dest = rho.perm[i * m + j]
            t = dest // m
            f2[i * m + j] = i * m + c
            h[i * m + c] = t * m + c
            f1[t * m + c] = dest
    out = (GridPermutation(n, m, tuple(f1)), GridPermutation(n, m, tuple(h)),
           GridPermutation(n, m, tuple(f2)))
    if factorization_failures(rho, *out):
        raise AssertionError("grid factorization does not recompose")
    return out


def factorization_failures(rho, f1, h, f2) -> list[str]:
    out = []
    if not f1.keeps_rows():
        out.append("f1 moves a cell between rows")
    if not f2.keeps_rows():
        out.append("f2 moves a cell between rows")
    if not h.keeps_columns():
        out.append("h moves a cell between columns")
    if f2.then(h).then(f1).perm != rho.perm:
        out.append("f1 h f2 differs from rho")
    return out
