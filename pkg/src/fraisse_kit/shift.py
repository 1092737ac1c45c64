"""Independence of a coordinate window from its image under a power of the
Bernoulli shift, checked on cylinder atoms of a finite truncation."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .core import DomainError


@dataclass(frozen=True)
class ShiftCertificate:
    k: int
    power: int
    depth: int
    window_atoms: int
    pairs_checked: int
    product_atoms: int
    smaller_powers_fail: tuple[int, ...]


def window(k: int, shift: int = 0) -> list[int]:
    return [i + shift for i in range(-k, k + 1)]


def _product_atoms(k: int, p: int) -> tuple[int, int]:
    """Count pairs of window cylinders and the nonzero meets of a cylinder
    with a p-shifted cylinder (consistent on shared coordinates)."""
    w0, w1 = window(k), window(k, p)
    shared = sorted(set(w0) & set(w1))
    pairs = 0
    meets = 0
    for x in product((0, 1), repeat=len(w0)):
        a = dict(zip(w0, x))
        for y in product((0, 1), repeat=len(w1)):
            pairs += 1
            b = dict(zip(w1, y))
            if all(a[i] == b[i] for i in shared):
                meets += 1
    return pairs, meets


def independent(k: int, p: int) -> bool:
    pairs, meets = _product_atoms(k, p)
    return pairs == meets


def shift_independence(k: int, depth: int) -> ShiftCertificate:
    """Power p = 2k+1 of the shift moves the window [-k, k] onto a window
    independent of it: every pair of nonzero cylinders meets, so the joint
    algebra has 2^(2(2k+1)) atoms.  Smaller positive powers are shown to fail."""
    if k < 0:
        raise DomainError("window radius must be nonnegative")
    p = 2 * k + 1
    if depth < 2 * p:
        raise DomainError(f"depth {depth} cannot hold the shifted window; need {2 * p}")
    pairs, meets = _product_atoms(k, p)
    if pairs != meets or meets != 2 ** (2 * p):
        raise AssertionError("shifted window is not independent")
    fails = tuple(q for q in range(1, p) if not independent(k, q))
    if len(fails) != p - 1:
        raise AssertionError("a smaller power already gives independence")
    return ShiftCertificate(k, p, depth, 2 ** p, pairs, meets, fails)


def zigzag(i: int) -> int:
    """Relabel a coordinate of 2^Z as a coordinate of 2^N."""
    return 2 * i if i >= 0 else -2 * i - 1


def unzigzag(n: int) -> int:
    return n // 2 if n % 2 == 0 else -(n + 1) // 2
