"""Helpers shared by the test modules: brute-force lattice oracles and corpus runs."""
from __future__ import annotations

import random
from itertools import product

from p4ifc.errors import NotALattice
from p4ifc.lattice import Lattice


def closure(elements, pairs) -> set[tuple[str, str]]:
    """Reflexive-transitive closure by naive fixpoint iteration."""
    rel = {(x, x) for x in elements} | set(pairs)
    while True:
        extra = {(a, d) for (a, b), (c, d) in product(rel, rel) if b == c} - rel
        if not extra:
            return rel
        rel |= extra


def brute_join(elements, rel, a, b):
    ubs = [z for z in elements if (a, z) in rel and (b, z) in rel]
    least = [z for z in ubs if all((z, w) in rel for w in ubs)]
    assert len(least) == 1
    return least[0]


def brute_meet(elements, rel, a, b):
    lbs = [z for z in elements if (z, a) in rel and (z, b) in rel]
    great = [z for z in lbs if all((w, z) in rel for w in lbs)]
    assert len(great) == 1
    return great[0]


def random_lattice(seed: int, size: int = 6) -> tuple[Lattice, list[tuple[str, str]]]:
    """A random lattice with size elements plus its generating cover pairs."""
    rng = random.Random(seed)
    while True:
        mids = [f"m{i}" for i in range(size - 2)]
        pairs = [(a, b) for i, a in enumerate(mids) for b in mids[i + 1 :] if rng.random() < 0.35]
        below = {b for _, b in pairs}
        above = {a for a, _ in pairs}
        pairs += [("bot", m) for m in mids if m not in below]
        pairs += [(m, "top") for m in mids if m not in above]
        if not mids:
            pairs.append(("bot", "top"))
        try:
            return Lattice(["bot", *mids, "top"], pairs, name=f"random-{seed}"), pairs
        except NotALattice:
            continue
