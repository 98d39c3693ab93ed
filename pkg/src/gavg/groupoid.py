"""Finite groupoids as dense integer tables, with validated axioms.

A groupoid here is a finite category with all arrows invertible: objects and
arrows carry dense integer ids, composition is a dense table with -1 marking
non-composable pairs, and ``comp[gp, g]`` is "g first, then gp" (so it is
defined exactly when ``src[gp] == tgt[g]``). Finiteness makes every groupoid
proper, so the Haar machinery downstream applies unconditionally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput


@dataclass
class Violation:
    rule: str
    witness: tuple
    detail: str


@dataclass
class ValidationReport:
    """Outcome of an exhaustive axiom check; empty violations means valid."""

    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, rule: str, witness: tuple, detail: str):
        self.violations.append(Violation(rule, witness, detail))

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"rule": v.rule, "witness": list(v.witness), "detail": v.detail}
                for v in self.violations
            ],
        }


def _as_readonly(a):
    a = np.asarray(a, dtype=np.int64)
    a.flags.writeable = False
    return a


@dataclass(eq=False)
class FiniteGroupoid:
    """Object/arrow tables of a finite groupoid. Immutable after construction."""

    n_objects: int
    src: np.ndarray  # (n_arrows,) object id per arrow
    tgt: np.ndarray  # (n_arrows,)
    unit: np.ndarray  # (n_objects,) arrow id of 1_x
    inv: np.ndarray  # (n_arrows,)
    comp: np.ndarray  # (n_arrows, n_arrows), comp[gp, g] = gp after g, -1 if undefined

    def __post_init__(self):
        self.src = _as_readonly(self.src)
        self.tgt = _as_readonly(self.tgt)
        self.unit = _as_readonly(self.unit)
        self.inv = _as_readonly(self.inv)
        self.comp = _as_readonly(np.asarray(self.comp).reshape(len(self.src), len(self.src)))
        _check_structure(self)

    @property
    def n_arrows(self) -> int:
        return len(self.src)

    def is_composable(self, gp: int, g: int) -> bool:
        return self.src[gp] == self.tgt[g]

    def compose(self, gp: int, g: int) -> int:
        """Composite arrow "g then gp"; raises on non-composable pairs."""
        r = int(self.comp[gp, g])
        if r < 0:
            raise InvalidInput(f"arrows not composable: src({gp})={self.src[gp]} != tgt({g})={self.tgt[g]}")
        return r

    def target_fiber(self, x: int) -> np.ndarray:
        """Arrows with target x, in ascending arrow-id order."""
        if not 0 <= x < self.n_objects:
            raise InvalidInput(f"unknown object id {x}")
        return np.flatnonzero(self.tgt == x)

    def divide(self, g: int, h: int) -> int:
        """The ratio g h^-1 of a divisible pair (src g = src h)."""
        if self.src[g] != self.src[h]:
            raise InvalidInput(f"pair ({g},{h}) not divisible: src {self.src[g]} != {self.src[h]}")
        return self.compose(g, int(self.inv[h]))

    def composable_pairs(self) -> np.ndarray:
        """All (gp, g) with src gp = tgt g, lexicographically ordered, shape (n, 2)."""
        gp, g = np.nonzero(self.src[:, None] == self.tgt[None, :])
        return np.stack([gp, g], axis=1)

    def orbits(self) -> OrbitDecomposition:
        return orbits(self)


@dataclass(frozen=True)
class DivisiblePair:
    g: int
    h: int


def divide(gpd: FiniteGroupoid, pair: DivisiblePair) -> int:
    """The ratio g h^-1 of a divisible pair."""
    return gpd.divide(pair.g, pair.h)


@dataclass(frozen=True)
class InvariantSubset:
    """A set of objects closed under the orbit relation."""

    objects: frozenset[int]

    @staticmethod
    def of(ids) -> "InvariantSubset":
        return InvariantSubset(frozenset(int(i) for i in ids))


@dataclass
class OrbitDecomposition:
    """Partition of the objects into connected components of the arrow graph."""

    orbits: list[tuple[int, ...]]  # each sorted ascending; list sorted by least member
    orbit_of: np.ndarray  # (n_objects,) orbit index per object


def _check_structure(gpd: FiniteGroupoid):
    """Structural well-formedness (index ranges and shapes); raises InvalidInput."""
    n, a = gpd.n_objects, gpd.n_arrows
    if n < 0:
        raise InvalidInput("negative object count")
    if gpd.unit.shape != (n,):
        raise InvalidInput(f"unit table has shape {gpd.unit.shape}, expected ({n},)")
    if gpd.inv.shape != (a,) or gpd.tgt.shape != (a,):
        raise InvalidInput("src/tgt/inv tables must all have one entry per arrow")
    for name, arr, hi in (("src", gpd.src, n), ("tgt", gpd.tgt, n),
                          ("unit", gpd.unit, a), ("inv", gpd.inv, a)):
        if arr.size and (arr.min() < 0 or arr.max() >= hi):
            raise InvalidInput(f"{name} table references id out of range")
    if gpd.comp.size and gpd.comp.max() >= a:
        raise InvalidInput("composition table references arrow id out of range")
    if gpd.comp.size and gpd.comp.min() < -1:
        raise InvalidInput("composition table entries must be arrow ids or -1")


def validate(gpd: FiniteGroupoid) -> ValidationReport:
    """Exhaustive check of the groupoid axioms; the report lists every violation."""
    rep = ValidationReport()
    src, tgt, unit, inv, comp = gpd.src, gpd.tgt, gpd.unit, gpd.inv, gpd.comp

    for x in range(gpd.n_objects):
        u = int(unit[x])
        if src[u] != x or tgt[u] != x:
            rep.add("unit-endpoint", (x, u),
                    f"unit of object {x} has src {src[u]}, tgt {tgt[u]}")

    composable = src[:, None] == tgt[None, :]
    defined = comp >= 0
    for gp, g in zip(*np.nonzero(composable != defined)):
        gp, g = int(gp), int(g)
        if composable[gp, g]:
            rep.add("composability-domain", (gp, g),
                    f"comp({gp},{g}) undefined although src({gp})=tgt({g})")
        else:
            rep.add("composability-domain", (gp, g),
                    f"comp({gp},{g}) defined although src({gp})={src[gp]} != tgt({g})={tgt[g]}")

    pairs = np.stack(np.nonzero(composable & defined), axis=1)
    for gp, g in pairs:
        gp, g, r = int(gp), int(g), int(comp[gp, g])
        if src[r] != src[g] or tgt[r] != tgt[gp]:
            rep.add("composition-endpoints", (gp, g, r),
                    f"comp({gp},{g})={r} has endpoints ({src[r]},{tgt[r]}), "
                    f"expected ({src[g]},{tgt[gp]})")

    for g in range(gpd.n_arrows):
        ur, ul = int(unit[src[g]]), int(unit[tgt[g]])
        if comp[g, ur] != g:
            rep.add("right-unit", (g, ur), f"comp({g},1_src)={comp[g, ur]} != {g}")
        if comp[ul, g] != g:
            rep.add("left-unit", (ul, g), f"comp(1_tgt,{g})={comp[ul, g]} != {g}")
        gi = int(inv[g])
        if src[gi] != tgt[g] or tgt[gi] != src[g]:
            rep.add("inverse-endpoint", (g, gi),
                    f"inv({g})={gi} has endpoints ({src[gi]},{tgt[gi]})")
            continue
        if comp[g, gi] != unit[tgt[g]]:
            rep.add("right-inverse", (g, gi),
                    f"comp({g},inv {g})={comp[g, gi]} != 1_tgt={unit[tgt[g]]}")
        if comp[gi, g] != unit[src[g]]:
            rep.add("left-inverse", (gi, g),
                    f"comp(inv {g},{g})={comp[gi, g]} != 1_src={unit[src[g]]}")

    # associativity over all composable triples (g2 after g1 after g0)
    for g1, g0 in pairs:
        g1, g0 = int(g1), int(g0)
        r10 = int(comp[g1, g0])
        if r10 < 0:
            continue
        for g2 in np.flatnonzero(src == tgt[g1]):
            g2 = int(g2)
            left = comp[g2, g1]
            if left < 0 or comp[int(left), g0] < 0 or comp[g2, r10] < 0:
                continue  # domain errors already reported
            if comp[int(left), g0] != comp[g2, r10]:
                rep.add("associativity", (g2, g1, g0),
                        f"(g2 g1) g0 = {comp[int(left), g0]} != g2 (g1 g0) = {comp[g2, r10]}")
    return rep


def orbits(gpd: FiniteGroupoid) -> OrbitDecomposition:
    """Connected components of objects under the src/tgt reachability relation."""
    parent = list(range(gpd.n_objects))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in range(gpd.n_arrows):
        a, b = find(int(gpd.src[g])), find(int(gpd.tgt[g]))
        if a != b:
            parent[max(a, b)] = min(a, b)

    groups: dict[int, list[int]] = {}
    for x in range(gpd.n_objects):
        groups.setdefault(find(x), []).append(x)
    orbs = [tuple(sorted(v)) for _, v in sorted(groups.items())]
    orbit_of = np.empty(gpd.n_objects, dtype=np.int64)
    for i, orb in enumerate(orbs):
        for x in orb:
            orbit_of[x] = i
    return OrbitDecomposition(orbs, orbit_of)


def check_invariant(gpd: FiniteGroupoid, subset: InvariantSubset) -> ValidationReport:
    """Closure of a subset under the orbit relation: src in S implies tgt in S."""
    rep = ValidationReport()
    sub = subset.objects
    for x in sub:
        if not 0 <= x < gpd.n_objects:
            rep.add("unknown-object", (x,), f"object {x} not in groupoid")
    for g in range(gpd.n_arrows):
        s, t = int(gpd.src[g]), int(gpd.tgt[g])
        if (s in sub) != (t in sub):
            rep.add("orbit-closure", (g, s, t),
                    f"arrow {g} crosses the subset boundary ({s} -> {t})")
    return rep


def invariant_subsets(gpd: FiniteGroupoid) -> list[InvariantSubset]:
    """All invariant subsets, i.e. all unions of orbits (including the empty one)."""
    orbs = orbits(gpd).orbits
    out = []
    for r in range(len(orbs) + 1):
        for combo in itertools.combinations(range(len(orbs)), r):
            out.append(InvariantSubset.of(itertools.chain(*(orbs[i] for i in combo))))
    return out


# ---------------------------------------------------------------------------
# constructors

def _identity_of(table: np.ndarray) -> int:
    n = len(table)
    for e in range(n):
        if all(table[e][x] == x and table[x][e] == x for x in range(n)):
            return e
    raise InvalidInput("multiplication table has no identity element")


def _group_inverses(table: np.ndarray, e: int) -> list[int]:
    n = len(table)
    invs = []
    for x in range(n):
        found = [y for y in range(n) if table[x][y] == e and table[y][x] == e]
        if not found:
            raise InvalidInput(f"element {x} has no inverse in multiplication table")
        invs.append(found[0])
    return invs


def one_object_group(table) -> FiniteGroupoid:
    """Groupoid with one object from a group multiplication table t[a][b] = a*b."""
    table = np.asarray(table, dtype=np.int64)
    n = len(table)
    if table.shape != (n, n) or (table.size and (table.min() < 0 or table.max() >= n)):
        raise InvalidInput("multiplication table must be square over element ids")
    e = _identity_of(table)
    invs = _group_inverses(table, e)
    return FiniteGroupoid(
        n_objects=1,
        src=np.zeros(n, dtype=np.int64),
        tgt=np.zeros(n, dtype=np.int64),
        unit=np.array([e]),
        inv=np.array(invs),
        comp=table.copy(),
    )


def pair_groupoid(n: int) -> FiniteGroupoid:
    """Pair groupoid on n objects: one arrow (y <- x) per ordered pair, id y*n + x."""
    if n < 1:
        raise InvalidInput("pair groupoid needs at least one object")
    ids = np.arange(n * n)
    tgt, src = divmod(ids, n)
    comp = np.full((n * n, n * n), -1, dtype=np.int64)
    for y in range(n):
        for x in range(n):
            for w in range(n):
                comp[y * n + x, x * n + w] = y * n + w  # (y<-x)(x<-w) = (y<-w)
    return FiniteGroupoid(
        n_objects=n,
        src=src,
        tgt=tgt,
        unit=np.array([x * n + x for x in range(n)]),
        inv=np.array([x * n + y for y, x in zip(tgt, src)]),
        comp=comp,
    )


def action_groupoid(table, action) -> FiniteGroupoid:
    """Translation groupoid of a finite group action.

    ``table`` is the group multiplication table, ``action[gamma][m]`` the acted
    point. Arrows are pairs (gamma, m) with id gamma*n_points + m, src m and
    tgt gamma.m; composition is (gamma', gamma.m)(gamma, m) = (gamma' gamma, m).
    """
    table = np.asarray(table, dtype=np.int64)
    action = np.asarray(action, dtype=np.int64)
    ng = len(table)
    if action.ndim != 2 or action.shape[0] != ng:
        raise InvalidInput("action map must have one row per group element")
    npts = action.shape[1]
    if action.size and (action.min() < 0 or action.max() >= npts):
        raise InvalidInput("action map references point out of range")
    e = _identity_of(table)
    if not np.array_equal(action[e], np.arange(npts)):
        raise InvalidInput("not an action: identity element moves points")
    for gp in range(ng):
        for g in range(ng):
            if not np.array_equal(action[table[gp][g]], action[gp][action[g]]):
                raise InvalidInput(f"not an action: compatibility fails at ({gp},{g})")
    invs = _group_inverses(table, e)

    n_arr = ng * npts
    src = np.tile(np.arange(npts), ng)
    tgt = action.reshape(-1)
    comp = np.full((n_arr, n_arr), -1, dtype=np.int64)
    for g in range(ng):
        for m in range(npts):
            a = g * npts + m
            gm = int(action[g][m])
            for gp in range(ng):
                comp[gp * npts + gm, a] = int(table[gp][g]) * npts + m
    return FiniteGroupoid(
        n_objects=npts,
        src=src,
        tgt=tgt,
        unit=np.array([e * npts + m for m in range(npts)]),
        inv=np.array([invs[g] * npts + int(action[g][m])
                      for g in range(ng) for m in range(npts)]),
        comp=comp,
    )


def group_bundle(tables) -> FiniteGroupoid:
    """Disjoint bundle of groups: one base point per table, src = tgt everywhere."""
    if not tables:
        raise InvalidInput("group bundle needs at least one fiber")
    return disjoint_union(*[one_object_group(t) for t in tables])


def disjoint_union(*parts: FiniteGroupoid) -> FiniteGroupoid:
    """Disjoint union with object/arrow ids relabeled blockwise in order."""
    if not parts:
        raise InvalidInput("disjoint union of nothing")
    obj_off, arr_off = 0, 0
    srcs, tgts, units, invs = [], [], [], []
    total_arrows = sum(p.n_arrows for p in parts)
    comp = np.full((total_arrows, total_arrows), -1, dtype=np.int64)
    for p in parts:
        srcs.append(p.src + obj_off)
        tgts.append(p.tgt + obj_off)
        units.append(p.unit + arr_off)
        invs.append(p.inv + arr_off)
        block = p.comp.copy()
        block[block >= 0] += arr_off
        comp[arr_off:arr_off + p.n_arrows, arr_off:arr_off + p.n_arrows] = block
        obj_off += p.n_objects
        arr_off += p.n_arrows
    return FiniteGroupoid(
        n_objects=obj_off,
        src=np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64),
        tgt=np.concatenate(tgts),
        unit=np.concatenate(units),
        inv=np.concatenate(invs),
        comp=comp,
    )


def restriction_maps(gpd: FiniteGroupoid, subset: InvariantSubset):
    """Surviving object and arrow ids (ascending) for a full restriction."""
    rep = check_invariant(gpd, subset)
    if not rep.ok:
        v = rep.violations[0]
        raise InvalidInput(f"subset is not invariant: {v.detail}")
    keep_obj = np.array(sorted(subset.objects), dtype=np.int64)
    mask = np.zeros(gpd.n_objects, dtype=bool)
    mask[keep_obj] = True
    keep_arr = np.flatnonzero(mask[gpd.src] & mask[gpd.tgt])
    return keep_obj, keep_arr


def full_restriction(gpd: FiniteGroupoid, subset: InvariantSubset) -> FiniteGroupoid:
    """Full subgroupoid over an invariant subset, ids relabeled in ascending order."""
    keep_obj, keep_arr = restriction_maps(gpd, subset)
    obj_new = np.full(gpd.n_objects, -1, dtype=np.int64)
    obj_new[keep_obj] = np.arange(len(keep_obj))
    arr_new = np.full(gpd.n_arrows, -1, dtype=np.int64)
    arr_new[keep_arr] = np.arange(len(keep_arr))

    comp = gpd.comp[np.ix_(keep_arr, keep_arr)].copy()
    defined = comp >= 0
    comp[defined] = arr_new[comp[defined]]
    return FiniteGroupoid(
        n_objects=len(keep_obj),
        src=obj_new[gpd.src[keep_arr]],
        tgt=obj_new[gpd.tgt[keep_arr]],
        unit=arr_new[gpd.unit[keep_obj]],
        inv=arr_new[gpd.inv[keep_arr]],
        comp=comp,
    )
