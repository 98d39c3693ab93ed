"""Shared test utilities: independent oracles and instance generators."""

import numpy as np

from gavg.groupoid import FiniteGroupoid
from gavg.pseudorep import FiberBundle, PseudoRep


def relabel_arrows(gpd: FiniteGroupoid, perm) -> FiniteGroupoid:
    """Groupoid with arrow ids permuted: new id perm[g] plays the role of g."""
    perm = np.asarray(perm, dtype=np.int64)
    inv_perm = np.empty_like(perm)
    inv_perm[perm] = np.arange(len(perm))
    comp = np.full_like(gpd.comp, -1)
    for gp in range(gpd.n_arrows):
        for g in range(gpd.n_arrows):
            r = gpd.comp[gp, g]
            if r >= 0:
                comp[perm[gp], perm[g]] = perm[r]
    return FiniteGroupoid(
        n_objects=gpd.n_objects,
        src=gpd.src[inv_perm],
        tgt=gpd.tgt[inv_perm],
        unit=perm[gpd.unit],
        inv=perm[gpd.inv[inv_perm]],
        comp=comp,
    )


def relabel_rep(rep: PseudoRep, perm) -> PseudoRep:
    perm = np.asarray(perm, dtype=np.int64)
    mats = [None] * len(rep.mats)
    for g, m in enumerate(rep.mats):
        mats[perm[g]] = m.copy()
    return PseudoRep(rep.bundle, mats)


def random_invertible_rep(gpd: FiniteGroupoid, rank: int, seed: int,
                          spread: float = 0.3) -> PseudoRep:
    """Unital pseudo-rep with well-conditioned random matrices off the units."""
    rng = np.random.default_rng(seed)
    units = set(int(u) for u in gpd.unit)
    mats = []
    for g in range(gpd.n_arrows):
        if g in units:
            mats.append(np.eye(rank))
        else:
            mats.append(np.eye(rank) + spread * rng.standard_normal((rank, rank)))
    return PseudoRep(FiberBundle(np.full(gpd.n_objects, rank)), mats)


def coboundary_rep(gpd: FiniteGroupoid, transports) -> PseudoRep:
    """Exact representation rep(g) = T[tgt g] inv(T[src g])."""
    mats = []
    invs = [np.linalg.inv(t) for t in transports]
    for g in range(gpd.n_arrows):
        mats.append(transports[int(gpd.tgt[g])] @ invs[int(gpd.src[g])])
    rank = [len(t) for t in transports]
    return PseudoRep(FiberBundle(np.array(rank)), mats)


def brute_force_average(gpd, haar, rep):
    """Naive reference implementation of the averaging operator."""
    nu = haar.arrow_weights(gpd)
    mats = []
    for g in range(gpd.n_arrows):
        total = None
        for k in range(gpd.n_arrows):
            if gpd.tgt[k] != gpd.src[g]:
                continue
            term = nu[k] * (rep.mats[int(gpd.comp[g, k])] @ np.linalg.inv(rep.mats[k]))
            total = term if total is None else total + term
        mats.append(total)
    return PseudoRep(rep.bundle, mats)
