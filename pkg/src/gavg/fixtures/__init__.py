"""Canonical instances used by the test suite, the CLI fixtures, and the docs."""

from __future__ import annotations

import itertools
from importlib import resources

import numpy as np

from ..circle import CircleActionGroupoid, FieldTerm, FourierPolyField
from ..groupoid import (
    FiniteGroupoid,
    action_groupoid,
    disjoint_union,
    one_object_group,
    pair_groupoid,
)
from ..pseudorep import FiberBundle, PseudoRep, perturbed_representation

Z2_TABLE = [[0, 1], [1, 0]]


def z2_groupoid() -> FiniteGroupoid:
    return one_object_group(Z2_TABLE)


def z2_scalar_rep(tau: float) -> PseudoRep:
    """Scalar family on Z2: identity on the unit, tau on the flip."""
    return PseudoRep(FiberBundle(np.array([1])),
                     [np.array([[1.0]]), np.array([[float(tau)]])])


def pair2_groupoid() -> FiniteGroupoid:
    return pair_groupoid(2)


def pair2_identity_rep() -> PseudoRep:
    """The rank-2 coboundary representation with all transition matrices I."""
    return PseudoRep(FiberBundle(np.array([2, 2])), [np.eye(2) for _ in range(4)])


def pair2_perturbed_rep(amplitude: float = 5e-3, seed: int = 7) -> PseudoRep:
    gpd = pair2_groupoid()
    return perturbed_representation(gpd, pair2_identity_rep(), amplitude, seed)


# ---------------------------------------------------------------------------
# the symmetric group on three letters acting on three points

def s3_elements() -> list[tuple[int, ...]]:
    return sorted(itertools.permutations(range(3)))


def s3_table() -> list[list[int]]:
    """Multiplication table with (a b)(x) = a(b(x))."""
    elems = s3_elements()
    index = {p: i for i, p in enumerate(elems)}
    return [[index[tuple(a[b[x]] for x in range(3))] for b in elems] for a in elems]


def s3_action() -> list[list[int]]:
    """The defining action on three points."""
    return [list(p) for p in s3_elements()]


def s3_groupoid() -> FiniteGroupoid:
    return action_groupoid(s3_table(), s3_action())


def s3_standard_matrices() -> list[np.ndarray]:
    """The 2-dimensional triangle-symmetry matrices, one per element.

    Element sigma maps vertex v_i of an equilateral triangle to v_{sigma(i)};
    the matrices multiply like the permutations composed as functions.
    """
    angles = np.array([np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3])
    verts = np.stack([np.cos(angles), np.sin(angles)], axis=0)  # columns v_0, v_1, v_2
    base = verts[:, :2]
    base_inv = np.linalg.inv(base)
    mats = []
    for p in s3_elements():
        if p == (0, 1, 2):
            mats.append(np.eye(2))
            continue
        image = verts[:, [p[0], p[1]]]
        mats.append(image @ base_inv)
    return mats


def s3_rep() -> PseudoRep:
    """Rank-2 representation of the action groupoid: (sigma, m) acts by rho(sigma)."""
    gpd = s3_groupoid()
    mats = s3_standard_matrices()
    return PseudoRep(FiberBundle(np.array([2, 2, 2])),
                     [mats[g // 3].copy() for g in range(gpd.n_arrows)])


def s3_perturbed_rep(amplitude: float, seed: int) -> PseudoRep:
    return perturbed_representation(s3_groupoid(), s3_rep(), amplitude, seed)


# ---------------------------------------------------------------------------
# a two-orbit groupoid for restriction tests

def two_orbit_groupoid() -> FiniteGroupoid:
    """Disjoint union of Z2 (object 0) and the pair groupoid on {1, 2}."""
    return disjoint_union(z2_groupoid(), pair_groupoid(2))


def two_orbit_rep(amplitude: float = 1e-2, seed: int = 11) -> PseudoRep:
    """Rank 1 on the Z2 orbit (tau = 1.25), perturbed rank 2 on the pair orbit."""
    gpd = two_orbit_groupoid()
    base = PseudoRep(
        FiberBundle(np.array([1, 2, 2])),
        [np.array([[1.0]]), np.array([[1.25]])] + [np.eye(2) for _ in range(4)],
    )
    return perturbed_representation(gpd, base, amplitude, seed)


# ---------------------------------------------------------------------------
# circle-action fixtures

def circle_rotation_groupoid(order: int = 128, radii=(0.5, 1.0)) -> CircleActionGroupoid:
    return CircleActionGroupoid.rotation(order, radii)


def circle_trivial_groupoid(order: int = 128) -> CircleActionGroupoid:
    return CircleActionGroupoid.trivial(order, [[1.0, 0.0], [0.3, -0.4]])


def degree2_field(amplitude: float = 1e-2) -> FourierPolyField:
    """The shipped degree-2 unital field; cos harmonics carry 1 - cos compensators."""
    a = amplitude
    terms = [
        FieldTerm("sin", 1, (0, 0), (1.0 * a, 0.0)),
        FieldTerm("cos", 0, (0, 0), (0.0, 1.0 * a)),
        FieldTerm("cos", 1, (0, 0), (0.0, -1.0 * a)),
        FieldTerm("sin", 2, (0, 0), (0.5 * a, -0.3 * a)),
        FieldTerm("cos", 0, (0, 0), (-0.2 * a, 0.4 * a)),
        FieldTerm("cos", 2, (0, 0), (0.2 * a, -0.4 * a)),
        FieldTerm("sin", 1, (1, 0), (0.3 * a, 0.1 * a)),
        FieldTerm("cos", 0, (0, 1), (-0.1 * a, 0.2 * a)),
        FieldTerm("cos", 1, (0, 1), (0.1 * a, -0.2 * a)),
    ]
    return FourierPolyField(terms, unital=True)


def random_field(seed: int, degree: int = 4, amplitude: float = 1e-2,
                 powers=((0, 0), (1, 0), (0, 1))) -> FourierPolyField:
    """Seeded unital field with harmonics up to ``degree``."""
    rng = np.random.default_rng(seed)
    terms = []
    for power in powers:
        cos_total = np.zeros(2)
        for k in range(1, degree + 1):
            terms.append(FieldTerm("sin", k, tuple(power),
                                   tuple(amplitude * rng.standard_normal(2))))
            ck = amplitude * rng.standard_normal(2)
            cos_total += ck
            terms.append(FieldTerm("cos", k, tuple(power), tuple(ck)))
        terms.append(FieldTerm("cos", 0, tuple(power), tuple(-cos_total)))
    return FourierPolyField(terms, unital=True)


# ---------------------------------------------------------------------------
# shipped data files

FIXTURE_NAMES = (
    "z2-groupoid", "z2-tau15-rep",
    "pair2-groupoid", "pair2-rep", "pair2-haar-37",
    "s3-groupoid", "s3-rep", "s3-rep-perturbed",
    "two-orbit-groupoid", "two-orbit-rep",
    "circle-rotation", "circle-trivial", "circle-field-deg2",
)


def fixture_path(name: str) -> str:
    """Filesystem path of a shipped fixture JSON (see FIXTURE_NAMES)."""
    base = resources.files("gavg").joinpath("fixtures/data")
    path = base.joinpath(f"{name}.json")
    if not path.is_file():
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}")
    return str(path)


def build_fixture_objects() -> dict:
    """In-memory objects behind every shipped fixture file."""
    from ..haar import HaarSystem

    return {
        "z2-groupoid": z2_groupoid(),
        "z2-tau15-rep": z2_scalar_rep(1.5),
        "pair2-groupoid": pair2_groupoid(),
        "pair2-rep": pair2_perturbed_rep(),
        "pair2-haar-37": HaarSystem(np.array([0.3, 0.7])),
        "s3-groupoid": s3_groupoid(),
        "s3-rep": s3_rep(),
        "s3-rep-perturbed": s3_perturbed_rep(5e-3, 0),
        "two-orbit-groupoid": two_orbit_groupoid(),
        "two-orbit-rep": two_orbit_rep(),
        "circle-rotation": circle_rotation_groupoid(),
        "circle-trivial": circle_trivial_groupoid(),
        "circle-field-deg2": degree2_field(),
    }


def write_fixture_data(directory) -> list[str]:
    """Regenerate the shipped fixture JSON files into ``directory``."""
    import pathlib

    from .. import io as gio

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    objs = build_fixture_objects()
    written = []
    for name in FIXTURE_NAMES:
        data = gio.object_json(objs[name])
        path = directory / f"{name}.json"
        gio.dump_json(data, path)
        written.append(str(path))
    return written
