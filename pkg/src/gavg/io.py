"""File formats: groupoid/Haar/representation/field JSON and trace CSVs.

JSON layouts follow the external-interface contracts:

* groupoid: {"objects": [...], "arrows": [{"id", "src", "tgt"}...],
  "units": {obj: arrow}, "inv": {arrow: arrow}, "comp": [[g', g, result]...]};
  a bare JSON array is accepted as a group multiplication table; an object
  with "kind": "circle_action" configures the circle-action groupoid.
* haar: {"weights": {obj: w}}.
* pseudo-representation: {"ranks": {obj: r}, "matrices": {arrow: [[...]]}}.
* connection fields: {"kind": "fourier_poly_field" | "sampled_field", ...}.

CSV columns are fixed (iter,b,c,bound,unital_dev[,mult_defect]; floats with
17 significant digits) so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import pathlib

import numpy as np

from ._util import fmt17
from .circle import CircleActionGroupoid, FieldTerm, FourierPolyField, SampledField
from .errors import InvalidInput
from .groupoid import FiniteGroupoid, ValidationReport, one_object_group
from .haar import HaarSystem
from .pseudorep import FiberBundle, FiberMetric, PseudoRep


def resolve_input(spec: str) -> pathlib.Path:
    """Resolve a CLI input: a filesystem path or a fixture:<name> reference."""
    if spec.startswith("fixture:"):
        from .fixtures import fixture_path
        try:
            return pathlib.Path(fixture_path(spec[len("fixture:"):]))
        except KeyError as e:
            raise InvalidInput(str(e)) from e
    return pathlib.Path(spec)


def load_json(path) -> object:
    path = resolve_input(str(path))
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as e:
        raise InvalidInput(f"input file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InvalidInput(f"malformed JSON in {path}: {e}") from e


def dump_json(data, path):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _int_keyed(mapping, what: str, count: int) -> np.ndarray:
    out = np.full(count, -1, dtype=np.int64)
    try:
        for k, v in mapping.items():
            out[int(k)] = int(v)
    except (ValueError, TypeError, IndexError) as e:
        raise InvalidInput(f"malformed {what} table: {e}") from e
    if np.any(out < 0):
        missing = int(np.flatnonzero(out < 0)[0])
        raise InvalidInput(f"{what} table is missing entry for id {missing}")
    return out


# ---------------------------------------------------------------------------
# groupoids

def groupoid_json(gpd: FiniteGroupoid) -> dict:
    pairs = np.argwhere(gpd.comp >= 0)
    return {
        "objects": list(range(gpd.n_objects)),
        "arrows": [{"id": g, "src": int(gpd.src[g]), "tgt": int(gpd.tgt[g])}
                   for g in range(gpd.n_arrows)],
        "units": {str(x): int(gpd.unit[x]) for x in range(gpd.n_objects)},
        "inv": {str(g): int(gpd.inv[g]) for g in range(gpd.n_arrows)},
        "comp": [[int(gp), int(g), int(gpd.comp[gp, g])] for gp, g in pairs],
    }


def parse_groupoid(data):
    """Parse groupoid JSON; returns FiniteGroupoid or CircleActionGroupoid."""
    if isinstance(data, list):
        return one_object_group(data)
    if not isinstance(data, dict):
        raise InvalidInput("groupoid JSON must be an object or a multiplication table")
    if data.get("kind") == "circle_action":
        return parse_circle_groupoid(data)

    try:
        objects = sorted(int(x) for x in data["objects"])
        arrows = data["arrows"]
    except KeyError as e:
        raise InvalidInput(f"groupoid JSON missing field {e}") from e
    n = len(objects)
    if objects != list(range(n)):
        raise InvalidInput("object ids must be the dense range 0..n-1")
    a = len(arrows)
    src = np.full(a, -1, dtype=np.int64)
    tgt = np.full(a, -1, dtype=np.int64)
    for rec in arrows:
        try:
            i = int(rec["id"])
            src[i] = int(rec["src"])
            tgt[i] = int(rec["tgt"])
        except (KeyError, ValueError, IndexError, TypeError) as e:
            raise InvalidInput(f"malformed arrow record {rec!r}: {e}") from e
    if np.any(src < 0):
        raise InvalidInput("arrow ids must be the dense range 0..a-1")
    comp = np.full((a, a), -1, dtype=np.int64)
    for triple in data.get("comp", []):
        try:
            gp, g, r = (int(v) for v in triple)
        except (ValueError, TypeError) as e:
            raise InvalidInput(f"composition entries must be triples, got {triple!r}") from e
        if not (0 <= gp < a and 0 <= g < a and 0 <= r < a):
            raise InvalidInput(f"composition triple {triple!r} references unknown arrow")
        comp[gp, g] = r
    return FiniteGroupoid(
        n_objects=n, src=src, tgt=tgt,
        unit=_int_keyed(data.get("units", {}), "units", n),
        inv=_int_keyed(data.get("inv", {}), "inv", a),
        comp=comp,
    )


def circle_groupoid_json(gpd: CircleActionGroupoid) -> dict:
    data = {"kind": "circle_action", "action": gpd.action, "order": gpd.order}
    if gpd.action == "rotation":
        data["radii"] = [float(r) for r in gpd.radii]
    else:
        data["points"] = [[float(x), float(y)] for x, y in gpd.points]
    return data


def parse_circle_groupoid(data: dict) -> CircleActionGroupoid:
    try:
        action = data["action"]
        order = int(data["order"])
    except (KeyError, ValueError) as e:
        raise InvalidInput(f"malformed circle-action config: {e}") from e
    if action == "rotation":
        if "radii" not in data:
            raise InvalidInput("rotation circle-action config requires radii")
        return CircleActionGroupoid.rotation(order, data["radii"])
    if action == "trivial":
        if "points" not in data:
            raise InvalidInput("trivial circle-action config requires points")
        return CircleActionGroupoid.trivial(order, data["points"])
    raise InvalidInput(f"unknown circle action {action!r}")


# ---------------------------------------------------------------------------
# Haar systems and pseudo-representations

def haar_json(haar: HaarSystem) -> dict:
    return {"weights": {str(x): float(w) for x, w in enumerate(haar.weights)}}


def parse_haar(data: dict, gpd: FiniteGroupoid) -> HaarSystem:
    if not isinstance(data, dict) or "weights" not in data:
        raise InvalidInput('haar JSON must be {"weights": {object: w}}')
    w = np.zeros(gpd.n_objects)
    seen = np.zeros(gpd.n_objects, dtype=bool)
    for k, v in data["weights"].items():
        try:
            x = int(k)
            w[x] = float(v)
            seen[x] = True
        except (ValueError, IndexError) as e:
            raise InvalidInput(f"malformed haar weight {k!r}: {e}") from e
    if not seen.all():
        raise InvalidInput(f"haar weights missing object {int(np.flatnonzero(~seen)[0])}")
    return HaarSystem(w)


def rep_json(rep: PseudoRep, metric: FiberMetric | None = None) -> dict:
    data = {
        "ranks": {str(x): int(r) for x, r in enumerate(rep.bundle.ranks)},
        "matrices": {str(g): [[float(v) for v in row] for row in m]
                     for g, m in enumerate(rep.mats)},
    }
    if metric is not None:
        data["metrics"] = {str(x): [[float(v) for v in row] for row in m]
                           for x, m in enumerate(metric.mats)}
    return data


def parse_rep(data: dict, gpd: FiniteGroupoid) -> PseudoRep:
    if not isinstance(data, dict) or "ranks" not in data or "matrices" not in data:
        raise InvalidInput('pseudo-rep JSON must carry "ranks" and "matrices"')
    ranks = _int_keyed(data["ranks"], "ranks", gpd.n_objects)
    mats = []
    for g in range(gpd.n_arrows):
        key = str(g)
        if key not in data["matrices"]:
            raise InvalidInput(f"pseudo-rep JSON missing matrix for arrow {g}")
        m = np.asarray(data["matrices"][key], dtype=float)
        want = (int(ranks[gpd.tgt[g]]), int(ranks[gpd.src[g]]))
        m = m.reshape(want) if m.size == want[0] * want[1] else m
        if m.shape != want:
            raise InvalidInput(f"matrix of arrow {g} has shape {m.shape}, expected {want}")
        mats.append(m)
    return PseudoRep(FiberBundle(ranks), mats)


def parse_rep_metric(data: dict, gpd: FiniteGroupoid) -> FiberMetric | None:
    """Optional fiber metric embedded in a pseudo-rep JSON; None means identity."""
    if "metrics" not in data:
        return None
    raw = data["metrics"]
    mats = []
    for x in range(gpd.n_objects):
        if str(x) not in raw:
            raise InvalidInput(f"metric table missing object {x}")
        mats.append(np.asarray(raw[str(x)], dtype=float))
    metric = FiberMetric(mats)
    metric.whiteners()  # raises on non-symmetric or non-positive-definite blocks
    return metric


# ---------------------------------------------------------------------------
# connection fields

def field_json(field) -> dict:
    if isinstance(field, FourierPolyField):
        return {
            "kind": "fourier_poly_field",
            "unital": field.unital,
            "terms": [{"trig": t.trig, "harmonic": t.harmonic,
                       "power": list(t.power), "coeff": [float(c) for c in t.coeff]}
                      for t in field.terms],
        }
    if isinstance(field, SampledField):
        data = circle_groupoid_json(field.gpd)
        data.update({
            "kind": "sampled_field",
            "degree": field.degree,
            "refit_residual": field.refit_residual,
            "values": [[[float(v) for v in row] for row in node]
                       for node in field.values],
        })
        return data
    raise InvalidInput(f"cannot serialize field of type {type(field).__name__}")


def parse_field(data: dict, gpd: CircleActionGroupoid | None = None):
    if not isinstance(data, dict):
        raise InvalidInput("field JSON must be an object")
    kind = data.get("kind")
    if kind == "fourier_poly_field":
        terms = [FieldTerm(trig=t["trig"], harmonic=int(t["harmonic"]),
                           power=tuple(int(p) for p in t["power"]),
                           coeff=tuple(float(c) for c in t["coeff"]))
                 for t in data.get("terms", [])]
        return FourierPolyField(terms, unital=bool(data.get("unital", True)))
    if kind == "sampled_field":
        grid = gpd if gpd is not None else parse_circle_groupoid(
            {**data, "kind": "circle_action"})
        values = np.asarray(data["values"], dtype=float)
        field = SampledField(grid, values, degree=int(data["degree"]), pre_truncated=True)
        field.refit_residual = float(data.get("refit_residual", 0.0))
        return field
    raise InvalidInput(f"unknown field kind {kind!r}")


def object_json(obj) -> dict | list:
    """Serialize any supported artifact object."""
    if isinstance(obj, FiniteGroupoid):
        return groupoid_json(obj)
    if isinstance(obj, CircleActionGroupoid):
        return circle_groupoid_json(obj)
    if isinstance(obj, HaarSystem):
        return haar_json(obj)
    if isinstance(obj, PseudoRep):
        return rep_json(obj)
    if isinstance(obj, (FourierPolyField, SampledField)):
        return field_json(obj)
    if isinstance(obj, ValidationReport):
        return obj.to_json()
    raise InvalidInput(f"cannot serialize object of type {type(obj).__name__}")


# ---------------------------------------------------------------------------
# CSV artifacts

def write_trace_csv(path, rows, mult_defect: bool = False):
    """Convergence trace CSV: iter,b,c,bound,unital_dev[,mult_defect]."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = "iter,b,c,bound,unital_dev" + (",mult_defect" if mult_defect else "")
    lines = [header]
    for r in rows:
        cells = [str(r.i), fmt17(r.b), fmt17(r.c), fmt17(r.bound), fmt17(r.unital_dev)]
        if mult_defect:
            cells.append(fmt17(r.mult_defect))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_lemma_csv(path, rows):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["i,b,c,bound,b_limit,c_pass,b_pass"]
    for r in rows:
        lines.append(",".join([
            str(r.i), fmt17(r.b), fmt17(r.c), fmt17(r.bound), fmt17(r.b_limit),
            str(int(r.c_pass)), str(int(r.b_pass)),
        ]))
    path.write_text("\n".join(lines) + "\n")


def write_segment_csv(path, points):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["t,c"]
    for p in points:
        lines.append(f"{fmt17(p.t)},{fmt17(p.c)}")
    path.write_text("\n".join(lines) + "\n")


def read_csv_columns(path) -> dict[str, list[float]]:
    """Read a produced CSV back into named float columns."""
    path = resolve_input(str(path))
    try:
        text = path.read_text().strip().splitlines()
    except FileNotFoundError as e:
        raise InvalidInput(f"CSV file not found: {path}") from e
    if not text:
        raise InvalidInput(f"empty CSV file: {path}")
    names = text[0].split(",")
    cols = {n: [] for n in names}
    for line in text[1:]:
        cells = line.split(",")
        if len(cells) != len(names):
            raise InvalidInput(f"ragged CSV row in {path}: {line!r}")
        for n, cell in zip(names, cells):
            cols[n].append(float(cell))
    return cols
