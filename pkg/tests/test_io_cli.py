import json
import subprocess
import sys

import numpy as np
import pytest

from gavg import io
from gavg.circle import CircleActionGroupoid, FourierPolyField, SampledField, average_connection
from gavg.cli import main
from gavg.errors import InvalidInput
from gavg.fixtures import (
    FIXTURE_NAMES,
    build_fixture_objects,
    circle_rotation_groupoid,
    degree2_field,
    fixture_path,
    pair2_perturbed_rep,
    z2_groupoid,
)
from gavg.groupoid import FiniteGroupoid, pair_groupoid
from gavg.haar import HaarSystem


# ---------------------------------------------------------------------------
# JSON round trips

def test_groupoid_roundtrip():
    for name in ("z2-groupoid", "pair2-groupoid", "s3-groupoid", "two-orbit-groupoid"):
        gpd = build_fixture_objects()[name]
        back = io.parse_groupoid(io.groupoid_json(gpd))
        assert np.array_equal(back.src, gpd.src)
        assert np.array_equal(back.tgt, gpd.tgt)
        assert np.array_equal(back.unit, gpd.unit)
        assert np.array_equal(back.inv, gpd.inv)
        assert np.array_equal(back.comp, gpd.comp)


def test_multiplication_table_accepted_as_groupoid():
    gpd = io.parse_groupoid([[0, 1], [1, 0]])
    assert isinstance(gpd, FiniteGroupoid)
    assert np.array_equal(gpd.comp, z2_groupoid().comp)


def test_haar_roundtrip():
    pair = pair_groupoid(2)
    haar = HaarSystem(np.array([0.3, 0.7]))
    back = io.parse_haar(io.haar_json(haar), pair)
    assert np.array_equal(back.weights, haar.weights)


def test_rep_roundtrip():
    pair = pair_groupoid(2)
    rep = pair2_perturbed_rep()
    back = io.parse_rep(json.loads(json.dumps(io.rep_json(rep))), pair)
    for a, b in zip(back.mats, rep.mats):
        assert np.array_equal(a, b)  # repr round-trip is exact


def test_rep_metric_roundtrip():
    from gavg.pseudorep import FiberMetric

    pair = pair_groupoid(2)
    rep = pair2_perturbed_rep()
    metric = FiberMetric([np.diag([2.0, 1.0]), np.eye(2)])
    data = json.loads(json.dumps(io.rep_json(rep, metric)))
    back = io.parse_rep_metric(data, pair)
    for a, b in zip(back.mats, metric.mats):
        assert np.array_equal(a, b)
    assert io.parse_rep_metric({"ranks": {}, "matrices": {}}, pair) is None
    with pytest.raises(InvalidInput):
        io.parse_rep_metric({"metrics": {"0": [[1.0, 0.0], [0.0, -1.0]],
                                         "1": [[1.0, 0.0], [0.0, 1.0]]}}, pair)


def test_field_roundtrips():
    field = degree2_field(2e-2)
    back = io.parse_field(json.loads(json.dumps(io.field_json(field))))
    assert isinstance(back, FourierPolyField)
    assert back.terms == field.terms

    gpd = circle_rotation_groupoid(order=16, radii=(1.0,))
    sampled = average_connection(gpd, field)
    data = json.loads(json.dumps(io.field_json(sampled)))
    back = io.parse_field(data)
    assert isinstance(back, SampledField)
    assert np.array_equal(back.values, sampled.values)
    assert back.gpd.order == gpd.order


def test_circle_groupoid_roundtrip():
    for gpd in (circle_rotation_groupoid(order=16, radii=(0.5, 1.0)),
                CircleActionGroupoid.trivial(8, [[1.0, 2.0]])):
        back = io.parse_groupoid(io.circle_groupoid_json(gpd))
        assert isinstance(back, CircleActionGroupoid)
        assert back.order == gpd.order and back.action == gpd.action
        assert np.array_equal(back.points, gpd.points)


def test_shipped_fixtures_match_builders():
    objs = build_fixture_objects()
    for name in FIXTURE_NAMES:
        with open(fixture_path(name)) as fh:
            on_disk = json.load(fh)
        assert on_disk == io.object_json(objs[name]), name


def test_malformed_inputs_raise_invalid_input(tmp_path):
    with pytest.raises(InvalidInput):
        io.parse_groupoid({"objects": [0, 2], "arrows": []})  # non-dense ids
    with pytest.raises(InvalidInput):
        io.parse_groupoid({"objects": [0], "arrows": [{"id": 0, "src": 0, "tgt": 0}],
                           "units": {"0": 0}, "inv": {"0": 0}, "comp": [5]})
    with pytest.raises(InvalidInput):
        io.parse_groupoid({"objects": [0], "arrows": ["oops"],
                           "units": {"0": 0}, "inv": {"0": 0}, "comp": []})
    with pytest.raises(InvalidInput):
        io.parse_haar({"weights": {"0": 0.5}}, pair_groupoid(2))  # missing object
    with pytest.raises(InvalidInput):
        io.parse_rep({"ranks": {"0": 1}}, z2_groupoid())  # missing matrices
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidInput):
        io.load_json(bad)
    with pytest.raises(InvalidInput):
        io.load_json(tmp_path / "absent.json")
    with pytest.raises(InvalidInput):
        io.resolve_input("fixture:no-such-fixture")


# ---------------------------------------------------------------------------
# CSV contract

def test_csv_17_digits_and_roundtrip(tmp_path):
    from gavg.averaging import recursion_envelope

    rows = recursion_envelope(1.0, 1.0 / 9.0, 6)
    path = tmp_path / "lemma.csv"
    io.write_lemma_csv(path, rows)
    text = path.read_text().splitlines()
    assert text[0] == "i,b,c,bound,b_limit,c_pass,b_pass"
    assert text[1].split(",")[1] == "1"
    # 17 significant digits survive the round trip exactly
    cols = io.read_csv_columns(path)
    for row, c in zip(rows, cols["c"]):
        assert c == row.c


def test_cli_outputs_are_deterministic(tmp_path, monkeypatch):
    args = ["--mode", "iterate", "--groupoid", "fixture:s3-groupoid",
            "--rep", "fixture:s3-rep-perturbed", "--force"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out1)]) == 0
    monkeypatch.setenv("GAVG_THREADS", "3")
    assert main(args + ["--out", str(out2)]) == 0
    assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
    assert (out1 / "rep.json").read_bytes() == (out2 / "rep.json").read_bytes()


# ---------------------------------------------------------------------------
# CLI modes and exit codes

def test_cli_validate_ok(capsys):
    assert main(["--mode", "validate", "--groupoid", "fixture:z2-groupoid"]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validate_names_failing_triple(tmp_path, capsys):
    data = io.groupoid_json(z2_groupoid())
    data["comp"] = [[t[0], t[1], 1 if t[:2] == [1, 1] else t[2]] for t in data["comp"]]
    path = tmp_path / "bad.json"
    io.dump_json(data, path)
    code = main(["--mode", "validate", "--groupoid", str(path), "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "(1, 1)" in err  # the corrupted composition pair is named
    report = json.loads((tmp_path / "validation_groupoid.json").read_text())
    assert not report["ok"]


def test_cli_certify_exit_codes(tmp_path):
    ok = main(["--mode", "certify", "--groupoid", "fixture:s3-groupoid",
               "--rep", "fixture:s3-rep-perturbed", "--out", str(tmp_path / "ok")])
    assert ok == 0
    cert = json.loads((tmp_path / "ok" / "certificate.json").read_text())
    assert cert["pass"] is True

    bad_rep = tmp_path / "bad-rep.json"
    io.dump_json({"ranks": {"0": 1}, "matrices": {"0": [[1.0]], "1": [[2.0]]}}, bad_rep)
    code = main(["--mode", "certify", "--groupoid", "fixture:z2-groupoid",
                 "--rep", str(bad_rep), "--out", str(tmp_path / "fail")])
    assert code == 2


def test_cli_average_and_roundtrip(tmp_path):
    code = main(["--mode", "average", "--groupoid", "fixture:z2-groupoid",
                 "--rep", "fixture:z2-tau15-rep", "--out", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "averaged_rep.json").read_text())
    assert data["matrices"]["1"][0][0] == pytest.approx((1.5 + 1 / 1.5) / 2)


def test_cli_iterate_z2_fixture(tmp_path):
    code = main(["--mode", "iterate", "--groupoid", "fixture:z2-groupoid",
                 "--rep", "fixture:z2-tau15-rep", "--force", "--out", str(tmp_path)])
    assert code == 0
    cols = io.read_csv_columns(tmp_path / "trace.csv")
    assert cols["c"][-1] <= 1e-12
    assert cols["iter"][-1] <= 6


def test_cli_iterate_without_force_fails_hypothesis(tmp_path, capsys):
    code = main(["--mode", "iterate", "--groupoid", "fixture:z2-groupoid",
                 "--rep", "fixture:z2-tau15-rep", "--out", str(tmp_path)])
    assert code == 2
    assert "certificate" in capsys.readouterr().err


def test_cli_lemma(tmp_path):
    code = main(["--mode", "lemma", "--b0", "1", "--c0", str(1 / 9), "--length", "10",
                 "--out", str(tmp_path)])
    assert code == 0
    cols = io.read_csv_columns(tmp_path / "lemma.csv")
    assert len(cols["i"]) == 11
    assert all(v == 1.0 for v in cols["c_pass"])
    code = main(["--mode", "lemma", "--b0", "1", "--c0", "0.5", "--out", str(tmp_path)])
    assert code == 2  # eps = 3 > 2/3


def test_cli_conn_iterate(tmp_path):
    code = main(["--mode", "conn-iterate", "--groupoid", "fixture:circle-rotation",
                 "--field", "fixture:circle-field-deg2", "--tol", "1e-8",
                 "--max-iter", "10", "--out", str(tmp_path)])
    assert code == 0
    cols = io.read_csv_columns(tmp_path / "trace.csv")
    assert "mult_defect" in cols
    assert cols["mult_defect"][-1] <= 1e-8
    data = json.loads((tmp_path / "field.json").read_text())
    assert data["kind"] == "sampled_field"


def test_cli_segment(tmp_path):
    code = main(["--mode", "segment", "--groupoid", "fixture:pair2-groupoid",
                 "--rep", "fixture:pair2-rep", "--haar", "fixture:pair2-haar-37",
                 "--steps", "6", "--out", str(tmp_path)])
    assert code == 0
    cols = io.read_csv_columns(tmp_path / "segment.csv")
    assert cols["t"] == pytest.approx([0, 1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6, 1.0])
    assert cols["c"][-1] <= cols["c"][0]


def test_cli_plot_and_report(tmp_path):
    code = main(["--mode", "iterate", "--groupoid", "fixture:s3-groupoid",
                 "--rep", "fixture:s3-rep-perturbed", "--plot", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "trace.png").stat().st_size > 0
    code = main(["--mode", "report", "--trace", str(tmp_path / "trace.csv"),
                 "--out", str(tmp_path / "report")])
    assert code == 0
    assert (tmp_path / "report" / "trace.png").stat().st_size > 0
    code = main(["--mode", "segment", "--groupoid", "fixture:pair2-groupoid",
                 "--rep", "fixture:pair2-rep", "--plot", "--out", str(tmp_path / "seg")])
    assert code == 0
    assert (tmp_path / "seg" / "segment.png").stat().st_size > 0


def test_cli_input_errors():
    assert main(["--mode", "iterate", "--groupoid", "fixture:z2-groupoid"]) == 1  # no rep
    assert main(["--mode", "certify", "--groupoid", "no/such/file.json",
                 "--rep", "fixture:z2-tau15-rep", "--out", "/tmp/x"]) == 1
    assert main(["--mode", "lemma", "--b0", "1", "--out", "/tmp/x"]) == 1  # missing c0
    assert main(["--mode", "iterate", "--groupoid", "fixture:z2-groupoid",
                 "--rep", "fixture:z2-tau15-rep", "--tol", "-1", "--out", "/tmp/x"]) == 1


def test_cli_module_entrypoint():
    proc = subprocess.run(
        [sys.executable, "-m", "gavg", "--mode", "validate",
         "--groupoid", "fixture:pair2-groupoid"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "ok" in proc.stdout
