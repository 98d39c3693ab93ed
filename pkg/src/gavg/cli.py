"""Command-line entry point.

Exit codes are a contract: 0 success, 1 input or validation error,
2 mathematical-hypothesis failure (failed certificate, divergence guard,
recursion hypothesis, degenerate or non-invertible input). Artifacts are
written into the --out directory under fixed names; --plot additionally
renders a PNG next to each CSV. Inputs may be file paths or fixture:<name>
references (see gavg.fixtures.FIXTURE_NAMES).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import averaging, circle, io, viz
from .errors import HypothesisViolation, InvalidInput
from .groupoid import FiniteGroupoid, validate
from .haar import random_haar, uniform_haar, validate_haar
from .pseudorep import check_shapes

MODES = ("validate", "certify", "average", "iterate", "lemma",
         "conn-iterate", "segment", "report")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gavg",
        description="Recursive Haar averaging for groupoid representations and "
                    "circle-action connections.")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--groupoid", help="groupoid JSON (path or fixture:<name>)")
    p.add_argument("--haar", help="haar JSON path, 'uniform' (default), or 'random'")
    p.add_argument("--rep", help="pseudo-representation JSON (path or fixture:<name>)")
    p.add_argument("--field", help="connection field JSON (path or fixture:<name>)")
    p.add_argument("--trace", help="trace CSV to render (report mode)")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=60)
    p.add_argument("--seed", type=int, default=0, help="seed for --haar random")
    p.add_argument("--steps", type=int, default=20, help="segment grid intervals")
    p.add_argument("--b0", type=float, help="initial norm bound (lemma mode)")
    p.add_argument("--c0", type=float, help="initial defect (lemma mode)")
    p.add_argument("--length", type=int, default=20, help="recursion length (lemma mode)")
    p.add_argument("--force", action="store_true",
                   help="iterate without a passing certificate")
    p.add_argument("--plot", action="store_true", help="render figures next to CSVs")
    p.add_argument("--out", help="output directory (required for artifact modes)")
    return p


def _need(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise InvalidInput(f"mode {args.mode} requires --{name}")


def _outdir(args) -> Path:
    _need(args, "out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_finite_groupoid(args) -> FiniteGroupoid:
    _need(args, "groupoid")
    gpd = io.parse_groupoid(io.load_json(args.groupoid))
    if not isinstance(gpd, FiniteGroupoid):
        raise InvalidInput(f"mode {args.mode} needs a finite groupoid, got a circle-action config")
    report = validate(gpd)
    if not report.ok:
        v = report.violations[0]
        raise InvalidInput(f"groupoid axioms fail ({len(report.violations)} violations); "
                           f"first: {v.rule} at {v.witness}: {v.detail}")
    return gpd


def _load_haar(args, gpd):
    if args.haar is None or args.haar == "uniform":
        return uniform_haar(gpd)
    if args.haar == "random":
        return random_haar(gpd, args.seed)
    haar = io.parse_haar(io.load_json(args.haar), gpd)
    report = validate_haar(gpd, haar)
    if not report.ok:
        v = report.violations[0]
        raise InvalidInput(f"haar system invalid: {v.rule} at {v.witness}: {v.detail}")
    return haar


def _load_rep(args, gpd):
    _need(args, "rep")
    rep = io.parse_rep(io.load_json(args.rep), gpd)
    check_shapes(gpd, rep)
    return rep


def _maybe_plot(args, csv_path: Path):
    if args.plot:
        png = csv_path.with_suffix(".png")
        viz.render_csv(io.read_csv_columns(csv_path), png)
        print(f"wrote {png}")


def _run_validate(args) -> int:
    _need(args, "groupoid")
    gpd = io.parse_groupoid(io.load_json(args.groupoid))
    reports = {}
    status = 0
    if isinstance(gpd, FiniteGroupoid):
        reports["groupoid"] = validate(gpd)
        if args.haar and args.haar not in ("uniform", "random"):
            haar = io.parse_haar(io.load_json(args.haar), gpd)
            reports["haar"] = validate_haar(gpd, haar)
        if args.rep:
            data = io.load_json(args.rep)
            rep = io.parse_rep(data, gpd)
            check_shapes(gpd, rep)  # raises InvalidInput on shape violations
            io.parse_rep_metric(data, gpd)  # raises on a bad embedded metric
            print("rep: shapes ok")
    else:
        print(f"circle-action config accepted: order={gpd.order} action={gpd.action} "
              f"points={gpd.n_points}")
    for name, report in reports.items():
        if report.ok:
            print(f"{name}: ok")
        else:
            status = 1
            v = report.violations[0]
            print(f"{name}: {len(report.violations)} violations; "
                  f"first: {v.rule} at {v.witness}: {v.detail}", file=sys.stderr)
    if args.out:
        out = _outdir(args)
        for name, report in reports.items():
            io.dump_json(report.to_json(), out / f"validation_{name}.json")
    return status


def _run_certify(args) -> int:
    gpd = _load_finite_groupoid(args)
    rep = _load_rep(args, gpd)
    cert = averaging.certify_near_representation(gpd, rep)
    out = _outdir(args)
    io.dump_json(cert.to_json(), out / "certificate.json")
    print(f"wrote {out / 'certificate.json'}")
    if not cert.passed:
        bad = next(o for o in cert.orbits if not o.passed)
        print(f"certificate FAILED at orbit {bad.orbit} (objects {bad.objects}): "
              f"c={bad.c:.6g} > threshold={bad.threshold:.6g}", file=sys.stderr)
        return 2
    print("certificate passed")
    return 0


def _run_average(args) -> int:
    gpd = _load_finite_groupoid(args)
    rep = _load_rep(args, gpd)
    haar = _load_haar(args, gpd)
    out = _outdir(args)
    averaged = averaging.average(gpd, haar, rep)
    io.dump_json(io.rep_json(averaged), out / "averaged_rep.json")
    print(f"wrote {out / 'averaged_rep.json'}")
    return 0


def _run_iterate(args) -> int:
    gpd = _load_finite_groupoid(args)
    rep = _load_rep(args, gpd)
    haar = _load_haar(args, gpd)
    out = _outdir(args)
    final, trace = averaging.iterate(gpd, haar, rep, tol=args.tol,
                                     max_iter=args.max_iter, force=args.force)
    io.dump_json(io.rep_json(final), out / "rep.json")
    io.write_trace_csv(out / "trace.csv", trace.rows)
    print(f"wrote {out / 'rep.json'} and {out / 'trace.csv'}")
    _maybe_plot(args, out / "trace.csv")
    if not trace.converged:
        print(f"did not reach tol {args.tol} within {args.max_iter} iterations "
              f"(final defect {trace.rows[-1].c:.6g})", file=sys.stderr)
        return 2
    print(f"converged in {trace.rows[-1].i} iterations (defect {trace.rows[-1].c:.3e})")
    return 0


def _run_lemma(args) -> int:
    _need(args, "b0", "c0")
    rows = averaging.recursion_envelope(args.b0, args.c0, args.length)
    out = _outdir(args)
    io.write_lemma_csv(out / "lemma.csv", rows)
    print(f"wrote {out / 'lemma.csv'}")
    _maybe_plot(args, out / "lemma.csv")
    if not all(r.c_pass and r.b_pass for r in rows):
        bad = next(r for r in rows if not (r.c_pass and r.b_pass))
        print(f"bound check FAILED at index {bad.i}", file=sys.stderr)
        return 2
    print(f"all {len(rows)} bound checks passed")
    return 0


def _run_conn_iterate(args) -> int:
    _need(args, "groupoid", "field")
    gpd = io.parse_groupoid(io.load_json(args.groupoid))
    if not isinstance(gpd, circle.CircleActionGroupoid):
        raise InvalidInput("conn-iterate needs a circle-action groupoid config")
    field = io.parse_field(io.load_json(args.field), gpd)
    out = _outdir(args)
    final, trace = circle.iterate_connection(gpd, field, tol=args.tol,
                                             max_iter=args.max_iter, force=args.force)
    io.dump_json(io.field_json(final), out / "field.json")
    io.write_trace_csv(out / "trace.csv", trace.rows, mult_defect=True)
    print(f"wrote {out / 'field.json'} and {out / 'trace.csv'}")
    _maybe_plot(args, out / "trace.csv")
    if not trace.converged:
        last = trace.rows[-1]
        reason = ("quadrature floor reached" if trace.floor_reached
                  else "iteration limit reached")
        print(f"{reason} above tol {args.tol} (multiplicativity defect "
              f"{last.mult_defect:.6g})", file=sys.stderr)
        return 2
    print(f"converged in {trace.rows[-1].i} iterations "
          f"(multiplicativity defect {trace.rows[-1].mult_defect:.3e})")
    return 0


def _run_segment(args) -> int:
    gpd = _load_finite_groupoid(args)
    rep = _load_rep(args, gpd)
    haar = _load_haar(args, gpd)
    out = _outdir(args)
    points = averaging.segment_scan(gpd, haar, rep, steps=args.steps)
    io.write_segment_csv(out / "segment.csv", points)
    print(f"wrote {out / 'segment.csv'}")
    _maybe_plot(args, out / "segment.csv")
    bad = [p for p in points if not p.invertible]
    if bad:
        print(f"non-invertible interpolant at t={bad[0].t:g} "
              f"(smallest singular value {bad[0].min_sv:.3e})", file=sys.stderr)
        return 2
    return 0


def _run_report(args) -> int:
    _need(args, "trace")
    out = _outdir(args)
    columns = io.read_csv_columns(args.trace)
    name = Path(args.trace).stem + ".png"
    path = viz.render_csv(columns, out / name)
    print(f"wrote {path}")
    return 0


_DISPATCH = {
    "validate": _run_validate,
    "certify": _run_certify,
    "average": _run_average,
    "iterate": _run_iterate,
    "lemma": _run_lemma,
    "conn-iterate": _run_conn_iterate,
    "segment": _run_segment,
    "report": _run_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return 1
    if args.max_iter < 1:
        print("error: --max-iter must be at least 1", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[args.mode](args)
    except InvalidInput as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1
    except HypothesisViolation as e:
        print(f"hypothesis failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
