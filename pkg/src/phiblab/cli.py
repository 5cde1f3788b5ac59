"""Command line front end: ``phiblab run`` and ``phiblab list-models``.

Exit statuses: 0 pass or MATCH, 1 input error, 2 mismatch or failed check,
3 unstable or inconclusive numerics.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import format_models, list_models, model_from_dict
from .checks import ALGEBROID_TOL, GROUPOID_TOL, SYMBOL_TOL, groupoid_suite, symbol_suite
from .errors import ConfigError, GeometryMismatch, LabError
from .geometry import GeometryKind
from .index_engine import (MARGIN_RATIO, WEIGHT_MARGIN, Status, ZkOperator, homotopy_experiment,
                           index_staircase, indicial_family, modk_index, relative_index_verify,
                           zk_operator)
from .scenario import Pipeline, Scenario, load_scenario
from .spectral import Contour, default_half_width, locate_spectrum, log_residue, strip_contour
from .symbols import full_ellipticity

log = logging.getLogger("phiblab")

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_UNSTABLE = 0, 1, 2, 3

EXIT_BY_CODE = {
    "DIVISIBILITY_VIOLATION": EXIT_FAIL,
    "WINDING_INCONSISTENT": EXIT_FAIL,
    "NO_ADMISSIBLE_WEIGHT": EXIT_FAIL,
    "UNSTABLE_TRUNCATION": EXIT_UNSTABLE,
    "INCONCLUSIVE": EXIT_UNSTABLE,
    "NON_INTEGER": EXIT_UNSTABLE,
    "NEAR_SINGULAR_PATH": EXIT_UNSTABLE,
    "SPLIT_FAILURE": EXIT_UNSTABLE,
}


def exit_code_for(err: LabError) -> int:
    return EXIT_BY_CODE.get(err.code, EXIT_INPUT)


def jsonable(v):
    """Plain JSON types; complex as ``[re, im]``, non-finite floats as strings."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(v, (complex, np.complexfloating)):
        return [jsonable(v.real), jsonable(v.imag)]
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


# ---------------------------------------------------------------------------
# pipelines: each returns (status, exit_code, result, tolerances)
# ---------------------------------------------------------------------------

def _contour(sc: Scenario):
    if not sc.has("contour"):
        return None
    return sc.get("contour.half_width"), sc.get("contour.nodes_per_edge", 64)


def _check_pair(sc: Scenario, lo: float, hi: float, field: str) -> None:
    if not lo < hi:
        raise sc.error("needs lower < upper", field)


def run_groupoid(sc: Scenario, out: Path, threads: int, timing: dict):
    kind = sc.geometry().kind
    res = groupoid_suite(kind, sc.get("sampling.count", 1000), sc.seed)
    timing["suite_seconds"] = res.seconds
    ok = res.passed
    return ("PASS" if ok else "FAIL"), (EXIT_OK if ok else EXIT_FAIL), res.to_dict(), \
        {"groupoid": GROUPOID_TOL, "algebroid": ALGEBROID_TOL}


def run_symbols(sc: Scenario, out: Path, threads: int, timing: dict):
    geom = sc.geometry()
    res = symbol_suite(geom, sc.get("sampling.count", 200), sc.seed, sc.get("sampling.order", 2))
    timing["suite_seconds"] = res.seconds
    result = res.to_dict()
    code = EXIT_OK if res.passed else EXIT_FAIL
    if sc.has("operator"):
        v = full_ellipticity(sc.operator())
        result["ellipticity"] = v.to_dict()
        if v.inconclusive and code == EXIT_OK:
            code = EXIT_UNSTABLE
    status = {EXIT_OK: "PASS", EXIT_FAIL: "FAIL", EXIT_UNSTABLE: "INCONCLUSIVE"}[code]
    return status, code, result, {"symbols": SYMBOL_TOL}


def run_spectrum(sc: Scenario, out: Path, threads: int, timing: dict):
    P = sc.operator()
    if P.kind == GeometryKind.CORNER:
        raise GeometryMismatch("indicial spectrum needs a b-geometry", kind=P.kind.value)
    lo, hi = sc.get("weights.strip")
    _check_pair(sc, lo, hi, "weights.strip")
    N = sc.discretization().N if sc.has("discretization.N") else P.geometry.fiber_modes
    F = indicial_family(P, N)
    c = _contour(sc)
    W = c[0] if c and c[0] is not None else default_half_width(F)
    t0 = time.perf_counter()
    rep = locate_spectrum(F, (lo, hi), re_window=W, record_phase=True)
    timing["locate_seconds"] = time.perf_counter() - t0
    lr = log_residue(F, strip_contour(lo, hi, W, c[1] if c else 64))
    result = {"spectrum": rep.to_dict(), "log_residue": lr.to_dict(), "modes": N,
              "total_multiplicity": rep.total_multiplicity}
    ok = lr.value == rep.total_multiplicity == rep.total_winding
    model = sc.model()
    if model is not None and model.has_closed_form():
        want = model.roots(lo, hi)
        expected = sum(m for v, m in want if lo < v < hi)
        result["oracle"] = {"total_multiplicity": expected,
                            "neg_imag": [{"value": v, "multiplicity": m} for v, m in want]}
        ok = ok and expected == rep.total_multiplicity
    else:
        result["oracle"] = "ABSENT"
    _write_csv(out / "spectrum.csv", ["re", "im", "multiplicity"], rep.csv_rows())
    _write_csv(out / "det_phase.csv", ["node", "re", "im", "phase"],
               [(i, complex(z).real, complex(z).imag, ph) for i, (z, ph) in enumerate(rep.phase_samples)])
    return ("MATCH" if ok else "MISMATCH"), (EXIT_OK if ok else EXIT_FAIL), result, {}


def run_relindex(sc: Scenario, out: Path, threads: int, timing: dict):
    P = sc.operator()
    b1, b2 = sc.get("weights.beta1"), sc.get("weights.beta2")
    _check_pair(sc, b1, b2, "weights.beta2")
    d = sc.discretization()
    c = _contour(sc)
    contour = None
    if c is not None:
        W = c[0] if c[0] is not None else default_half_width(indicial_family(P, d.N))
        contour = strip_contour(b1, b2, W, c[1])
    cert = relative_index_verify(P, b1, b2, d, contour, sc.model(), threads)
    code = {Status.MATCH: EXIT_OK, Status.MISMATCH: EXIT_FAIL, Status.UNSTABLE: EXIT_UNSTABLE}[cert.status]
    return cert.status.value, code, cert.to_dict(), \
        {"svd_threshold": d.svd_threshold, "margin_ratio": MARGIN_RATIO, "weight_margin": WEIGHT_MARGIN}


def run_staircase(sc: Scenario, out: Path, threads: int, timing: dict):
    P = sc.operator()
    lo, hi = sc.get("weights.range")
    _check_pair(sc, lo, hi, "weights.range")
    steps = sc.get("weights.steps")
    if steps < 2:
        raise sc.error("needs at least 2 steps", "weights.steps")
    d = sc.discretization()
    st = index_staircase(P, (lo, hi), steps, d, threads)
    result = st.to_dict()
    model = sc.model()
    if model is not None and model.has_closed_form():
        result["oracle_roots"] = [{"neg_imag": v, "multiplicity": m} for v, m in model.roots(lo, hi)]
    else:
        result["oracle_roots"] = "ABSENT"
    _write_csv(out / "staircase.csv", ["beta", "rel_index", "index", "state", "margin"],
               [(r.beta, "" if r.rel_index is None else r.rel_index, "" if r.index is None else r.index,
                 r.state, "" if r.margin is None else r.margin) for r in st.rows])
    if not any(r.state == "FREDHOLM" for r in st.rows):
        return "UNSTABLE", EXIT_UNSTABLE, result, {"svd_threshold": d.svd_threshold}
    ok = st.consistent
    return ("PASS" if ok else "FAIL"), (EXIT_OK if ok else EXIT_FAIL), result, \
        {"svd_threshold": d.svd_threshold, "margin_ratio": MARGIN_RATIO, "weight_margin": WEIGHT_MARGIN}


def _zk(sc: Scenario) -> ZkOperator:
    P = sc.operator()
    k = sc.get("zk.k")
    if k < 2:
        raise sc.error("k must be at least 2", "zk.k")
    if sc.has("zk.base"):
        try:
            base = model_from_dict(sc.get("zk.base"), "zk.base").operator()
        except ConfigError as exc:
            raise sc.error(exc.message, exc.field or "zk.base") from None
        if sc.has("zk.coupling"):
            raise sc.error("coupling applies only without an explicit base", "zk.coupling")
        return ZkOperator(base, k, P)
    return zk_operator(P, k, sc.get("zk.coupling", 0.0))


def run_zk(sc: Scenario, out: Path, threads: int, timing: dict):
    Z = _zk(sc)
    d = sc.discretization()
    kfold = Z.is_kfold(d.N)
    rep = modk_index(Z, sc.get("weights.beta"), d, sc.get("weights.sweep", []), threads)
    result = rep.to_dict()
    if not kfold:
        result["flag"] = "NOT_KFOLD"
        return "FAIL", EXIT_FAIL, result, {}
    if not rep.stable:
        return "UNSTABLE", EXIT_UNSTABLE, result, {}
    ok = rep.constant
    return ("PASS" if ok else "FAIL"), (EXIT_OK if ok else EXIT_FAIL), result, \
        {"svd_threshold": d.svd_threshold, "weight_margin": WEIGHT_MARGIN}


def _set_param(spec: dict, dotted: str, value: float) -> dict:
    out = json.loads(json.dumps(spec))
    cur = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            raise KeyError(dotted)
        cur = cur[k]
    if keys[-1] not in cur:
        raise KeyError(dotted)
    cur[keys[-1]] = value
    return out


def run_homotopy(sc: Scenario, out: Path, threads: int, timing: dict):
    base_spec = {"name": sc.get("operator.model"), **sc.get("operator.params", {})}
    sc.model()  # validates the starting parameters
    dotted = sc.get("path.parameter")
    p0, p1 = sc.get("path.start"), sc.get("path.end")
    try:
        _set_param(base_spec, dotted, p0)
    except KeyError:
        raise sc.error(f"no model parameter '{dotted}'", "path.parameter") from None

    def path(t: float):
        return model_from_dict(_set_param(base_spec, dotted, p0 + t * (p1 - p0))).operator()

    k = sc.get("zk.k")
    d = sc.discretization()
    window = sc.get("weights.window", (-0.5, 2.5))
    _check_pair(sc, window[0], window[1], "weights.window")
    rep = homotopy_experiment(path, sc.get("path.steps", 4), d, k, window, sc.get("weights.pad", 0.05),
                              threads=threads)
    result = rep.to_dict()
    if not rep.stable:
        return "UNSTABLE", EXIT_UNSTABLE, result, {}
    return ("PASS" if rep.passed else "FAIL"), (EXIT_OK if rep.passed else EXIT_FAIL), result, \
        {"pad": sc.get("weights.pad", 0.05)}


PIPELINES = {
    Pipeline.GROUPOID_CHECK: run_groupoid,
    Pipeline.SYMBOL_CHECK: run_symbols,
    Pipeline.SPECTRUM: run_spectrum,
    Pipeline.RELINDEX: run_relindex,
    Pipeline.STAIRCASE: run_staircase,
    Pipeline.ZK: run_zk,
    Pipeline.HOMOTOPY: run_homotopy,
}


def run_scenario(path: str | Path, out: str | Path, threads: int = 1) -> tuple[int, dict]:
    """Run one scenario, write its artefacts into ``out`` and return ``(exit_code, report)``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    timing: dict = {}
    report: dict = {"tool": {"name": "phiblab", "version": __version__},
                    "scenario_file": Path(path).name, "error": None}
    try:
        sc = load_scenario(path)
        report["scenario"] = sc.echo()
        report["pipeline"] = sc.pipeline.value
        status, code, result, tols = PIPELINES[sc.pipeline](sc, out, threads, timing)
        report.update(status=status, result=result, tolerances=tols)
    except LabError as exc:
        code = exit_code_for(exc)
        report.update(status="ERROR", error=exc.to_dict())
    except ValueError as exc:
        code = EXIT_INPUT
        report.update(status="ERROR", error={"code": "CONFIG_ERROR", "message": str(exc)})
    except Exception as exc:  # noqa: BLE001 - still emit a report
        log.debug("unexpected failure", exc_info=True)
        code = EXIT_INPUT
        report.update(status="ERROR", error={"code": "INTERNAL_ERROR", "message": repr(exc),
                                             "traceback": traceback.format_exc().splitlines()[-3:]})
    timing["total_seconds"] = time.perf_counter() - t_start
    report["exit_code"] = code
    report["timing"] = timing
    text = json.dumps(jsonable(report), sort_keys=True, indent=2, allow_nan=False)
    (out / "report.json").write_text(text + "\n")
    return code, report


def strip_timing(report: dict) -> dict:
    """The report without its ``timing`` block, for reproducibility comparisons."""
    return {k: v for k, v in report.items() if k != "timing"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phiblab", description="Numerical lab for fibred cusp b-operators.")
    p.add_argument("--version", action="version", version=f"phiblab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario")
    r.add_argument("--out", default="phiblab_out", help="output directory (default: phiblab_out)")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--verbose", action="store_true")
    m = sub.add_parser("list-models", help="print the model catalog")
    m.add_argument("--machine", action="store_true", help="JSON output")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-models":
        if args.machine:
            print(json.dumps(jsonable(list_models()), sort_keys=True, indent=2))
        else:
            print(format_models())
        return EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("phiblab: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    code, report = run_scenario(args.scenario, args.out, args.threads)
    err = report.get("error")
    line = f"{report.get('pipeline', '?')}: {report.get('status')}"
    if err:
        line += f" [{err['code']}] {err['message']}"
        det = err.get("details") or {}
        if det.get("field") is not None:
            line += f" (field '{det['field']}'" + (f", line {det['line']}" if det.get("line") else "") + ")"
    print(line)
    print(f"report: {Path(args.out) / 'report.json'}  exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
