"""Command-line interface: parameter sweeps with CSV/JSON output.

Examples
--------
::

    qsphere spectrum --count 3 --q 0.5
    qsphere heat --t 0.05:2:20:log --method compare --figure heat.png
    qsphere action --cutoff gauss:a=2 --lam 2:10:5 --method compare
    qsphere rep --L 25 --check relations
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import action, heattrace, podles, qspec, zeta
from .errors import DomainError, NumericError, ParameterError, PrecisionWarning, QSphereError

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NUMERIC = 0, 2, 3, 4
REL_FLOOR = 1e-300
CONFIG_ENV = "QSPHERE_CONFIG"
DEFAULTS = {"q": 0.5, "w": 1.0, "tol": 1e-16, "format": "csv", "jobs": 1}


class UsageError(QSphereError):
    """Malformed command-line input detected before any computation."""


# ----------------------------------------------------------------------------
# argument parsing helpers


def parse_sweep(text: str, *, positive: bool = False) -> tuple[np.ndarray, bool]:
    """Parse ``start:stop:count[:log]``, a comma list, or a single number.

    Returns the points and whether logarithmic spacing was requested.
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin")):
                raise UsageError(f"sweep {text!r}: expected start:stop:count[:log]")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            log = len(parts) == 4 and parts[3] == "log"
            if count < 1:
                raise UsageError(f"sweep {text!r}: count must be >= 1")
            if count > 1 and not start < stop:
                raise UsageError(f"sweep {text!r}: start must be < stop")
            if log:
                if start <= 0:
                    raise UsageError(f"sweep {text!r}: log spacing needs start > 0")
                pts = np.logspace(math.log10(start), math.log10(stop), count)
            else:
                pts = np.linspace(start, stop, count)
        else:
            pts, log = np.array([float(v) for v in text.split(",")]), False
    except ValueError as exc:
        raise UsageError(f"cannot parse sweep {text!r}: {exc}") from None
    if not np.all(np.isfinite(pts)):
        raise UsageError(f"sweep {text!r} contains non-finite values")
    if positive and np.any(pts <= 0):
        raise UsageError(f"sweep {text!r}: all values must be > 0")
    return pts, log


def parse_complex_list(text: str) -> list[complex]:
    """Comma-separated complex literals such as ``2,0.5+1j``."""
    try:
        return [complex(v.strip().replace("i", "j")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse complex list {text!r}") from None


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"range {text!r}: expected lo:hi") from None
    return lo, hi


def read_config(path: str | None) -> dict[str, str]:
    """Flat ``key=value`` file; blank lines and ``#`` comments ignored."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}:{n}: expected key=value")
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    unknown = set(out) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"{path}: unknown keys {sorted(unknown)}")
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config file over defaults."""
    cfg = read_config(args.config)
    out = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        value = flag if flag is not None else cfg.get(key, default)
        try:
            out[key] = type(default)(value)
        except ValueError:
            raise UsageError(f"{key}={value!r} is not a valid {type(default).__name__}") from None
    if out["format"] not in ("csv", "json"):
        raise UsageError(f"format={out['format']!r}; expected csv or json")
    if out["jobs"] < 1:
        raise UsageError("jobs must be >= 1")
    out["params"] = qspec.QParams(out["q"], out["w"])
    out["ctl"] = zeta.SeriesControl(tol=out["tol"])
    return out


# ----------------------------------------------------------------------------
# output


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), REL_FLOOR)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def render(rows: list[dict], fmt: str) -> str:
    """CSV (header row, LF endings, 17 significant digits) or a JSON array of records."""
    if fmt == "json":
        return json.dumps([{k: _jsonable(v) for k, v in r.items()} for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        writer.writerow(list(rows[0]))
        for r in rows:
            writer.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


def run_sweep(fn, points, jobs: int) -> list:
    """Evaluate ``fn`` over ``points``; results keep sweep order for any ``jobs``."""
    points = list(points)
    if jobs <= 1 or len(points) < 2:
        return [fn(p) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, points))


# ----------------------------------------------------------------------------
# per-point workers (module level so they pickle for process pools)


def _spectrum_row(k: int, params) -> dict:
    return {"k": k, "eigenvalue_full": qspec.eigenvalue_full(k, params),
            "eigenvalue_simplified": qspec.eigenvalue_simplified(k, params),
            "multiplicity": qspec.multiplicity(k)}


def _zeta_row(s: complex, params, ctl, method: str) -> dict:
    row = {"re": s.real, "im": s.imag}
    fns = {"direct": zeta.zeta_direct, "continued": zeta.zeta_continued, "simplified": zeta.zeta_simplified}
    if method == "compare":
        a, b = zeta.zeta_direct(s, params, ctl), zeta.zeta_continued(s, params, ctl)
        row.update(direct_re=a.real, direct_im=a.imag, continued_re=b.real, continued_im=b.imag,
                   rel_err=abs(a - b) / max(abs(a), abs(b), REL_FLOOR))
    else:
        v = fns[method](s, params, ctl)
        row.update(value_re=v.real, value_im=v.imag)
    return row


def _residue(t: float, params, ctl, simplified: bool = False):
    fn = heattrace.trace_simplified_residue if simplified else heattrace.trace_residue
    with warnings.catch_warnings():
        # surfaced through the precision_warning column instead
        warnings.simplefilter("ignore", PrecisionWarning)
        return fn(t, params, ctl, full_output=True)


def _heat_row(t: float, params, ctl, method: str) -> dict:
    row = {"t": t}
    if method == "direct":
        row["value"] = heattrace.trace_direct(t, params, ctl)
    elif method == "simplified-direct":
        row["value"] = heattrace.trace_simplified_direct(t, params, ctl)
    elif method == "classical":
        row["value"] = heattrace.trace_classical(t, params.w_abs)
    elif method in ("residue", "simplified-residue"):
        ev = _residue(t, params, ctl, method == "simplified-residue")
        row.update(value=ev.value, cancellation_ratio=ev.cancellation_ratio,
                   precision_warning=ev.precision_warning)
    else:
        d = heattrace.trace_direct(t, params, ctl)
        ev = _residue(t, params, ctl)
        row.update(direct=d, residue=ev.value, rel_err=rel_err(d, ev.value),
                   precision_warning=ev.precision_warning)
    return row


def _action_row(lam: float, measure, params, ctl, method: str) -> dict:
    row = {"lam": lam}
    if method == "exact":
        ev = action.action_exact(lam, measure, params, ctl=ctl, full_output=True)
        row.update(value=ev.value, provenance=ev.provenance)
    elif method == "direct":
        row["value"] = action.action_direct(lam, measure, params, ctl)
    elif method == "simplified":
        row["value"] = action.action_simplified_exact(lam, measure, params, ctl=ctl)
    elif method == "simplified-direct":
        row["value"] = action.action_simplified_direct(lam, measure, params, ctl)
    else:
        ev = action.action_exact(lam, measure, params, ctl=ctl, full_output=True)
        d = action.action_direct(lam, measure, params, ctl)
        row.update(exact=ev.value, direct=d, rel_err=rel_err(ev.value, d), provenance=ev.provenance)
    return row


# ----------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg: dict, args) -> tuple[list[dict], dict]:
    if args.count < 1:
        raise UsageError("count must be >= 1")
    rows = run_sweep(partial(_spectrum_row, params=cfg["params"]), range(args.count), cfg["jobs"])
    return rows, {"x": "k", "logy": True}


def cmd_zeta(cfg: dict, args) -> tuple[list[dict], dict]:
    if args.re is not None:
        res, _ = parse_sweep(args.re)
        pts = [complex(r, args.im) for r in res]
    else:
        pts = parse_complex_list(args.s)
    fn = partial(_zeta_row, params=cfg["params"], ctl=cfg["ctl"], method=args.method)
    return run_sweep(fn, pts, cfg["jobs"]), {"x": "re"}


def cmd_poles(cfg: dict, args) -> tuple[list[dict], dict]:
    params = cfg["params"]
    re_range = parse_range(args.re)
    im_range = parse_range(args.im)
    if args.im_unit == "eta":
        im_range = (im_range[0] * params.eta, im_range[1] * params.eta)
    recs = zeta.pole_scan(re_range, im_range, params, cfg["ctl"], variant=args.variant, shift=args.shift)
    rows = [{"re": r.location.real, "im": r.location.imag, "order": r.order,
             "c_m2_re": complex(r.c_m2).real, "c_m2_im": complex(r.c_m2).imag,
             "c_m1_re": complex(r.c_m1).real, "c_m1_im": complex(r.c_m1).imag} for r in recs]
    return rows, {"x": "re", "y": ["im"]}


def cmd_heat(cfg: dict, args) -> tuple[list[dict], dict]:
    ts, log = parse_sweep(args.t, positive=True)
    fn = partial(_heat_row, params=cfg["params"], ctl=cfg["ctl"], method=args.method)
    rows = run_sweep(fn, ts, cfg["jobs"])
    y = ["direct", "residue"] if args.method == "compare" else ["value"]
    return rows, {"x": "t", "y": y, "logx": log, "logy": True}


def cmd_action(cfg: dict, args) -> tuple[list[dict], dict]:
    lams, log = parse_sweep(args.lam, positive=True)
    measure = action.parse_cutoff(args.cutoff)
    fn = partial(_action_row, measure=measure, params=cfg["params"], ctl=cfg["ctl"], method=args.method)
    rows = run_sweep(fn, lams, cfg["jobs"])
    y = ["exact", "direct"] if args.method == "compare" else ["value"]
    return rows, {"x": "lam", "y": y, "logx": log}


def parse_form(text: str) -> list[tuple[str, str, complex]]:
    """``a_word,b_word,coef;...`` into one-form terms."""
    terms = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 3:
            raise UsageError(f"one-form term {chunk!r}: expected a_word,b_word,coefficient")
        for w in parts[:2]:
            if len(podles.parse_word(w)) > 3:
                raise UsageError(f"word {w!r} longer than 3 generators")
        terms.append((parts[0], parts[1], parse_complex_list(parts[2])[0]))
    return terms


def cmd_rep(cfg: dict, args) -> tuple[list[dict], dict]:
    params = cfg["params"]
    rep = podles.build_rep(args.L, params, args.w_phase)
    if args.dump:
        path = args.dump_path or f"{args.dump.replace('*', 'star')}_L{args.L}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            podles.dump_matrix(rep, args.dump, fh)
    check = args.check
    bar = {"x": None, "logy": True}
    if check == "relations":
        rows = [{"relation": k, "interior_residual": v, "full_residual": f}
                for (k, v), f in zip(podles.check_relations(rep).items(),
                                     podles.check_relations(rep, interior=False).values())]
        return rows, dict(bar, y=["interior_residual"])
    if check == "real-structure":
        rows = [{"identity": k, "residual": v} for k, v in podles.check_real_structure(rep).items()]
        return rows, dict(bar, y=["residual"])
    if check == "spectrum":
        return [{"L": args.L, "max_rel_dev": podles.spectrum_residual(rep)}], dict(bar, y=["max_rel_dev"])
    if check == "delta-growth":
        rows = []
        for g in args.generator:
            for n in args.n:
                res = podles.delta_power(rep, g, n)
                rows.append({"generator": g, "n": n, "slope": res.slope, "slope_m_half": res.slope_m_half,
                             "expected": (n - 1) * math.log(1 / params.q) if n >= 1 else 0.0,
                             "max_element": res.max_element})
        return rows, dict(bar, y=["max_element"])
    if check == "commutation":
        zs = parse_complex_list(args.z)
        rows = [{"generator": g, "z_re": z.real, "z_im": z.imag, "norm": podles.commutation_probe(rep, g, z)}
                for g in args.generator for z in zs]
        return rows, dict(bar, y=["norm"], logy=False)
    # fluctuation
    ts, log = parse_sweep(args.t, positive=True)
    form = podles.one_form(rep, parse_form(args.form), args.epsilon)
    pert = np.atleast_1d(podles.fluctuated_trace(rep, form, ts))
    unp = np.atleast_1d(podles.fluctuated_trace(rep, None, ts))
    rows = [{"t": t, "unperturbed": u, "fluctuated": f, "diff_over_log2t": (f - u) / math.log(t) ** 2}
            for t, u, f in zip(ts, unp, pert)]
    if len(ts) >= 3:
        a2 = heattrace.small_t_fit(zip(ts, pert))[0]
        a2u = heattrace.small_t_fit(zip(ts, unp))[0]
        print(f"# log^2 t coefficient: fluctuated={a2:.10g} unperturbed={a2u:.10g} "
              f"2/log^2 q={2 / params.log_q ** 2:.10g} x_norm={form.x_norm:.6g}", file=sys.stderr)
    return rows, {"x": "t", "y": ["unperturbed", "fluctuated"], "logx": log, "logy": True}


COMMANDS = {"spectrum": cmd_spectrum, "zeta": cmd_zeta, "poles": cmd_poles, "heat": cmd_heat,
            "action": cmd_action, "rep": cmd_rep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--q", type=float, help="deformation parameter, 0 < q < 1 (default 0.5)")
    g.add_argument("--w", type=float, help="|w|, scale of the Dirac operator (default 1)")
    g.add_argument("--tol", type=float, help="series tolerance (default 1e-16)")
    g.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    g.add_argument("--output", "-o", help="output file (default stdout)")
    g.add_argument("--config", help=f"key=value config file (default ${CONFIG_ENV})")
    g.add_argument("--jobs", type=int, help="worker processes for sweeps (default 1)")
    g.add_argument("--figure", help="also render a figure of the table to this path")

    parser = argparse.ArgumentParser(prog="qsphere", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues of |D| and |D_S|")
    p.add_argument("--count", type=int, default=10)

    p = sub.add_parser("zeta", parents=[common], help="spectral zeta function")
    p.add_argument("--s", default="2", help="comma list of complex points")
    p.add_argument("--re", help="sweep of Re s (overrides --s)")
    p.add_argument("--im", type=float, default=0.0, help="Im s used with --re")
    p.add_argument("--method", choices=("direct", "continued", "simplified", "compare"), default="continued")

    p = sub.add_parser("poles", parents=[common], help="scan a rectangle for poles of zeta")
    p.add_argument("--re", default="-5:1", help="lo:hi")
    p.add_argument("--im", default="-1:1", help="lo:hi")
    p.add_argument("--im-unit", choices=("abs", "eta"), default="abs",
                   help="interpret --im in absolute units or multiples of eta")
    p.add_argument("--variant", choices=("full", "simplified"), default="full")
    p.add_argument("--shift", type=int, default=0, help="scan zeta(s + shift)")

    p = sub.add_parser("heat", parents=[common], help="heat trace Tr exp(-t|D|)")
    p.add_argument("--t", default="0.5", help="sweep start:stop:count[:log] or list")
    p.add_argument("--method", default="direct",
                   choices=("direct", "residue", "simplified-direct", "simplified-residue", "classical", "compare"))

    p = sub.add_parser("action", parents=[common], help="spectral action Tr f(|D|/Lambda)")
    p.add_argument("--cutoff", default="point:a=1", help="e.g. point:a=1, step:a=1,b=3, gauss:a=2")
    p.add_argument("--lam", default="5", help="sweep of Lambda")
    p.add_argument("--method", choices=("exact", "direct", "simplified", "simplified-direct", "compare"),
                   default="exact")

    p = sub.add_parser("rep", parents=[common], help="truncated representation checks")
    p.add_argument("--L", type=int, default=25)
    p.add_argument("--w-phase", type=float, default=0.0)
    p.add_argument("--check", default="relations",
                   choices=("relations", "real-structure", "spectrum", "delta-growth", "commutation", "fluctuation"))
    p.add_argument("--generator", nargs="+", default=["A"], choices=podles.GENERATORS)
    p.add_argument("--n", nargs="+", type=int, default=[1, 2, 3])
    p.add_argument("--z", default="1", help="comma list of complex z for the commutation probe")
    p.add_argument("--form", default="A,A,1", help="one-form terms a_word,b_word,coef;...")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--t", default="1e-4:1e-2:21:log", help="t sweep for the fluctuation check")
    p.add_argument("--dump", help="write this matrix (A, B, B*, D, F, gamma, absD) as CSV")
    p.add_argument("--dump-path", help="path for --dump")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        cfg = resolve(args)
        rows, plot = COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"qsphere: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ParameterError) as exc:
        print(f"qsphere: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NumericError as exc:
        print(f"qsphere: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(rows, cfg["format"])
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.figure and rows:
        from .plotting import plot_table

        plot_table(rows, args.figure, x=plot.get("x") or next(iter(rows[0])), y=plot.get("y"),
                   logx=plot.get("logx", False), logy=plot.get("logy", False),
                   title=f"qsphere {args.command} (q={cfg['q']:g})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
