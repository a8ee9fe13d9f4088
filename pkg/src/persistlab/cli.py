"""Command line front end.

Every CSV starts with ``#`` comment lines: the tool version, the exact command
line that reproduces the file, and a JSON echo of the effective configuration.
Exit codes: 0 success, 1 usage or validation error, 2 numerical failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shlex
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .critical import (
    QuadratureSettings,
    delta_c_lower_bound,
    find_delta_c,
    find_tc,
    m_prime,
    m_prime_envelope,
)
from .dynamics import argmin_persistent, spectral
from .graphical import COUPLED_NODE_BUDGET, coupling_campaign
from .model import DeterministicPeriod, PersistLabError, PoissonIntensity, Rates, Seed, validate_rates
from .simulate import CAMPAIGN_CAP, effective_threads, summarize_survival, survival_replicates
from . import svg

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
PROG = "persistlab"
NUMERIC_ERRORS = (ArithmeticError, RuntimeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(v: float) -> str:
    return repr(float(v))


# output helpers


def _header(ns: argparse.Namespace, cmdline: str) -> list[str]:
    cfg = {k: v for k, v in sorted(vars(ns).items()) if k not in ("func", "out", "summary_out", "cmdline")}
    return [
        f"# {PROG} {__version__}",
        f"# command: {cmdline}",
        f"# config: {json.dumps(cfg, sort_keys=True)}",
    ]


def _csv_text(header: list[str], columns: Sequence[str], rows, footer: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc}") from exc


def _emit_table(ns, columns, rows, footer=(), plot_kind: Optional[str] = None) -> None:
    header = _header(ns, ns.cmdline)
    if ns.format == "json":
        payload = {"columns": list(columns), "rows": [[_jsonable(v) for v in r] for r in rows],
                   "footer": list(footer), "config": json.loads(header[2][len("# config: "):])}
        _emit(json.dumps(payload, indent=2) + "\n", ns.out)
        return
    text = _csv_text(header, columns, rows, footer)
    _emit(text, ns.out)
    if ns.format == "svg+csv":
        if ns.out in (None, "-"):
            raise UsageError("--format svg+csv needs --out")
        Path(ns.out).with_suffix(".svg").write_text(_render(text, plot_kind))


def _jsonable(v):
    if v == "":
        return None
    try:
        return float(v)
    except (TypeError, ValueError):
        return v


def _rates(ns) -> Rates:
    return validate_rates(Rates(ns.lam, ns.a, ns.b), "solver")


def _quad(ns) -> QuadratureSettings:
    return QuadratureSettings(node_count=ns.quad_nodes)


def _space(lo: float, hi: float, n: int, spacing: str) -> np.ndarray:
    if n < 1:
        raise UsageError("number of points must be >= 1")
    if spacing == "log":
        if not (lo > 0 and hi > 0):
            raise UsageError("log-spaced ranges must be positive")
        return np.geomspace(lo, hi, n) if n > 1 else np.array([lo])
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


# commands


def analyze_report(r: Rates, with_delta_c: bool = False, tol: float = 1e-6,
                   q: QuadratureSettings = QuadratureSettings()) -> dict:
    sd = spectral(r)
    report = {
        "lambda": r.lam, "a": r.a, "b": r.b,
        "disc": sd.disc, "nu1": sd.nu1, "nu2": sd.nu2, "c1": sd.c1, "c2": sd.c2,
        "K": sd.K, "t_star": argmin_persistent(sd),
        "tc": find_tc(r).value,
        "delta_c_lower_bound": delta_c_lower_bound(r),
    }
    if with_delta_c:
        res = find_delta_c(r, tol, q)
        report["delta_c"] = res.value
        report["delta_c_bracket"] = list(res.bracket)
        if res.anomalies:
            report["delta_c_anomalies"] = list(res.anomalies)
    return report


def cmd_analyze(ns) -> int:
    report = analyze_report(_rates(ns), ns.delta_c, ns.tol or 1e-6, _quad(ns))
    _emit(json.dumps(report, indent=2) + "\n", ns.out)
    return EXIT_OK


def _sweep_status(errors: list[str], cells: int) -> int:
    if not errors:
        return EXIT_OK
    print(f"{PROG}: solver failed on {len(errors)} of {cells} cells; first: {errors[0]}", file=sys.stderr)
    return EXIT_NUMERIC


def tc_grid_rows(lam: float, a_values, b_values) -> tuple[list, list[str]]:
    rows, errors = [], []
    for a in a_values:
        for b in b_values:
            try:
                rows.append([_num(lam), _num(a), _num(b), _num(find_tc(Rates(lam, a, b)).value), ""])
            except (PersistLabError, ArithmeticError) as exc:
                rows.append([_num(lam), _num(a), _num(b), "", str(exc)])
                errors.append(str(exc))
    return rows, errors


def cmd_tc_grid(ns) -> int:
    a_vals = _space(ns.a_min, ns.a_max, ns.points, ns.spacing)
    b_vals = _space(ns.b_min, ns.b_max, ns.points, ns.spacing)
    rows, errors = tc_grid_rows(ns.lam, a_vals, b_vals)
    tcs = [float(r[3]) for r in rows if r[3]]
    footer = []
    if tcs:
        footer.append(f"summary: cells={len(rows)} tc_min={_num(min(tcs))} tc_max={_num(max(tcs))} "
                      f"ratio={_num(max(tcs) / min(tcs))}")
    columns = ["lambda", "a", "b", "tc"]
    if errors:
        columns.append("error")
    else:
        rows = [r[:4] for r in rows]
    _emit_table(ns, columns, rows, footer, "heatmap")
    return _sweep_status(errors, len(rows))


def cmd_tc_lambda(ns) -> int:
    lams = _space(ns.lambda_min, ns.lambda_max, ns.points, ns.spacing)
    rows, errors = [], []
    for lam in lams:
        try:
            rows.append([_num(lam), _num(find_tc(Rates(lam, ns.a, ns.b)).value)])
        except (PersistLabError, ArithmeticError) as exc:
            rows.append([_num(lam), "", str(exc)])
            errors.append(str(exc))
    columns = ["lambda", "tc"] + (["error"] if errors else [])
    _emit_table(ns, columns, rows, (), "line")
    return _sweep_status(errors, len(rows))


def cmd_mprime(ns) -> int:
    r = _rates(ns)
    q = _quad(ns)
    rows = []
    signs = []
    for d in _space(ns.delta_min, ns.delta_max, ns.points, ns.spacing):
        mp = m_prime(r, d, q)
        lo, hi = m_prime_envelope(r, d)
        rows.append([_num(d), _num(mp), _num(lo), _num(hi)])
        signs.append(mp > 0)
    changes = sum(1 for s0, s1 in zip(signs, signs[1:]) if s0 != s1)
    _emit_table(ns, ["delta", "m_prime", "lower_envelope", "upper_envelope"], rows,
                [f"summary: sign_changes={changes}"], "line")
    return EXIT_OK


def cmd_delta_c(ns) -> int:
    r = _rates(ns)
    res = find_delta_c(r, ns.tol or 1e-6, _quad(ns))
    out = asdict(res)
    out["bracket"] = list(res.bracket)
    out["anomalies"] = list(res.anomalies)
    out["lower_bound"] = delta_c_lower_bound(r)
    out.update({"lambda": r.lam, "a": r.a, "b": r.b})
    _emit(json.dumps(out, indent=2) + "\n", ns.out)
    return EXIT_OK


def _schedule(ns):
    if (ns.period is None) == (ns.delta is None):
        raise UsageError("give exactly one of --period (deterministic) or --delta (Poisson)")
    return DeterministicPeriod(ns.period) if ns.period is not None else PoissonIntensity(ns.delta)


def cmd_survival(ns) -> int:
    r = _rates(ns)
    s = _schedule(ns)
    if ns.reps < 100 or ns.epochs < 1:
        raise UsageError("need --reps >= 100 and --epochs >= 1")
    cap = ns.cap if ns.cap > 0 else None
    seed = Seed(ns.seed)
    outcomes = survival_replicates(r, s, ns.reps, ns.epochs, seed, ns.init_n2, cap, ns.threads)
    est = summarize_survival(outcomes, ns.epochs, cap)
    header = _header(ns, ns.cmdline)
    rows = [[o.index, int(o.survived), int(o.capped), o.epochs_run,
             "" if o.extinct_at is None else o.extinct_at, o.final_z] for o in outcomes]
    _emit(_csv_text(header, ["replicate", "survived", "capped", "epochs_run", "extinct_at", "final_z"], rows),
          ns.out)
    summary_cols = ["lambda", "a", "b", "schedule", "param", "reps", "epochs", "survivors",
                    "p_hat", "ci_lo", "ci_hi", "seed"]
    summary = [[_num(r.lam), _num(r.a), _num(r.b), s.label, _num(s.param), est.reps, est.epochs,
                est.survivors, _num(est.p_hat), _num(est.ci95[0]), _num(est.ci95[1]), ns.seed]]
    # a storm means the cap trips before the first killing: the cap is too small
    early = sum(1 for o in outcomes if o.capped and o.epochs_run == 0)
    footer = [f"capped={est.capped} capped_before_first_kill={early} cap={cap} alive_definition={est.alive_definition}"]
    _emit(_csv_text(header, summary_cols, summary, footer), ns.summary_out)
    if early > 0.5 * est.reps:
        print(f"{PROG}: {early} of {est.reps} replicates hit the population cap before the first killing",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_coupling_check(ns) -> int:
    r = _rates(ns)
    if not 0 < ns.delta < ns.delta_high:
        raise UsageError("need 0 < --delta < --delta-high")
    outs = coupling_campaign(r, ns.delta, ns.delta_high, ns.horizon, ns.reps, Seed(ns.seed),
                             ns.threads, ns.node_budget)
    n = len(outs)
    p_low = sum(o.alive_low for o in outs) / n
    p_high = sum(o.alive_high for o in outs) / n
    diff = np.array([o.alive_low for o in outs], float) - np.array([o.alive_high for o in outs], float)
    report = {
        "lambda": r.lam, "a": r.a, "b": r.b, "delta": ns.delta, "delta_high": ns.delta_high,
        "horizon": ns.horizon, "reps": n, "seed": ns.seed,
        "violations": sum(not o.containment_ok for o in outs),
        "p_low": p_low, "p_high": p_high,
        "gap": p_low - p_high,
        "gap_stderr": float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "truncated": sum(o.truncated for o in outs),
        "truncated_high": sum(o.truncated_high for o in outs),
        "node_budget": ns.node_budget,
    }
    _emit(json.dumps(report, indent=2) + "\n", ns.out)
    return EXIT_NUMERIC if report["violations"] else EXIT_OK


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no CSV header")
    rows = list(csv.reader(lines))
    if len(rows) < 2:
        raise ValueError(f"{path}: empty CSV body")
    return rows[0], rows[1:]


def _render(text_or_path: str, kind: Optional[str], from_text: bool = True) -> str:
    if from_text:
        lines = [ln for ln in text_or_path.splitlines() if ln and not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if len(rows) < 2:
            raise ValueError("empty CSV body")
        cols, body = rows[0], rows[1:]
    else:
        cols, body = _read_csv(text_or_path)
    try:
        if cols[:4] == ["lambda", "a", "b", "tc"]:
            kind = kind or "heatmap"
            if kind != "heatmap":
                raise ValueError("tc-grid CSV renders as a heatmap")
            a_vals = sorted({float(r[1]) for r in body})
            b_vals = sorted({float(r[2]) for r in body})
            z = np.full((len(b_vals), len(a_vals)), np.nan)
            for r in body:
                z[b_vals.index(float(r[2])), a_vals.index(float(r[1]))] = float(r[3]) if r[3] else np.nan
            return svg.heatmap(a_vals, b_vals, z, "a", "b", "critical period tc", "tc")
        if cols[:2] == ["lambda", "tc"]:
            kind = kind or "line"
            if kind != "line":
                raise ValueError("tc-lambda CSV renders as a line chart")
            pts = [(float(r[0]), float(r[1])) for r in body if r[1]]
            return svg.line_chart([p[0] for p in pts], [p[1] for p in pts], "lambda", "tc",
                                  "critical period tc against lambda")
        if cols[:2] == ["delta", "m_prime"]:
            kind = kind or "line"
            if kind != "line":
                raise ValueError("mprime CSV renders as a line chart")
            return svg.line_chart([float(r[0]) for r in body], [float(r[1]) for r in body], "delta",
                                  "m_prime", "mean log offspring mean m'", logx=True)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed CSV: {exc}") from exc
    raise ValueError(f"unrecognised CSV columns {cols}")


def cmd_plot(ns) -> int:
    try:
        out = _render(ns.csv_path, ns.kind, from_text=False)
    except ValueError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return EXIT_IO
    target = ns.out or str(Path(ns.csv_path).with_suffix(".svg"))
    _emit(out, target)
    return EXIT_OK


# parser


def _add_rates(p, lam=2.0, a=1.0, b=1.0):
    p.add_argument("--lambda", dest="lam", type=float, default=lam, help="birth rate of normal cells")
    p.add_argument("--a", type=float, default=a, help="normal -> persistent switch rate")
    p.add_argument("--b", type=float, default=b, help="persistent -> normal switch rate")


def _add_common(p, fmt_default="csv", formats=("csv", "json", "svg+csv")):
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", default=fmt_default, choices=formats)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="spectral data and critical values as JSON")
    _add_rates(p)
    _add_common(p, "json", ("json",))
    p.add_argument("--delta-c", action="store_true", help="also solve for delta_c (slower)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--quad-nodes", type=int, default=32)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tc-grid", help="T_c over a grid of (a, b)")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--a-min", type=float, default=1e-6)
    p.add_argument("--a-max", type=float, default=1e-3)
    p.add_argument("--b-min", type=float, default=1e-6)
    p.add_argument("--b-max", type=float, default=1e-3)
    p.add_argument("--points", type=int, default=20, help="grid points per axis")
    p.add_argument("--spacing", choices=("log", "lin"), default="log")
    _add_common(p)
    p.set_defaults(func=cmd_tc_grid)

    p = sub.add_parser("tc-lambda", help="T_c as a function of lambda")
    p.add_argument("--a", type=float, default=1e-6)
    p.add_argument("--b", type=float, default=1e-3)
    p.add_argument("--lambda-min", type=float, default=0.5)
    p.add_argument("--lambda-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--spacing", choices=("log", "lin"), default="log")
    _add_common(p)
    p.set_defaults(func=cmd_tc_lambda)

    p = sub.add_parser("mprime", help="m'(delta) with its analytic envelope")
    _add_rates(p)
    p.add_argument("--delta-min", type=float, default=0.1)
    p.add_argument("--delta-max", type=float, default=50.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--spacing", choices=("log", "lin"), default="log")
    p.add_argument("--quad-nodes", type=int, default=32)
    _add_common(p)
    p.set_defaults(func=cmd_mprime)

    p = sub.add_parser("delta-c", help="critical Poisson killing intensity")
    _add_rates(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--quad-nodes", type=int, default=32)
    _add_common(p, "json", ("json",))
    p.set_defaults(func=cmd_delta_c)

    p = sub.add_parser("survival", help="Monte Carlo survival campaign")
    _add_rates(p)
    p.add_argument("--period", type=float, default=None, help="deterministic killing period T")
    p.add_argument("--delta", type=float, default=None, help="Poisson killing intensity")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-n2", type=int, default=1)
    p.add_argument("--cap", type=int, default=CAMPAIGN_CAP, help="population cap, 0 disables")
    p.add_argument("--summary-out", default=None, help="summary CSV path (default stdout)")
    _add_common(p, "csv", ("csv",))
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("coupling-check", help="thinning coupling between two killing intensities")
    _add_rates(p)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--delta-high", type=float, default=3.0)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--node-budget", type=int, default=COUPLED_NODE_BUDGET)
    _add_common(p, "json", ("json",))
    p.set_defaults(func=cmd_coupling_check)

    p = sub.add_parser("plot", help="render a CSV produced by this tool as SVG")
    p.add_argument("csv_path")
    p.add_argument("--kind", choices=("line", "heatmap"), default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def _cmdline(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> str:
    """Canonical command line with every option spelled out."""
    sub = parser._subparsers._group_actions[0].choices[ns.command]  # noqa: SLF001
    parts = [PROG, ns.command]
    for action in sub._actions:  # noqa: SLF001
        if not action.option_strings or action.dest in ("help", "out", "summary_out", "format"):
            continue
        value = getattr(ns, action.dest)
        flag = action.option_strings[-1] if action.dest != "lam" else "--lambda"
        if isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
            if value:
                parts.append(flag)
        elif value is not None:
            parts += [flag, str(value)]
    if getattr(ns, "format", None):
        parts += ["--format", ns.format]
    return shlex.join(parts)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == PROG:
        argv = argv[1:]
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if hasattr(ns, "threads"):
        ns.threads = effective_threads(ns.threads)
    ns.cmdline = _cmdline(ns, parser)
    try:
        return ns.func(ns)
    except UsageError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PersistLabError as exc:
        code = EXIT_NUMERIC if isinstance(exc, NUMERIC_ERRORS) else EXIT_USAGE
        print(f"{PROG}: {exc}", file=sys.stderr)
        return code
    except ArithmeticError as exc:
        print(f"{PROG}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
