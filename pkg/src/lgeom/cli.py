"""Command-line front end: ``lgeom <command> [flags]``.

Commands: eval, sample, fit, compare, shape, curves, moments.  JSON output
is ``{command, config_echo, result, diagnostics}``; CSV and table formats
are provided for row-shaped results.  Exit codes: 0 success, 2 validation
error, 3 non-convergence.
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
from dataclasses import dataclass, field

import numpy as np

from . import core, inference, lifetime, models, moments
from .core import LGParams
from .errors import ConvergenceError, DataValidationError, LGError, TailError
from .inference import EMConfig
from .sample import Sample
from .series import DEFAULT_CONTROL, SeriesControl

__all__ = ["RunConfig", "ingest_csv", "run", "main", "build_parser"]

COMMANDS = ("eval", "sample", "fit", "compare", "shape", "curves", "moments")
EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 2, 3


class CLIValidationError(LGError, ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    output_format: str = "json"
    seed: int | None = None
    params: LGParams | None = None
    series: SeriesControl = DEFAULT_CONTROL
    em: EMConfig = field(default_factory=EMConfig)
    n: int | None = None
    r: int = 4
    xi: list | None = None
    y: list | None = None
    curve: str = "lorenz"
    points: int = 200
    method: str = "em"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise CLIValidationError(f"unknown command {self.command!r}")
        if self.command in ("fit", "compare") and not self.input_path:
            raise CLIValidationError(f"{self.command} requires --input")
        if self.command in ("eval", "sample", "shape", "curves", "moments") and self.params is None:
            raise CLIValidationError(f"{self.command} requires --p and --theta")
        if self.command == "sample" and (self.n is None or self.n < 1):
            raise CLIValidationError("sample requires --n >= 1")
        if self.output_format not in ("json", "csv", "table"):
            raise CLIValidationError(f"unknown format {self.output_format!r}")

    def echo(self) -> dict:
        out = {"command": self.command, "format": self.output_format}
        if self.input_path is not None:
            out["input"] = self.input_path
        if self.params is not None:
            out["p"], out["theta"] = self.params.p, self.params.theta
        if self.command == "sample":
            out["n"], out["seed"] = self.n, self.seed
        if self.command in ("fit", "compare"):
            out["method"] = self.method
            out["tol"] = self.em.tol_param
            out["max_iter"] = self.em.max_iter
        if self.command == "eval":
            out["y"], out["xi"] = self.y, self.xi
        if self.command == "curves":
            out["curve"], out["points"] = self.curve, self.points
        if self.command == "moments":
            out["r"] = self.r
        return out


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------


def _parse_float(text: str):
    try:
        return float(text)
    except ValueError:
        return None


def ingest_csv(path) -> Sample:
    """Read one lifetime per line; a non-numeric first line is a header.

    Raises
    ------
    DataValidationError
        Listing every offending line (1-based) when any entry is non-numeric,
        non-finite or not strictly positive.
    OSError
        If the file cannot be read.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DataValidationError(f"{path}: not UTF-8 ({exc})") from exc
    values, problems = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        item = line.strip()
        if not item:
            continue
        v = _parse_float(item)
        if v is None:
            if lineno == 1:
                continue  # header
            problems.append((lineno, f"not a number: {item!r}"))
        elif not math.isfinite(v):
            problems.append((lineno, f"not finite: {item!r}"))
        elif v <= 0:
            problems.append((lineno, f"lifetimes must be > 0: {item!r}"))
        else:
            values.append(v)
    if problems:
        detail = "; ".join(f"line {ln}: {msg}" for ln, msg in problems[:20])
        raise DataValidationError(f"{path}: {len(problems)} invalid line(s): {detail}", problems)
    if not values:
        raise DataValidationError(f"{path}: no data values")
    return Sample.from_values(values)


# ---------------------------------------------------------------------------
# commands; each returns (result, rows, diagnostics, exit_code)
# rows is a (header, list-of-rows) pair used for csv and table output
# ---------------------------------------------------------------------------


def _fit_dict(fit) -> dict:
    out = fit.to_dict()
    try:
        out["ci95"] = {k: list(v) for k, v in inference.wald_ci(fit, 0.05).items()}
    except LGError:
        out["ci95"] = None
    return out


def _cmd_eval(cfg: RunConfig):
    prm = cfg.params
    rows = []
    for y in cfg.y or []:
        rows.append(
            [
                y,
                core.pdf(prm, y),
                core.cdf(prm, y),
                core.survival(prm, y),
                core.hazard(prm, y),
                core.reversed_hazard(prm, y) if y > 0 else float("nan"),
            ]
        )
    qrows = [[xi, float(core.quantile(prm, xi))] for xi in (cfg.xi or [])]
    header = ["y", "pdf", "cdf", "survival", "hazard", "reversed_hazard"]
    result = {
        "points": [dict(zip(header, r)) for r in rows],
        "quantiles": [{"xi": a, "quantile": b} for a, b in qrows],
    }
    table = (header, rows) if rows else (["xi", "quantile"], qrows)
    return result, table, {}, EXIT_OK


def _cmd_sample(cfg: RunConfig):
    smp = core.sample(cfg.params, cfg.n, seed=cfg.seed)
    draws = [float(v) for v in smp.original]
    return {"n": cfg.n, "seed": cfg.seed, "values": draws}, (["time"], [[v] for v in draws]), {}, EXIT_OK


def _cmd_fit(cfg: RunConfig):
    data = ingest_csv(cfg.input_path)
    if cfg.method == "em":
        fit = inference.fit_em(data, cfg=cfg.em)
    else:
        fit = inference.fit_direct(data, tol=cfg.em.tol_param, max_iter=cfg.em.max_iter)
    res = _fit_dict(fit)
    header = ["parameter", "estimate", "std_error", "ci95_low", "ci95_high"]
    rows = []
    for nm in fit.names:
        ci = (res["ci95"] or {}).get(nm, [float("nan"), float("nan")])
        se = res["std_errors"][nm]
        rows.append([nm, res["estimates"][nm], float("nan") if se is None else se, ci[0], ci[1]])
    code = EXIT_OK if fit.converged else EXIT_NONCONVERGENCE
    return res, (header, rows), dict(fit.diagnostics), code


_COMPARE_COLS = ["model", "k", "ks", "ks_pvalue", "neg2loglik", "aic", "aicc", "bic", "ad", "cm"]


def _cmd_compare(cfg: RunConfig):
    data = ingest_csv(cfg.input_path)
    reports = models.compare_models(data, em=cfg.em, lg_method=cfg.method)
    dicts = [r.to_dict() for r in reports]
    header = _COMPARE_COLS + ["estimates", "std_errors", "error"]
    rows = []
    for d in dicts:
        rows.append([d[c] for c in _COMPARE_COLS] + [d["mles"], d["std_errors"], d["error"] or ""])
    diagnostics = {"statistics": "plug-in fitted parameters, no estimation correction"}
    return {"n": data.n, "rows": dicts}, (header, rows), diagnostics, EXIT_OK


def _cmd_shape(cfg: RunConfig):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dens = core.classify_density(cfg.params)
        haz = core.classify_hazard(cfg.params)
    result = {"density": dens.to_dict(), "hazard": haz.to_dict()}
    diagnostics = {"warnings": [str(w.message) for w in caught]} if caught else {}
    rows = [
        ["density", dens.kind.value, dens.threshold, "" if dens.mode is None else dens.mode],
        ["hazard", haz.kind.value, haz.threshold, " ".join(repr(t) for t in haz.turning_points)],
    ]
    return result, (["function", "kind", "threshold", "detail"], rows), diagnostics, EXIT_OK


def _cmd_curves(cfg: RunConfig):
    rows = lifetime.curve_grid(cfg.params, cfg.curve, cfg.points, cfg.series)
    header = ["y", "u", cfg.curve]
    result = {"curve": cfg.curve, "points": [dict(zip(header, r)) for r in rows]}
    return result, (header, [list(r) for r in rows]), {}, EXIT_OK


def _cmd_moments(cfg: RunConfig):
    prm, ctl = cfg.params, cfg.series
    raw = {}
    fallback = False
    for r in range(1, cfg.r + 1):
        m = moments.raw_moment(prm, r, ctl)
        raw[str(r)] = m.value
        fallback = fallback or m.fallback
    result = {
        "raw_moments": raw,
        "mean": moments.mean(prm, ctl).value,
        "variance": moments.variance(prm, ctl),
        "gini": lifetime.gini_index(prm, ctl),
        "mean_deviation_mean": lifetime.mean_deviation_about_mean(prm, ctl),
        "mean_deviation_median": lifetime.mean_deviation_about_median(prm, ctl),
    }
    rows = [[f"E[Y^{k}]", v] for k, v in raw.items()]
    rows += [[k, v] for k, v in result.items() if k != "raw_moments"]
    diagnostics = {"quadrature_fallback": True} if fallback else {}
    return result, (["quantity", "value"], rows), diagnostics, EXIT_OK


_DISPATCH = {
    "eval": _cmd_eval,
    "sample": _cmd_sample,
    "fit": _cmd_fit,
    "compare": _cmd_compare,
    "shape": _cmd_shape,
    "curves": _cmd_curves,
    "moments": _cmd_moments,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt_table(v) -> str:
    if isinstance(v, dict):
        return " ".join(f"{k}={_fmt_table(x)}" for k, x in v.items())
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _fmt_csv(v) -> str:
    if isinstance(v, dict):
        return " ".join(f"{k}={_fmt_csv(x)}" for k, x in v.items())
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _render(cfg: RunConfig, result, table, diagnostics) -> str:
    if cfg.output_format == "json":
        doc = {
            "command": cfg.command,
            "config_echo": cfg.echo(),
            "result": result,
            "diagnostics": diagnostics,
        }
        return json.dumps(_json_clean(doc), indent=2, sort_keys=False) + "\n"
    header, rows = table
    if cfg.output_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt_csv(v) for v in r])
        return buf.getvalue()
    cells = [list(map(str, header))] + [[_fmt_table(v) for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute one command, writing the report to ``stdout``; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        result, table, diagnostics, code = _DISPATCH[cfg.command](cfg)
    except (DataValidationError, CLIValidationError, ValueError, TailError, OSError) as exc:
        return _report_error(cfg, exc, EXIT_VALIDATION, stderr)
    except (ConvergenceError, LGError, ArithmeticError) as exc:
        return _report_error(cfg, exc, EXIT_NONCONVERGENCE, stderr)
    stdout.write(_render(cfg, result, table, diagnostics))
    return code


def _report_error(cfg_or_format, exc, code, stderr) -> int:
    fmt = cfg_or_format if isinstance(cfg_or_format, str) else cfg_or_format.output_format
    if fmt == "json":
        doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        lines = getattr(exc, "problems", None)
        if lines:
            doc["lines"] = [{"line": ln, "problem": msg} for ln, msg in lines]
        stderr.write(json.dumps(doc) + "\n")
    else:
        stderr.write(f"error: {type(exc).__name__}: {exc}\n")
    return code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lgeom", description="Lindley-geometric lifetime distribution toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input", dest="input_path")
    ap.add_argument("--format", dest="output_format", choices=("json", "csv", "table"), default="json")
    ap.add_argument("--p", type=float)
    ap.add_argument("--theta", type=float)
    ap.add_argument("--n", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--r", type=int, default=4, help="highest raw moment (moments)")
    ap.add_argument("--xi", type=float, nargs="+", help="probability levels for quantiles (eval)")
    ap.add_argument("--y", type=float, nargs="+", help="evaluation points (eval)")
    ap.add_argument("--curve", choices=lifetime.CURVES, default="lorenz")
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--method", choices=("em", "newton"), default="em")
    ap.add_argument("--tol", type=float, default=EMConfig.tol_param)
    ap.add_argument("--max-iter", dest="max_iter", type=int, default=EMConfig.max_iter)
    return ap


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    params = None
    if ns.p is not None or ns.theta is not None:
        if ns.p is None or ns.theta is None:
            raise CLIValidationError("--p and --theta must be given together")
        params = LGParams(ns.p, ns.theta)
    seed = ns.seed
    if seed is None and ns.command == "sample":
        env = os.environ.get("LG_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError as exc:
                raise CLIValidationError(f"LG_SEED must be an integer, got {env!r}") from exc
        else:
            seed = int(np.random.SeedSequence().entropy % (2**63))
    if ns.r < 1:
        raise CLIValidationError("--r must be >= 1")
    if ns.points < 1:
        raise CLIValidationError("--points must be >= 1")
    if ns.command == "eval" and not (ns.y or ns.xi):
        raise CLIValidationError("eval needs --y and/or --xi")
    em = EMConfig(tol_param=ns.tol, max_iter=ns.max_iter)
    return RunConfig(
        command=ns.command,
        input_path=ns.input_path,
        output_format=ns.output_format,
        seed=seed,
        params=params,
        em=em,
        n=ns.n,
        r=ns.r,
        xi=ns.xi,
        y=ns.y,
        curve=ns.curve,
        points=ns.points,
        method=ns.method,
    )


def main(argv=None, stdout=None, stderr=None) -> int:
    stderr = stderr or sys.stderr
    ns = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(ns)
    except (LGError, ValueError) as exc:
        return _report_error(ns.output_format, exc, EXIT_VALIDATION, stderr)
    return run(cfg, stdout=stdout, stderr=stderr)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
