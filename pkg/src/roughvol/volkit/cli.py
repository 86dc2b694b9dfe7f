"""Command-line entry point.

Every command writes ``report.json`` (resolved configuration, toolkit
version and results) plus plot-data CSV files to ``--out``, and prints a
short summary. Failures print a JSON error object on stderr and exit with
2 (bad usage or parameters), 3 (data problems) or 4 (numerical failures).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ParameterError, RoughVolError
from .io import DatasetSpec, ingest

COMMANDS = ("estimate", "simulate", "forecast", "diagnose-memory", "hawkes", "smoothing-bias", "study")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    """Comma list with optional ranges: ``1,5,20`` or ``1-30``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part[1:]:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers or ranges, got {text!r}") from exc
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(f"usage: {message}")


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV file (relative paths also searched in $ROUGHVOL_DATA_DIR)")
    p.add_argument("--asset", help="column key, e.g. SPX2.rv")
    p.add_argument("--format", choices=("oxford-man-csv", "generic-csv"), default=None,
                   help="default: oxford-man-csv when --asset is given")
    p.add_argument("--units", choices=("vol", "var", "logvar"), default="var")
    p.add_argument("--start")
    p.add_argument("--end")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="roughvol", description="Rough volatility toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", default="roughvol-out", help="output directory")
        return p

    p = cmd("estimate", "structure-function scaling fit of a realized-variance series")
    _add_data_args(p)
    p.add_argument("--q-grid", type=_floats, default=[0.5, 1, 1.5, 2, 3])
    p.add_argument("--lags", type=_ints, default=list(range(1, 31)))
    p.add_argument("--segments", type=int, default=1, help="also refit on this many contiguous pieces")

    p = cmd("simulate", "simulate an fBM or fOU path")
    p.add_argument("--kind", choices=("fbm", "fou"), default="fou")
    p.add_argument("--hurst", type=float, default=0.14)
    p.add_argument("--nu", type=float, default=0.3)
    p.add_argument("--alpha", type=float, default=5e-4)
    p.add_argument("--mean-level", type=float, default=-5.0)
    p.add_argument("--x0", type=float, default=None, help="default: the mean level")
    p.add_argument("--n-points", type=int, default=2001)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="also write the binary path block")

    p = cmd("forecast", "P ratios of RFSV, HAR and AR forecasts")
    _add_data_args(p)
    p.add_argument("--horizons", type=_ints, default=[1, 5, 20])
    p.add_argument("--models", default="AR5,AR10,HAR,RFSV")
    p.add_argument("--target", choices=("logvar", "var"), default="logvar")
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--hurst", type=float, default=None, help="default: estimated on the whole series")
    p.add_argument("--rolling-hurst", action="store_true")

    p = cmd("diagnose-memory", "V(t) scaling, fractional differencing and ACF bands")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--simulate-days", type=int, help="use a simulated RFSV series of this length instead")
    p.add_argument("--asset")
    p.add_argument("--format", choices=("oxford-man-csv", "generic-csv"), default=None)
    p.add_argument("--units", choices=("vol", "var", "logvar"), default="var")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=float, default=0.4)
    p.add_argument("--truncation", type=int, default=500)
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--t-grid", type=_ints, default=list(range(1, 31)))
    p.add_argument("--overlapping", action="store_true")

    p = cmd("hawkes", "simulate a Hawkes stream and measure coarse-grained roughness")
    p.add_argument("--mu", type=float, default=100.0)
    p.add_argument("--kernel", choices=("power-law", "exponential", "zero"), default="power-law")
    p.add_argument("--norm", type=float, default=0.98, help="kernel L1 norm")
    p.add_argument("--beta", type=float, default=1.6)
    p.add_argument("--t0", type=float, default=1e-3)
    p.add_argument("--decay", type=float, default=1.0, help="exponential kernel rate b")
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--bin", type=float, default=0.025)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-events", type=int, default=20_000_000)

    p = cmd("smoothing-bias", "effective (alpha, H) of window-averaged variance")
    p.add_argument("--hurst", type=float, default=0.14)
    p.add_argument("--alpha", type=float, default=0.3, help="amplitude of the variance process")
    p.add_argument("--window", type=float, required=True, help="averaging window, fraction of a day")
    p.add_argument("--lags", type=_ints, default=list(range(1, 101)))

    p = cmd("study", "simulation study of windowed realized-variance proxies")
    p.add_argument("--hurst", type=float, default=0.14)
    p.add_argument("--nu", type=float, default=0.3)
    p.add_argument("--alpha", type=float, default=5e-4)
    p.add_argument("--mean-level", type=float, default=-5.0)
    p.add_argument("--days", type=int, default=2000)
    p.add_argument("--steps-per-day", type=int, default=1440)
    p.add_argument("--seeds", type=int, default=1, help="number of independent paths")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--tick", type=float, default=5e-4)
    return ap


# -- commands -----------------------------------------------------------------


def _dataset(args) -> DatasetSpec:
    fmt = args.format or ("oxford-man-csv" if args.asset else "generic-csv")
    return DatasetSpec(args.data, fmt, args.asset, args.units, args.start, args.end)


def _series_meta(series) -> dict:
    out = {"n_obs": len(series), "label": series.label, "calendar_gaps": series.n_gaps,
           "dropped_rows": series.meta.get("dropped", 0)}
    if series.dates.dtype.kind == "M" and len(series):
        out["first_date"] = str(series.dates[0])
        out["last_date"] = str(series.dates[-1])
    return out


def run_estimate(args, out: Path):
    from ..scaling import fit_scaling, split_reestimate

    series = ingest(_dataset(args))
    rep = fit_scaling(series, args.q_grid, args.lags)
    files = {"scaling.csv": rep.to_csv()}
    result = {"series": _series_meta(series), "scaling": rep.to_dict()}
    if args.segments > 1:
        segs = split_reestimate(series, args.segments, args.q_grid, args.lags)
        result["segments"] = [s.to_dict() for s in segs]
    summary = [f"{series.label}: {len(series)} observations",
               f"hurst_hat = {rep.hurst_hat:.4f}   nu_hat = {rep.nu_hat:.4f}"]
    summary += [f"  zeta({q:g}) = {z:.4f} +/- {e:.4f}" for q, z, e in zip(rep.q_grid, rep.zeta, rep.zeta_stderr)]
    if args.segments > 1:
        summary += [f"  segment {i}: H = {s.hurst_hat:.4f}" for i, s in enumerate(segs)]
    return result, files, summary


def run_simulate(args, out: Path):
    from ..fracproc import FbmParams, FouParams, fbm_simulate, fou_simulate

    fb = FbmParams(args.hurst, args.n_points, args.dt, args.seed)
    if args.kind == "fbm":
        path = fbm_simulate(fb, args.path_index)
    else:
        x0 = args.mean_level if args.x0 is None else args.x0
        path = fou_simulate(FouParams(fb, args.nu, args.alpha, args.mean_level, x0), args.path_index)
    import io as _io
    buf = _io.StringIO()
    path.to_csv(buf)
    files = {"path.csv": buf.getvalue()}
    if args.binary:
        files["path.bin"] = path.to_bytes()
    v = path.values
    result = {"n_points": len(path), "min": float(v.min()), "max": float(v.max()),
              "mean": float(v.mean()), "last": float(v[-1])}
    summary = [f"{args.kind} path, {len(path)} points, H = {args.hurst}",
               f"mean {v.mean():.6g}  min {v.min():.6g}  max {v.max():.6g}"]
    return result, files, summary


def run_forecast(args, out: Path):
    from ..forecast import evaluate_p_ratio

    series = ingest(_dataset(args))
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    tab = evaluate_p_ratio(series, models, args.horizons, target=args.target,
                           training_window=args.window, hurst=args.hurst, rolling_hurst=args.rolling_hurst)
    result = {"series": _series_meta(series), "p_ratio": tab.to_dict()}
    files = {"forecasts.csv": tab.records_csv()}
    names = sorted(models)
    summary = [f"{series.label}: H = {tab.hurst:.4f}, nu = {tab.nu:.4f}, target {args.target}",
               "horizon  " + "  ".join(f"{m:>7}" for m in names)]
    for h in sorted(tab.p):
        summary.append(f"D={h:<6} " + "  ".join(f"{tab.p[h][m]:7.3f}" for m in names))
    return result, files, summary


def run_diagnose_memory(args, out: Path):
    from ..fracproc import fou_simulate, rfsv_params
    from ..memdiag import acf_with_bands, frac_diff, vt_scaling
    from ..series import VolSeries

    if args.data:
        series = ingest(_dataset(args))
        meta = _series_meta(series)
    else:
        steps = 8
        x = fou_simulate(rfsv_params(args.simulate_days, steps, seed=args.seed)).values[::steps][: args.simulate_days]
        series = VolSeries.from_values(np.exp(x), units="vol", label="simulated-rfsv")
        meta = {"n_obs": len(series), "label": series.label, "seed": args.seed, "steps_per_day": steps}
    vt = vt_scaling(series, args.t_grid, overlapping=args.overlapping)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fd = frac_diff(series.log_vol(), args.d, args.truncation)
    raw = acf_with_bands(series.log_vol(), args.max_lag)
    filt = acf_with_bands(fd.values, args.max_lag)
    result = {"series": meta, "vt": vt.to_dict(), "frac_diff": {"d": args.d, "truncation": args.truncation,
              "tail_mass": fd.tail_mass, "tail_warning": bool(caught)},
              "acf_log_vol": raw.to_dict(), "acf_frac_diff": filt.to_dict()}
    files = {"vt.csv": vt.to_csv(), "acf_log_vol.csv": raw.to_csv(), "acf_frac_diff.csv": filt.to_csv()}
    summary = [f"{series.label}: {len(series)} observations",
               f"V(t) slope = {vt.slope:.4f}",
               f"ACF log-vol inside bands: {raw.inside_fraction:.2f} of lags 1..{args.max_lag}",
               f"ACF after (1-L)^{args.d:g}: {filt.inside_fraction:.2f} inside (tail mass {fd.tail_mass:.3g})"]
    return result, files, summary


def run_hawkes(args, out: Path):
    from ..microsim import (ExponentialKernel, HawkesParams, PowerLawKernel, ZeroKernel, bin_counts,
                            coarse_grain_to_vol, hawkes_simulate, integrated_hurst)
    from ..scaling import fit_scaling

    if args.kernel == "power-law":
        kernel = PowerLawKernel.with_norm(args.norm, args.beta, args.t0)
    elif args.kernel == "exponential":
        kernel = ExponentialKernel(args.norm * args.decay, args.decay)
    else:
        kernel = ZeroKernel()
    params = HawkesParams(args.mu, kernel, args.horizon, args.seed, args.max_events)
    stream = hawkes_simulate(params)
    vol = coarse_grain_to_vol(stream, args.bin)
    rep = fit_scaling(vol)
    h_int = integrated_hurst(stream, args.bin)
    counts = bin_counts(stream, args.bin)
    lines = ["bin,start,count"] + [f"{i},{i * args.bin!r},{int(c)}" for i, c in enumerate(counts)]
    files = {"events.csv": stream.to_csv(), "counts.csv": "\n".join(lines) + "\n", "scaling.csv": rep.to_csv()}
    result = {"n_events": len(stream), "l1_norm": params.l1_norm, "stationary_rate": params.stationary_rate(),
              "expected_events": params.stationary_rate() * args.horizon, "stream_meta": stream.meta,
              "floored_bins": vol.meta["floored_bins"], "log_count_hurst": rep.hurst_hat,
              "integrated_hurst": h_int, "scaling": rep.to_dict()}
    summary = [f"{len(stream)} events on [0, {args.horizon:g}] (L1 norm {params.l1_norm:.4g})",
               f"log-count H = {rep.hurst_hat:.4f}   integrated-count H = {h_int:.4f}",
               f"empty bins floored: {vol.meta['floored_bins']}"]
    return result, files, summary


def run_smoothing_bias(args, out: Path):
    from ..covstruct import SmoothingSpec, loglog_csv, smoothed_m2, smoothing_regression

    spec = SmoothingSpec(args.hurst, args.alpha, args.window, tuple(args.lags))
    fit = smoothing_regression(spec)
    m2 = smoothed_m2(spec)
    files = {"smoothed_m2.csv": loglog_csv(spec.lags, m2, "m2")}
    result = {"alpha_hat": fit.alpha_hat, "hurst_hat": fit.hurst_hat, "slope": fit.slope,
              "intercept": fit.intercept}
    summary = [f"window {args.window:g}: estimated alpha = {fit.alpha_hat:.3f}, estimated H = {fit.hurst_hat:.3f}"]
    return result, files, summary


def run_study(args, out: Path):
    from .study import PROXIES, StudyConfig, run_simulation_study

    cfg = StudyConfig(hurst=args.hurst, nu=args.nu, alpha=args.alpha, mean_level=args.mean_level,
                      n_days=args.days, steps_per_day=args.steps_per_day, n_seeds=args.seeds,
                      seed=args.seed, tick=args.tick)
    rep = run_simulation_study(cfg)
    files = {f"scaling_{k}.csv": r.to_csv() for k, r in rep.reports.items()}
    summary = [f"{cfg.n_seeds} path(s) of {cfg.n_days} days at {cfg.steps_per_day} steps/day"]
    summary += [f"  {k:<6} H = {rep.ensemble_mean(k):.4f}" for k in PROXIES]
    return rep.to_dict(), files, summary


RUNNERS = {
    "estimate": run_estimate,
    "simulate": run_simulate,
    "forecast": run_forecast,
    "diagnose-memory": run_diagnose_memory,
    "hawkes": run_hawkes,
    "smoothing-bias": run_smoothing_bias,
    "study": run_study,
}


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "out"}
    return json.loads(json.dumps(cfg, default=str))


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def cli_dispatch(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        out = Path(args.out)
        result, files, summary = RUNNERS[args.command](args, out)
        out.mkdir(parents=True, exist_ok=True)
        report = {"command": args.command, "config": _resolved_config(args), "version": __version__,
                  "result": result}
        (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n")
        for name, content in files.items():
            target = out / name
            if isinstance(content, bytes):
                target.write_bytes(content)
            else:
                target.write_text(content)
        print("\n".join(summary), file=stdout)
        print(f"outputs written to {out}", file=stdout)
        return 0
    except RoughVolError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True, default=_jsonable), file=stderr)
        return exc.exit_status
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
