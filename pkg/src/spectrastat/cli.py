"""Command-line interface.

    spectrastat esd --csv data.csv [--law mp --gamma 0.5] [--csv-out spec.csv]
    spectrastat law --kind mp --gamma 0.5 --what pdf --grid 512 --csv-out mp.csv
    spectrastat twtable build|verify [--path FILE] [--force]
    spectrastat test one-sample|two-sample|regression|sphericity|f-largest-root ...
    spectrastat spiked --ell 2.5 --ell 1.5 --gamma 0.25 [--simulate P N REPS]
    spectrastat signals --csv data.csv --alpha 0.005 [--trace]
    spectrastat changepoint --csv series.csv --alpha 0.05 --min-seg 50 [--center]
    spectrastat experiment table1|signals-figure|fpr --reps R --out DIR

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError, SpectraStatError
from .spectral_core import (DataMatrix, ESD, Spectrum, eigenvalues_sym,
                            esd_ks_distance, load_csv, sample_covariance,
                            save_spectrum_csv)


def _write_rows(path, header, rows):
    import csv as _csv

    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        writer = _csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _make_law(args):
    from .limit_laws import FMatrixLSD, MPLaw, SemicircleLaw

    if args.kind == "mp":
        return MPLaw(gamma=args.gamma, sigma2=args.sigma2)
    if args.kind == "semicircle":
        return SemicircleLaw()
    if args.kind == "f":
        return FMatrixLSD(gamma1=args.gamma1, gamma2=args.gamma2)
    raise ConfigError(f"unknown law kind {args.kind!r}")


def _tw_table(args):
    from .tracy_widom import TracyWidomTable, default_table

    path = getattr(args, "table", None)
    if path:
        return TracyWidomTable.load(path)
    return default_table()


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_esd(args) -> int:
    data = load_csv(args.csv)
    cov = sample_covariance(data, center=args.center, divisor=args.divisor)
    spec = eigenvalues_sym(cov, psd=True)
    if args.csv_out:
        save_spectrum_csv(spec, args.csv_out)
    out = {"n": data.n, "p": data.p,
           "largest": float(spec.eigenvalues[0]),
           "smallest": float(spec.eigenvalues[-1]),
           "trace": float(spec.eigenvalues.sum())}
    if args.law:
        law_args = argparse.Namespace(kind=args.law, gamma=args.gamma,
                                      sigma2=args.sigma2, gamma1=args.gamma1,
                                      gamma2=args.gamma2)
        out["ks_distance"] = esd_ks_distance(ESD(spec), _make_law(law_args))
    _emit_json(out, args.json_out)
    return 0


def cmd_law(args) -> int:
    from .limit_laws import law_curve

    law = _make_law(args)
    xs, ys = law_curve(law, kind=args.what, lo=args.lo, hi=args.hi,
                       num=args.grid)
    _write_rows(args.csv_out, ["x", args.what],
                [(repr(float(a)), repr(float(b))) for a, b in zip(xs, ys)])
    return 0


def cmd_twtable(args) -> int:
    from .tracy_widom import (TracyWidomTable, build_tw1_table,
                              default_table_path, verify_tw1_table)

    path = args.path or default_table_path()
    if args.action == "build":
        import os
        import time

        if os.path.exists(path) and not args.force:
            print(f"table already exists at {path} (use --force to rebuild)")
            return 0
        t0 = time.time()
        table = build_tw1_table()
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        table.save(path)
        print(f"built {path} in {time.time() - t0:.2f}s "
              f"({table.s_grid.size} nodes)")
        return 0
    table = TracyWidomTable.load(path)
    report = verify_tw1_table(table)
    print(f"table {path}: max anchor error {report['max_abs_error']:.5f}")
    return 0


def cmd_test(args) -> int:
    from . import cov_tests

    alpha = args.alpha
    if args.which == "one-sample":
        data = load_csv(args.csv[0])
        sigma0 = _load_sigma0(args, data.p)
        report = cov_tests.one_sample_logclt_test(data, sigma0, alpha=alpha,
                                                  center=not args.no_center)
    elif args.which == "two-sample":
        x, y = load_csv(args.csv[0]), load_csv(args.csv[1])
        report = cov_tests.two_sample_logclt_test(x, y, alpha=alpha)
    elif args.which == "regression":
        y, x = load_csv(args.csv[0]), load_csv(args.csv[1])
        sigma0 = _load_sigma0(args, y.p)
        report = cov_tests.regression_cov_test(y, x, sigma0, alpha=alpha)
    elif args.which == "sphericity":
        data = load_csv(args.csv[0])
        report = cov_tests.glrt_sphericity_test(data, alpha, _tw_table(args))
    elif args.which == "f-largest-root":
        x, y = load_csv(args.csv[0]), load_csv(args.csv[1])
        report = cov_tests.two_sample_largest_root_test(x, y, alpha,
                                                        _tw_table(args))
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown test {args.which!r}")
    _emit_json(report.to_dict(), args.json_out)
    return 0


def _load_sigma0(args, p):
    if args.sigma0:
        vals = load_csv(args.sigma0).values.ravel()
        return Spectrum.from_values(vals)
    return Spectrum(np.ones(p))


def cmd_spiked(args) -> int:
    from .spiked_pca import SpikedModel, classify_spikes

    model = SpikedModel(spikes=tuple(sorted(args.ell, reverse=True)),
                        gamma=args.gamma, sigma2=args.sigma2)
    rows = classify_spikes(model)
    out = {"gamma": args.gamma, "sigma2": args.sigma2,
           "spikes": [
               {"index": r.index, "ell": r.ell, "detectable": r.detectable,
                "limit": r.limit, "fluctuation_sd": r.fluctuation_sd,
                "warning": r.warning} for r in rows]}
    if args.simulate:
        p, n, reps = (int(v) for v in args.simulate)
        from .harness import EnsembleSpec, generate_ensemble, replicate_rng

        spec = EnsembleSpec("spiked", {"p": p, "n": n, "spikes": model.spikes,
                                       "sigma2": args.sigma2})
        top = []
        for r in range(reps):
            data = generate_ensemble(spec, replicate_rng(args.seed, r))
            s = data.values.T @ data.values / n
            vals = np.linalg.eigvalsh((s + s.T) / 2.0)
            top.append(vals[-len(model.spikes):][::-1].tolist())
        out["simulated_mean_leading"] = np.asarray(top).mean(axis=0).tolist()
        out["simulate"] = {"p": p, "n": n, "reps": reps, "seed": args.seed}
    if args.csv_out:
        _write_rows(args.csv_out,
                    ["index", "ell", "detectable", "limit", "fluctuation_sd"],
                    [(r.index, r.ell, int(r.detectable), r.limit,
                      "" if r.fluctuation_sd is None else r.fluctuation_sd)
                     for r in rows])
    _emit_json(out, args.json_out)
    return 0


def cmd_signals(args) -> int:
    from .signal_count import SignalDetectionConfig, estimate_signal_count

    data = load_csv(args.csv)
    cov = sample_covariance(data, center=args.center, divisor="n")
    spec = eigenvalues_sym(cov, psd=True)
    cfg = SignalDetectionConfig(alpha=args.alpha, max_k=args.max_k)
    trace = estimate_signal_count(spec, data.n, cfg, _tw_table(args))
    out = {"k_hat": trace.k_hat, "saturated": trace.saturated,
           "alpha": args.alpha, "n": data.n, "p": data.p}
    if args.trace:
        _write_rows(args.trace,
                    ["k", "l_k", "sigma2_k", "threshold", "exceeded"],
                    [(r.k, repr(r.l_k), repr(r.sigma2_k), repr(r.threshold),
                      int(r.exceeded)) for r in trace.rows])
    _emit_json(out, args.json_out)
    return 0


def cmd_changepoint(args) -> int:
    from .changepoint import SegmentationConfig, ratio_binseg

    data = load_csv(args.csv)
    cfg = SegmentationConfig(alpha=args.alpha, min_seg=args.min_seg,
                             center=args.center)
    result = ratio_binseg(data, cfg)
    out = {"changepoints": result.changepoints, "threshold": result.threshold,
           "min_seg": result.min_seg, "alpha": result.alpha,
           "n": data.n, "p": data.p}
    if args.trace_out:
        rows = []
        for scan in result.scans:
            for tau, stat in zip(scan.taus, scan.stats):
                rows.append((scan.start, scan.end, int(tau), repr(float(stat))))
        _write_rows(args.trace_out, ["start", "end", "tau", "stat"], rows)
    _emit_json(out, args.json_out)
    return 0


def cmd_experiment(args) -> int:
    from . import harness

    config = harness.ExperimentConfig(
        experiment=args.which, seed=args.seed, reps=args.reps,
        alpha=args.alpha, noise=args.noise, threads=args.threads)
    tw = _tw_table(args)
    if args.which == "table1":
        result = harness.run_table1(config, tw)
    elif args.which == "signals-figure":
        result = harness.run_signal_figure(config, tw)
    elif args.which == "fpr":
        result = harness.run_fpr_table(config)
    else:  # pragma: no cover
        raise ConfigError(f"unknown experiment {args.which!r}")
    if args.out:
        harness.write_experiment_output(result, args.out, args.which)
        print(f"wrote {args.out}/{args.which}.json")
    else:
        _emit_json(result, args.json_out)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectrastat",
        description="Random-matrix limit laws and high-dimensional covariance tests")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=20260810)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--json-out", default=None,
                        help="write JSON output here instead of stdout")
    parser.add_argument("--csv-out", default=None)
    parser.add_argument("--table", default=None,
                        help="path to a Tracy-Widom table file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_esd = sub.add_parser("esd", help="spectrum of a sample covariance")
    p_esd.add_argument("--csv", required=True)
    p_esd.add_argument("--center", action="store_true", default=True)
    p_esd.add_argument("--no-center", dest="center", action="store_false")
    p_esd.add_argument("--divisor", choices=("auto", "n", "n-1"), default="auto")
    p_esd.add_argument("--law", choices=("mp", "semicircle", "f"), default=None)
    p_esd.add_argument("--gamma", type=float, default=0.5)
    p_esd.add_argument("--sigma2", type=float, default=1.0)
    p_esd.add_argument("--gamma1", type=float, default=0.5)
    p_esd.add_argument("--gamma2", type=float, default=0.5)
    p_esd.set_defaults(func=cmd_esd)

    p_law = sub.add_parser("law", help="export density/CDF curves")
    p_law.add_argument("--kind", choices=("mp", "semicircle", "f"), required=True)
    p_law.add_argument("--what", choices=("pdf", "cdf"), default="pdf")
    p_law.add_argument("--gamma", type=float, default=0.5)
    p_law.add_argument("--sigma2", type=float, default=1.0)
    p_law.add_argument("--gamma1", type=float, default=0.5)
    p_law.add_argument("--gamma2", type=float, default=0.5)
    p_law.add_argument("--grid", type=int, default=512)
    p_law.add_argument("--lo", type=float, default=None)
    p_law.add_argument("--hi", type=float, default=None)
    p_law.set_defaults(func=cmd_law)

    p_tw = sub.add_parser("twtable", help="build or verify the F1 table")
    p_tw.add_argument("action", choices=("build", "verify"))
    p_tw.add_argument("--path", default=None)
    p_tw.add_argument("--force", action="store_true")
    p_tw.set_defaults(func=cmd_twtable)

    p_test = sub.add_parser("test", help="covariance hypothesis tests")
    p_test.add_argument("which", choices=("one-sample", "two-sample",
                                          "regression", "sphericity",
                                          "f-largest-root"))
    p_test.add_argument("--csv", action="append", required=True,
                        help="data file; repeat for two-matrix tests "
                             "(regression: Y then X)")
    p_test.add_argument("--sigma0", default=None,
                        help="csv of null eigenvalues (default: identity)")
    p_test.add_argument("--alpha", type=float, default=0.05)
    p_test.add_argument("--no-center", action="store_true")
    p_test.set_defaults(func=cmd_test)

    p_spiked = sub.add_parser("spiked", help="spiked-model classification")
    p_spiked.add_argument("--ell", type=float, action="append", required=True)
    p_spiked.add_argument("--gamma", type=float, required=True)
    p_spiked.add_argument("--sigma2", type=float, default=1.0)
    p_spiked.add_argument("--simulate", nargs=3, metavar=("P", "N", "REPS"),
                          default=None)
    p_spiked.set_defaults(func=cmd_spiked)

    p_sig = sub.add_parser("signals", help="estimate the number of signals")
    p_sig.add_argument("--csv", required=True)
    p_sig.add_argument("--alpha", type=float, default=0.005)
    p_sig.add_argument("--max-k", type=int, default=None)
    p_sig.add_argument("--center", action="store_true")
    p_sig.add_argument("--trace", default=None,
                       help="write the per-k trace CSV here")
    p_sig.set_defaults(func=cmd_signals)

    p_cp = sub.add_parser("changepoint", help="covariance changepoint scan")
    p_cp.add_argument("--csv", required=True)
    p_cp.add_argument("--alpha", type=float, default=0.05)
    p_cp.add_argument("--min-seg", type=int, default=0)
    p_cp.add_argument("--center", action="store_true")
    p_cp.add_argument("--trace-out", default=None)
    p_cp.set_defaults(func=cmd_changepoint)

    p_exp = sub.add_parser("experiment", help="reproduction experiments")
    p_exp.add_argument("which", choices=("table1", "signals-figure", "fpr"))
    p_exp.add_argument("--reps", type=int, default=2000)
    p_exp.add_argument("--alpha", type=float, default=0.05)
    p_exp.add_argument("--noise", choices=("gaussian", "t5", "cauchy",
                                           "laplace"), default="gaussian")
    p_exp.add_argument("--out", default=None, help="output directory")
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SpectraStatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
