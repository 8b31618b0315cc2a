"""Command-line entry point: ``acqkd <subcommand> ...``.

Exit status is 0 on success, 2 for configuration or input errors and 3 when a
key-exchange session aborts.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys

import numpy as np

from . import apdlab, backscatter
from .config import ConfigError, LoadedConfig, load_config
from .errors import FitError, QKDError, SessionAborted
from .linkmodel import ber_budget
from .netlink import SessionConfig, connect_bob, parse_addr, serve_alice
from .pipeline import RunConfig, run_sweep, sweep_csv
from .simengine import read_transcript_csv, run_session

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3

log = logging.getLogger("acqkd")


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _loaded(args) -> LoadedConfig:
    loaded = load_config(args.config) if args.config else LoadedConfig(RunConfig())
    run = loaded.run
    if getattr(args, "preset", None):
        run = RunConfig.from_preset(args.preset, **{
            k: getattr(run, k) for k in ("mu_list", "n_pulses", "estimator", "seed", "workers", "safety")
        })
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "mu", None):
        over["mu_list"] = tuple(args.mu)
    if getattr(args, "n_pulses", None):
        over["n_pulses"] = args.n_pulses
    if getattr(args, "estimator", None):
        over["estimator"] = args.estimator
    if getattr(args, "workers", None):
        over["workers"] = args.workers
    if over:
        try:
            run = RunConfig(**{**run.__dict__, **over})
        except QKDError as exc:
            raise ConfigError(str(exc)) from None
    return LoadedConfig(run, loaded.timeout, loaded.transcript)


def _write_key(path, bits):
    with _output(path) as fh:
        fh.write("".join(map(str, np.asarray(bits, dtype=np.uint8))) + "\n")


# subcommands


def cmd_simulate(args):
    cfg = _loaded(args).run
    ch, det = cfg.link(cfg.mu_list[0])
    tr = run_session(ch, det, cfg.n_pulses, cfg.seed, workers=cfg.workers)
    with _output(args.out) as fh:
        tr.to_csv(fh)
    b = ber_budget(ch, det)
    c = tr.counts
    print(f"pulses={tr.n_pulses} clicks={c['clicks']} sifted={c['sifted']} "
          f"sifted_errors={c['sifted_errors']} analytic_ber={b.ber_total:.5f}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _loaded(args).run
    rows = run_sweep(cfg)
    with _output(args.out) as fh:
        fh.write(sweep_csv(rows))
    if args.svg:
        plot_sweep(rows, args.svg)
    return EXIT_OK


def plot_sweep(rows, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    mu = [r["mu"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(mu, [max(r["raw_rate"], 1e-3) for r in rows], "s-", label="raw")
    ax.semilogy(mu, [max(r["corrected_rate"], 1e-3) for r in rows], "o-", mfc="none", label="error corrected")
    ax.semilogy(mu, [max(r["pa_rate"], 1e-3) for r in rows], "^-", mfc="none", label="privacy amplified")
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("rate (bits/s)")
    ax2 = ax.twinx()
    ax2.plot(mu, [100 * r["ber"] for r in rows], "k:", label="BER")
    ax2.set_ylabel("BER (%)")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_alice(args):
    record = None
    if args.transcript:
        with open(args.transcript) as fh:
            ab, ak, _, _ = read_transcript_csv(fh)
        record = (ab, ak)
    results = []
    serve_alice(parse_addr(args.listen), record, timeout=args.timeout,
                max_sessions=args.sessions, results=results)
    status = EXIT_OK
    for res in results:
        if isinstance(res, SessionAborted):
            print(f"aborted: {res}", file=sys.stderr)
            status = EXIT_ABORT
        else:
            print(f"key bits={res.final_key.size} digest={res.digest.hex()}", file=sys.stderr)
            if args.out:
                _write_key(args.out, res.final_key)
    return status


def session_config(loaded: LoadedConfig, transcript_path=None) -> SessionConfig:
    run = loaded.run
    ch, det = run.link(run.mu_list[0])
    path = transcript_path or loaded.transcript
    kw = {}
    if path:
        with open(path) as fh:
            arrays = read_transcript_csv(fh)
        kw = dict(simulate=False, transcript=arrays, n_pulses=len(arrays[3]))
    return SessionConfig(
        channel=ch, detector=det, n_pulses=kw.pop("n_pulses", run.n_pulses), seed=run.seed,
        row_lengths=run.row_lengths, subset_stop_rounds=run.subset_stop_rounds, n_checks=run.n_checks,
        estimator=run.estimator, safety=run.safety, timeout=loaded.timeout, **kw,
    )


def cmd_bob(args):
    cfg = session_config(_loaded(args), args.transcript)
    try:
        res = connect_bob(parse_addr(args.connect), cfg)
    except SessionAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except OSError as exc:
        print(f"connection failed: {exc}", file=sys.stderr)
        return EXIT_ABORT
    print(f"key bits={res.final_key.size} digest={res.digest.hex()}", file=sys.stderr)
    if args.out:
        _write_key(args.out, res.final_key)
    return EXIT_OK


def cmd_apd(args):
    if args.input:
        with open(args.input) as fh:
            rows, rejects = apdlab.read_sweep_csv(fh)
        for line, msg in rejects:
            print(f"{args.input}:{line}: rejected: {msg}", file=sys.stderr)
    else:
        rows = apdlab.load_table1_fixture()
    analysis = apdlab.analyze_sweeps(rows, args.wavelength)
    with _output(args.out) as fh:
        fh.write(apdlab.report_csv(analysis.reports))
    if args.out:
        sys.stdout.write(apdlab.report_table(analysis.reports))
    for dev in analysis.unbounded:
        print(f"device {dev}: K unbounded (zero dark rate)", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args):
    with open(args.input) as fh:
        x, y = backscatter.read_spectrum_csv(fh)
    try:
        fit = backscatter.fit_spectrum(x, y, args.peaks, max_iter=args.max_iter)
    except FitError as exc:
        print(str(exc), file=sys.stderr)
        fit = exc.result
    with _output(args.out) as fh:
        fh.write("peak,amplitude,center,fwhm\n")
        for i, p in enumerate(fit.model.peaks, start=1):
            fh.write(f"{i},{p.amplitude!r},{p.center!r},{p.fwhm!r}\n")
        fh.write(f"background,{fit.model.background!r},,\n")
    sys.stderr.write(backscatter.fit_report(fit))
    if args.svg:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, y, ".", ms=3, label="data")
        ax.plot(x, backscatter.synth_spectrum(fit.model, x), "-", label="fit")
        ax.set_xlabel("frequency offset")
        ax.set_ylabel("counts/s")
        ax.legend()
        fig.savefig(args.svg, format="svg", metadata={"Date": None})
        plt.close(fig)
    return EXIT_OK if fit.converged else EXIT_CONFIG


def cmd_shift(args):
    cfg = backscatter.ShiftConfig(args.delta_f, args.pmd * 1e-12, args.length_km)
    dphi = backscatter.shift_phase_error(cfg)
    frac = backscatter.misroute_fraction(dphi)
    with _output(args.out) as fh:
        fh.write("delta_f_hz,pmd_ps_per_sqrt_km,length_km,phase_error_rad,misroute_fraction,"
                 "filter_suppression,duty_factor\n")
        duty = backscatter.duty_factor(args.link_km, args.delay_km) if args.delay_km is not None else float("nan")
        fh.write(f"{args.delta_f!r},{args.pmd!r},{args.length_km!r},{dphi!r},{frac!r},"
                 f"{backscatter.backscatter_suppression(shift_hz=args.delta_f)!r},{duty!r}\n")
    return EXIT_OK


# argument parsing


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (u64)")
    common.add_argument("--out", help="output CSV path (default stdout)")
    common.add_argument("--svg", help="optional SVG plot path")
    common.add_argument("-v", "--verbose", action="store_true")

    link = argparse.ArgumentParser(add_help=False)
    link.add_argument("--preset", choices=("10km", "20km"))
    link.add_argument("--mu", type=float, action="append", help="mean photon number (repeatable)")
    link.add_argument("--n-pulses", type=int)
    link.add_argument("--estimator", choices=("bb84", "lutkenhaus", "gh"))
    link.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="acqkd", description="Weak-pulse BB84 link simulator and tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common, link], help="write a pulse transcript CSV")
    s.set_defaults(func=cmd_simulate)
    s = sub.add_parser("sweep-mu", parents=[common, link], help="key rates versus mean photon number")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("alice", parents=[common], help="run the Alice end station")
    s.add_argument("--listen", default="127.0.0.1:8451")
    s.add_argument("--transcript", help="transcript CSV for pre-recorded mode")
    s.add_argument("--sessions", type=int, default=1, help="sessions to serve before exiting")
    s.add_argument("--timeout", type=float, default=30.0)
    s.set_defaults(func=cmd_alice)

    s = sub.add_parser("bob", parents=[common, link], help="run the Bob end station")
    s.add_argument("--connect", default="127.0.0.1:8451")
    s.add_argument("--transcript", help="transcript CSV for pre-recorded mode")
    s.set_defaults(func=cmd_bob)

    s = sub.add_parser("apd-analyze", parents=[common], help="detector figure-of-merit report")
    s.add_argument("input", nargs="?", help="sweep CSV (default: bundled synthetic fixture)")
    s.add_argument("--wavelength", type=float, default=apdlab.DEFAULT_WAVELENGTH)
    s.set_defaults(func=cmd_apd)

    s = sub.add_parser("spectrum-fit", parents=[common], help="fit Lorentzian peaks to a spectrum CSV")
    s.add_argument("input")
    s.add_argument("--peaks", type=int, default=3)
    s.add_argument("--max-iter", type=int, default=500)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("shift-analyze", parents=[common], help="phase error of a frequency-shifted link")
    s.add_argument("--delta-f", type=float, default=2.0e9, help="shift in Hz")
    s.add_argument("--pmd", type=float, default=0.2, help="ps per sqrt(km)")
    s.add_argument("--length-km", type=float, default=20.0)
    s.add_argument("--link-km", type=float, default=10.0)
    s.add_argument("--delay-km", type=float)
    s.set_defaults(func=cmd_shift)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SessionAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (ConfigError, QKDError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
