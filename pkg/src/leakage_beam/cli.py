"""Command-line front end: BER / sum-rate sweeps and the invariant suite."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile

from . import __version__
from .config import DEFAULTS, OUTPUT_FORMATS, ConfigError, build_spec, load_document
from .linalg import LinAlgError
from .precoders import Scheme
from .properties import check_properties
from .sim import TargetNotBracketed, interpolate_snr_at_ber, run_sweep

__all__ = ["RESULT_COLUMNS", "MARGIN_COLUMNS", "run_experiment", "main"]

RESULT_COLUMNS = (
    "snr_db",
    "scheme",
    "bits",
    "bit_errors",
    "ber",
    "sum_rate_mean",
    "sum_rate_stderr",
)
MARGIN_COLUMNS = ("snr_db", "scheme", "stream_l", "stream_m", "mean_margin_db")
TARGET_BER = 1e-4

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("leakage_beam")


def _result_rows(points):
    return [
        {
            "snr_db": p.snr_db,
            "scheme": p.scheme.value,
            "bits": p.bits_simulated,
            "bit_errors": p.bit_errors,
            "ber": p.ber,
            "sum_rate_mean": p.sum_rate_mean,
            "sum_rate_stderr": p.sum_rate_stderr,
        }
        for p in points
    ]


def _margin_rows(points):
    rows = []
    for p in points:
        table = p.mean_margins_db
        for l in range(table.shape[0]):
            for m in range(l):
                rows.append(
                    {
                        "snr_db": p.snr_db,
                        "scheme": p.scheme.value,
                        "stream_l": l + 1,
                        "stream_m": m + 1,
                        "mean_margin_db": float(table[l, m]),
                    }
                )
    return rows


def _render(rows, columns, fmt):
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def margins_path(output_path):
    root, ext = os.path.splitext(output_path)
    return f"{root}.margins{ext}"


def _write_atomic(files):
    """Write every ``path -> text`` pair or none of them."""
    staged = []
    try:
        for path, text in files.items():
            directory = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _gain_summary(points, out):
    by_scheme = {}
    for p in points:
        by_scheme.setdefault(p.scheme, []).append(p)
    snr = {}
    for scheme, curve in by_scheme.items():
        try:
            snr[scheme] = interpolate_snr_at_ber(curve, TARGET_BER)
        except TargetNotBracketed:
            print(f"{scheme}: BER {TARGET_BER:g} not bracketed by the SNR grid", file=out)
            continue
        print(f"{scheme}: SNR at BER {TARGET_BER:g} = {snr[scheme]:.2f} dB", file=out)
    if Scheme.ORIGINAL in snr and Scheme.PROPOSED in snr:
        gain = snr[Scheme.ORIGINAL] - snr[Scheme.PROPOSED]
        print(f"gain of proposed over original at BER {TARGET_BER:g}: {gain:.2f} dB", file=out)


def run_experiment(spec, workers=None, out=None):
    """Run the sweep in ``spec`` and write its result file(s).

    Returns a process exit status: 0 on success, 1 on a numerical failure and
    3 when the results cannot be written. Nothing is written on failure.
    """
    out = sys.stdout if out is None else out
    try:
        points = run_sweep(spec.sim, workers=workers)
    except (LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    files = {spec.output_path: _render(_result_rows(points), RESULT_COLUMNS, spec.output_format)}
    if spec.report_margins and spec.sim.dims.L >= 2:
        files[margins_path(spec.output_path)] = _render(
            _margin_rows(points), MARGIN_COLUMNS, spec.output_format
        )
    try:
        _write_atomic(files)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in files:
        print(f"wrote {path}", file=out)
    _gain_summary(points, out)
    return EXIT_OK


def build_parser():
    d = DEFAULTS
    p = argparse.ArgumentParser(
        prog="leakage-beam",
        description=(
            "Downlink multi-user MIMO simulation of the GED-based SLNR precoder "
            "('original') and its balanced variant ('proposed')."
        ),
        epilog=(
            f"Defaults: N={d['N']}, M={d['M']}, K={d['K']}, L={d['L']}, "
            f"SNR {d['snr_start']:g}..{d['snr_stop']:g} dB step {d['snr_step']:g}, "
            f"min_bit_errors={d['min_bit_errors']}, max_trials={d['max_trials']}, seed={d['seed']}. "
            "Transmit SNR is L / sigma^2. Worker threads: LEAKAGE_BEAM_THREADS or --workers."
        ),
    )
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", metavar="PATH", help="TOML (key = value) or JSON config file")
    p.add_argument("--out", metavar="PATH", help="result file")
    p.add_argument("--format", choices=OUTPUT_FORMATS, help="result file format")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--snr-start", type=float, metavar="DB")
    p.add_argument("--snr-stop", type=float, metavar="DB")
    p.add_argument("--snr-step", type=float, metavar="DB")
    p.add_argument("--streams", type=int, metavar="L")
    p.add_argument("--users", type=int, metavar="K")
    p.add_argument("--tx-antennas", type=int, metavar="N")
    p.add_argument("--rx-antennas", type=int, metavar="M")
    p.add_argument("--schemes", choices=("original", "proposed", "both"))
    p.add_argument("--min-errors", type=int, metavar="COUNT")
    p.add_argument("--max-trials", type=int, metavar="COUNT")
    p.add_argument("--block-trials", type=int, metavar="COUNT", help="trials per work unit")
    p.add_argument(
        "--ber-floor",
        type=float,
        metavar="BER",
        help="stop the sweep once every scheme is below this BER (0 disables)",
    )
    p.add_argument("--workers", type=int, metavar="COUNT", help="worker threads")
    p.add_argument("--report-margins", action="store_true", help="also write mean stream margins")
    p.add_argument(
        "--check-properties",
        action="store_true",
        help="run the precoder invariant suite instead of a sweep",
    )
    p.add_argument("--instances", type=int, default=200, help="instances for --check-properties")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


_FLAG_KEYS = {
    "seed": "seed",
    "snr_start": "snr_start",
    "snr_stop": "snr_stop",
    "snr_step": "snr_step",
    "streams": "L",
    "users": "K",
    "tx_antennas": "N",
    "rx_antennas": "M",
    "schemes": "schemes",
    "min_errors": "min_bit_errors",
    "max_trials": "max_trials",
    "block_trials": "block_trials",
    "ber_floor": "ber_floor",
    "out": "output_path",
    "format": "output_format",
}


def _spec_from_args(args):
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = load_document(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            doc[key] = value
    if any(getattr(args, f) is not None for f in ("snr_start", "snr_stop", "snr_step")):
        doc.pop("snr_grid", None)
    if args.out and not args.format and "output_format" not in doc:
        if args.out.lower().endswith(".json"):
            doc["output_format"] = "json"
    if args.report_margins:
        doc["report_margins"] = True
    return build_spec(doc)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.check_properties:
        seed = 0 if args.seed is None else args.seed
        try:
            report = check_properties(args.instances, seed=seed)
        except (LinAlgError, ArithmeticError) as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(report.format())
        return EXIT_OK if report.ok else EXIT_NUMERICAL
    try:
        spec = _spec_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(spec, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
