"""Command-line entry point: ``haardist {analytic,simulate,fit,oracle,metric}``.

Spectrum arguments accept ``"v:m,v:m,..."`` (multiplicity optional,
values may be ``p/q``), a JSON file written by :meth:`Spectrum.to_json`,
or a builtin: ``projector:l:d``, ``pvm:n``, ``sic:n``, ``nonsic:n:mu``.

Simulation config (JSON, every key optional; flags override)::

    {"n": [4], "k": [0, 2, 4, 8, 16, 32], "gamma": [0, 1e-4, 1e-3, 1e-2, 1e-1],
     "m": 128, "povm": "sic", "seed": 0, "initial": "zero",
     "bins": {"m_prime": 10000, "lo": 1e-20, "hi": 1.0},
     "fit": false, "out": "runs"}

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .analytic import (
    AffineDistribution,
    build_distribution,
    moments_closed_form,
    moments_newton,
)
from .empirics import (
    DEFAULT_BINS,
    DEFAULT_HI,
    DEFAULT_LO,
    BinnedHistogram,
    bin_samples,
    classical_ks,
    ks_metric,
    log_bins,
)
from .errors import FitFailed, HaarDistError
from .fit import fit_effective
from .povm import KINDS, build_set, element_spectrum, total_distribution_samples
from .qsim import CircuitConfig, DensityState, sample_expectations, sample_states
from .spectra import Spectrum, depolarize_spectrum, fig1_parameterization

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

DEFAULT_CONFIG = {
    "n": [4],
    "k": [0, 2, 4, 8, 16, 32],
    "gamma": [0.0, 1e-4, 1e-3, 1e-2, 1e-1],
    "m": 128,
    "povm": "sic",
    "seed": 0,
    "initial": "zero",
    "bins": {"m_prime": DEFAULT_BINS, "lo": DEFAULT_LO, "hi": DEFAULT_HI},
    "fit": False,
    "out": "runs",
}


class UsageError(ValueError):
    """Bad command-line or config input."""


# ---------------------------------------------------------------------------
# argument helpers


def parse_spectrum(text: str) -> Spectrum:
    text = text.strip()
    path = Path(text)
    if path.suffix == ".json" or path.is_file():
        with open(path) as fh:
            data = json.load(fh)
        return Spectrum.from_json(data["spectrum"] if isinstance(data, dict) else data)
    head, _, rest = text.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if head == "projector":
            l, d = (int(p) for p in parts)
            return Spectrum.projector(l, d)
        if head in KINDS:
            n = int(parts[0])
            mu = int(parts[1]) if len(parts) > 1 else 0
            return element_spectrum(build_set(head, n), mu)
        entries = []
        for item in text.split(","):
            value, _, mult = item.partition(":")
            entries.append((value, int(mult) if mult else 1))
        return Spectrum(entries)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse spectrum {text!r}: {exc}") from None


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v]


def resolve_threads(flag: Optional[int]) -> int:
    if flag is not None:
        threads = flag
    elif os.environ.get("HAARDIST_THREADS"):
        threads = int(os.environ["HAARDIST_THREADS"])
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise UsageError("thread count must be positive")
    return threads


def _edges(args, config: Optional[dict] = None) -> np.ndarray:
    bins = dict((config or {}).get("bins", DEFAULT_CONFIG["bins"]))
    for key, attr in (("m_prime", "bins"), ("lo", "bin_lo"), ("hi", "bin_hi")):
        value = getattr(args, attr, None)
        if value is not None:
            bins[key] = value
    return log_bins(int(bins.get("m_prime", DEFAULT_BINS)), float(bins.get("lo", DEFAULT_LO)),
                    float(bins.get("hi", DEFAULT_HI)))


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# analytic


def cmd_analytic(args) -> int:
    spec = parse_spectrum(args.spectrum)
    gamma, s = args.gamma, args.s
    if args.fig1:
        gamma, s = fig1_parameterization(gamma, args.k)
    noisy = depolarize_spectrum(spec, gamma)
    dist = build_distribution(noisy, s)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lo, hi = dist.domain
    xs = np.linspace(lo, hi, args.grid) if hi > lo else np.array([lo])
    pdf, cdf_vals = dist.pdf(xs), dist.cdf(xs)
    with open(out / "analytic.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "pdf", "cdf"])
        for row in zip(xs, np.atleast_1d(pdf), np.atleast_1d(cdf_vals)):
            writer.writerow([repr(float(v)) for v in row])

    summary = {
        "spectrum": spec.to_json(),
        "depolarized_spectrum": noisy.to_json(),
        "gamma": float(gamma),
        "s": float(s),
        "kind": dist.kind,
        "domain": [lo, hi],
        "version": __version__,
    }
    if args.moments:
        newton = moments_newton(noisy, s, args.moments)
        rows = [["t", "newton", "closed_form"]]
        closed = None
        if float(s).is_integer():
            closed = moments_closed_form(noisy, int(s), args.moments)
        for t in range(1, args.moments + 1):
            rows.append([t, float(newton[t]), float(closed[t]) if closed is not None else ""])
        with open(out / "moments.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        summary["moments"] = [float(newton[t]) for t in range(1, args.moments + 1)]
    _write_json(out / "analytic.json", summary)
    _emit(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def load_config(args) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    if args.config:
        with open(args.config) as fh:
            user = json.load(fh)
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        config.update(user)
    for key in ("n", "k", "gamma"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    for key in ("m", "povm", "seed", "initial", "out"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if getattr(args, "fit", False):
        config["fit"] = True
    for key in ("n", "k", "gamma"):
        if not isinstance(config[key], list) or not config[key]:
            raise UsageError(f"config key {key!r} must be a nonempty list")
    if int(config["m"]) < 1:
        raise UsageError("m must be at least 1")
    if config["povm"] not in KINDS:
        raise UsageError(f"povm must be one of {KINDS}")
    if config["initial"] not in ("zero", "mixed"):
        raise UsageError("initial must be 'zero' or 'mixed'")
    if not 0 <= int(config["seed"]) < 2**64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return config


def cell_name(n: int, k: int, gamma: float, m: int, povm: str) -> str:
    return f"n{n}_k{k}_g{gamma:g}_m{m}_{povm}"


def _cell_payload(config: dict, n: int, k: int, gamma: float, edges) -> dict:
    cell = {
        "n": n,
        "k": k,
        "gamma": gamma,
        "m": int(config["m"]),
        "povm": config["povm"],
        "seed": int(config["seed"]),
        "initial": config["initial"],
        "bins": {"m_prime": len(edges) - 1, "lo": float(edges[0]), "hi": float(edges[-1])},
        "version": __version__,
    }
    blob = json.dumps(cell, sort_keys=True).encode()
    cell["config_hash"] = hashlib.sha256(blob).hexdigest()
    return cell


def reference_spectrum(povm: str, n: int) -> Spectrum:
    """Single-element spectrum whose Haar law the total distribution should follow.

    Exact for the PVM and SIC sets, whose elements share one spectrum.
    """
    if povm == "nonsic":
        raise UsageError("the NON-SIC total mixes several spectra; no single reference exists")
    return element_spectrum(build_set(povm, n), 0)


def run_cell(config: dict, n: int, k: int, gamma: float, edges, threads: int, out: Path) -> dict:
    cell = _cell_payload(config, n, k, gamma, edges)
    cfg = CircuitConfig(n, k, gamma, int(config["seed"]))
    initial = DensityState.zero(n) if config["initial"] == "zero" else DensityState.maximally_mixed(n)
    t0 = time.perf_counter()
    states = sample_states(cfg, int(config["m"]), initial, workers=threads)
    t1 = time.perf_counter()
    samples = total_distribution_samples(states, build_set(config["povm"], n))
    hist = bin_samples(samples, edges)
    t2 = time.perf_counter()

    out.mkdir(parents=True, exist_ok=True)
    meta = dict(cell)
    meta["layout"] = cfg.metadata()
    meta["timing_seconds"] = {"circuits": t1 - t0, "binning": t2 - t1}
    meta["threads"] = threads
    _write_json(out / "meta.json", meta)
    hist.write_csv(out / "histogram.csv")
    # written last: its presence marks the cell as complete
    hist.write_json(out / "histogram.json", extra=cell)
    return cell


def fit_cell(cell_dir: Path, spec: Optional[Spectrum] = None, d: Optional[int] = None) -> dict:
    """Fit one stored histogram; writes ``fit.json`` and returns a CSV row."""
    with open(cell_dir / "histogram.json") as fh:
        data = json.load(fh)
    hist = BinnedHistogram.from_json(data)
    if spec is None:
        spec = reference_spectrum(data["povm"], int(data["n"]))
    d = spec.dim if d is None else d
    row = {key: data.get(key) for key in ("n", "k", "gamma", "m")}
    try:
        fit = fit_effective(hist, spec, d)
        payload = fit.to_json()
    except FitFailed as exc:
        fit = exc.fit
        payload = dict(fit.to_json(), error=str(exc))
    payload.update(config_hash=data.get("config_hash"), seed=data.get("seed"), version=__version__)
    reference = build_distribution(spec, 1)
    row.update(
        gamma_eff=fit.gamma_eff,
        s_eff=fit.s_eff,
        objective=fit.objective,
        ks=ks_metric(hist, reference.cdf),
    )
    payload["ks"] = row["ks"]
    _write_json(cell_dir / "fit.json", payload)
    return row


FIT_COLUMNS = ["n", "k", "gamma", "m", "gamma_eff", "s_eff", "objective", "ks"]


def _write_fit_table(path: Path, rows: List[dict]) -> None:
    rows = sorted(rows, key=lambda r: (r["n"], r["k"], r["gamma"], r["m"]))
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row[key] for key in FIT_COLUMNS})


def cmd_simulate(args) -> int:
    config = load_config(args)
    edges = _edges(args, config)
    threads = resolve_threads(args.threads)
    root = Path(config["out"])
    root.mkdir(parents=True, exist_ok=True)
    failures, fit_rows = [], []
    for n in config["n"]:
        for k in config["k"]:
            for gamma in config["gamma"]:
                name = cell_name(int(n), int(k), float(gamma), int(config["m"]), config["povm"])
                cell_dir = root / name
                try:
                    if (cell_dir / "histogram.json").exists():
                        print(f"skip {name} (complete)", file=sys.stderr)
                    else:
                        run_cell(config, int(n), int(k), float(gamma), edges, threads, cell_dir)
                        print(f"done {name}", file=sys.stderr)
                    if config["fit"] and config["povm"] != "nonsic":
                        fit_rows.append(fit_cell(cell_dir))
                except (HaarDistError, ArithmeticError, ValueError) as exc:
                    failures.append({"cell": name, "error": f"{type(exc).__name__}: {exc}"})
                    print(f"fail {name}: {exc}", file=sys.stderr)
    if fit_rows:
        _write_fit_table(root / "fits.csv", fit_rows)
    _write_json(root / "failures.json", {"failures": failures})
    return EXIT_NUMERICAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# fit / oracle / metric


def cmd_fit(args) -> int:
    target = Path(args.histogram)
    spec = parse_spectrum(args.spectrum) if args.spectrum else None
    if target.is_dir():
        rows = [fit_cell(p.parent, spec, args.d) for p in sorted(target.glob("*/histogram.json"))]
        if not rows:
            raise UsageError(f"no histogram.json found under {target}")
        _write_fit_table(Path(args.out) if args.out else target / "fits.csv", rows)
        _emit({"cells": len(rows)})
        return EXIT_OK
    with open(target) as fh:
        data = json.load(fh)
    hist = BinnedHistogram.from_json(data)
    if spec is None:
        if "povm" not in data:
            raise UsageError("histogram has no POVM metadata; pass --spectrum")
        spec = reference_spectrum(data["povm"], int(data["n"]))
    d = args.d or spec.dim
    status = EXIT_OK
    try:
        payload = fit_effective(hist, spec, d).to_json()
    except FitFailed as exc:
        payload = dict(exc.fit.to_json(), error=str(exc))
        status = EXIT_NUMERICAL
    if args.out:
        _write_json(Path(args.out), payload)
    _emit(payload)
    return status


def cmd_oracle(args) -> int:
    spec = parse_spectrum(args.spectrum)
    if args.m < 1:
        raise UsageError("m must be at least 1")
    dist = build_distribution(spec, args.s)
    rng = np.random.default_rng(args.seed)
    samples = sample_expectations(spec, int(args.s), args.m, rng)
    payload = {
        "spectrum": spec.to_json(),
        "s": args.s,
        "m": args.m,
        "seed": args.seed,
        "ks": classical_ks(samples, dist.cdf),
        "version": __version__,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lo, hi = dist.domain
        hist = bin_samples(samples, _edges(args) if args.bins else np.linspace(lo, hi, 101))
        hist.write_json(out / "histogram.json", extra={"seed": args.seed, "version": __version__})
        _write_json(out / "oracle.json", payload)
    _emit(payload)
    return EXIT_OK


def cmd_metric(args) -> int:
    hist = BinnedHistogram.read_json(args.histogram)
    spec = parse_spectrum(args.spectrum)
    dist = AffineDistribution.depolarized(build_distribution(spec, args.s), args.gamma) \
        if args.gamma else build_distribution(spec, args.s)
    _emit({"ks_metric": ks_metric(hist, dist.cdf), "m_total": hist.m_total})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haardist", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def bins(p):
        p.add_argument("--bins", type=int, help="number of log bins m'")
        p.add_argument("--bin-lo", type=float)
        p.add_argument("--bin-hi", type=float)

    p = sub.add_parser("analytic", help="density/CDF grid and moments for a spectrum")
    p.add_argument("spectrum")
    p.add_argument("--s", type=float, default=1)
    p.add_argument("--gamma", type=float, default=0.0, help="global depolarizing scale")
    p.add_argument("--k", type=int, default=0, help="depth for --fig1")
    p.add_argument("--fig1", action="store_true", help="use gamma^(k) = 1-(1-gamma)^k and s = k+1")
    p.add_argument("--grid", type=int, default=1001)
    p.add_argument("--moments", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="noisy brickwork circuits measured by a POVM set")
    p.add_argument("--config")
    p.add_argument("--n", type=_int_list)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--gamma", type=_float_list)
    p.add_argument("--m", type=int)
    p.add_argument("--povm", choices=KINDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--initial", choices=("zero", "mixed"))
    p.add_argument("--threads", type=int)
    p.add_argument("--fit", action="store_true", default=None)
    p.add_argument("--out")
    bins(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the effective model to a histogram or a run directory")
    p.add_argument("histogram")
    p.add_argument("--spectrum")
    p.add_argument("--d", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("oracle", help="Monte-Carlo check of the analytic CDF")
    p.add_argument("spectrum")
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--m", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    bins(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("metric", help="empirical KS metric of a histogram against the analytic CDF")
    p.add_argument("histogram")
    p.add_argument("spectrum")
    p.add_argument("--s", type=float, default=1)
    p.add_argument("--gamma", type=float, default=0.0)
    p.set_defaults(func=cmd_metric)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ArithmeticError, FitFailed) as exc:
        print(f"haardist: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError, OSError, KeyError) as exc:
        print(f"haardist: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
