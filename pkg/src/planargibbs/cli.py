"""Batch front door: sample, transform, verify, stats.

Every run reads a model file, seeds all randomness from one --seed value,
and writes its outputs plus a manifest into --out.  Outputs carry the seed
and a schema version and contain nothing time- or host-dependent, so a rerun
with identical arguments is byte-identical.

Exit codes: 0 success, 1 check failure, 2 usage or schema error.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from .bonds import BondSet, sample_bonds
from .core import Configuration, Window, maxnorm, rng_stream
from .models import load_model
from .sampler import GibbsParams, estimate_correlation, run_chain
from .transform import (TaperParams, backward_transform, forward_transform,
                        inverse_transform)
from .verify import (check_density_identity, check_invariance_statistical,
                     check_symmetry_criterion_toy, check_transform_suite)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

SUITES = ("symmetry-criterion", "transform", "density", "invariance")


class UsageError(Exception):
    pass


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=Path(__file__).parent)
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(args, extra=None):
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {
        "schema": SCHEMA_VERSION,
        "seed": args.seed,
        "source_version": _git_describe(),
        "arguments": echo,
        **(extra or {}),
    }


def _parse_taper(text):
    try:
        tau, r, n, nprime, delta = text.split(",")
        return TaperParams(tau=float(tau), R=int(r), n=int(n),
                           nprime=int(nprime), delta=float(delta))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad --taper value {text!r}: {exc}") from exc


def _load_model_arg(args):
    try:
        return load_model(args.model)
    except FileNotFoundError as exc:
        raise UsageError(f"model file not found: {args.model}") from exc
    except (ValueError, KeyError) as exc:
        raise UsageError(f"model schema error: {exc}") from exc


def cmd_sample(args):
    model = _load_model_arg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = GibbsParams(z=model.z, pot=model.pot, window=Window(args.window),
                         sweeps=args.sweeps, burn_in=args.burn_in,
                         thinning=args.thinning)
    rng = rng_stream(args.seed, "cli-sample")
    samples = run_chain(params, rng)
    with open(out / "samples.jsonl", "w", encoding="utf-8") as fh:
        for cfg in samples:
            fh.write(json.dumps({"seed": args.seed, **cfg.to_json()},
                                sort_keys=True))
            fh.write("\n")
    _write_json(out / "manifest.json", _manifest(args, {
        "model": model.name, "n_samples": len(samples)}))
    return EXIT_OK


def _read_samples(path):
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(Configuration.from_json(json.loads(line)))
    return samples


def cmd_transform(args):
    model = _load_model_arg(args)
    dec = model.decompose()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = _parse_taper(args.taper)
    config = Configuration.from_json(json.loads(
        Path(args.config).read_text(encoding="utf-8")))
    if args.bonds:
        bonds = BondSet.from_json(json.loads(
            Path(args.bonds).read_text(encoding="utf-8")), config=config)
    else:
        rng = rng_stream(args.seed, "cli-bonds")
        bonds = sample_bonds(config, dec, params.n, rng)
    op = {"fwd": forward_transform, "bwd": backward_transform,
          "inv": inverse_transform}[args.direction]
    result = op(config, bonds, params, dec)
    payload = {"seed": args.seed, **result.to_json()}
    if args.round_trip:
        if args.direction == "fwd":
            back = inverse_transform(result.transformed_config,
                                     result.transformed_bonds, params, dec)
        else:
            back = forward_transform(result.transformed_config,
                                     result.transformed_bonds, params, dec)
        err = 0.0
        if config.n_total:
            err = float(np.max(np.abs(back.transformed_config.positions
                                      - config.positions)))
        payload["round_trip_max_error"] = err
    _write_json(out / "transform.json", payload)
    with open(out / "taper_profile.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["particle", "max_norm", "translation"])
        for i, (aval, tval) in enumerate(zip(maxnorm(config.positions),
                                             result.t_map)):
            writer.writerow([i, repr(float(aval)), repr(float(tval))])
    _write_json(out / "manifest.json", _manifest(args, {"model": model.name}))
    return EXIT_OK


def cmd_verify(args):
    model = _load_model_arg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wanted = SUITES if args.suite == "all" else (args.suite,)
    for name in wanted:
        if name not in SUITES:
            raise UsageError(f"unknown suite {args.suite!r}; "
                             f"choose from {', '.join(SUITES + ('all',))}")
    reports = []
    params = _parse_taper(args.taper)
    if "symmetry-criterion" in wanted:
        from .verify import SuiteReport
        rng = rng_stream(args.seed, "cli-verify-toy")
        agg = SuiteReport("symmetry-criterion", args.seed)
        bad = 0
        for _ in range(50):
            k = int(rng.integers(2, 9))
            mu = rng.dirichlet(np.ones(k))
            perm = rng.permutation(k).tolist()
            rep, _, _ = check_symmetry_criterion_toy(mu, perm, seed=args.seed)
            bad += 0 if rep.passed else 1
        agg.add("criterion-iff-invariance", bad == 0, value=bad,
                detail="50 random finite measures and permutations")
        reports.append(agg)
    dec = model.decompose() if set(wanted) & {"transform", "density"} else None
    if "transform" in wanted:
        rng = rng_stream(args.seed, "cli-verify-transform")
        chain = GibbsParams(z=model.z, pot=model.pot, window=Window(args.window),
                            sweeps=args.samples * 50, burn_in=2000, thinning=50)
        configs = run_chain(chain, rng)
        instances = [(c, sample_bonds(c, dec, params.n, rng)) for c in configs]
        reports.append(check_transform_suite(dec, params, instances,
                                             seed=args.seed,
                                             threads=args.threads))
    if "density" in wanted:
        # with --negative-control the computed density is replaced by one;
        # the suite is then expected to fail and the command exits nonzero
        reports.append(check_density_identity(
            dec, params, Window(float(params.n)), n_samples=args.samples,
            seed=args.seed, control=args.negative_control))
    if "invariance" in wanted:
        chain = GibbsParams(z=model.z, pot=model.pot,
                            window=Window(args.window),
                            proposal_bias=1.0 if args.negative_control else 0.0,
                            burn_in=20000, thinning=250)
        rep, _ = check_invariance_statistical(
            chain, tau_shift=0.5,
            window_a=((-1.0, -1.0), (1.0, 1.0)),
            n_samples=args.samples, seed=args.seed)
        reports.append(rep)

    _write_json(out / "verify_report.json", {
        "schema": SCHEMA_VERSION, "seed": args.seed,
        "reports": [r.to_json() for r in reports],
        "passed": all(r.passed for r in reports),
    })
    text = "\n\n".join(r.format_text() for r in reports)
    (out / "verify_report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    _write_json(out / "manifest.json", _manifest(args, {"model": model.name}))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def cmd_stats(args):
    model = _load_model_arg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = _read_samples(args.samples_file)
    if not samples:
        raise UsageError("empty samples file")
    counts = np.array([c.n_interior for c in samples])
    hist = np.bincount(counts)
    with open(out / "count_histogram.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["count", "samples"])
        for k, v in enumerate(hist):
            writer.writerow([k, int(v)])
    nspins = model.pot.nspins
    totals = np.zeros(nspins, dtype=np.int64)
    for c in samples:
        for s in range(nspins):
            totals[s] += int(np.sum(c.interior_spin == s))
    with open(out / "spin_fractions.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["spin", "count", "fraction"])
        grand = max(int(totals.sum()), 1)
        for s in range(nspins):
            writer.writerow([s, int(totals[s]), repr(totals[s] / grand)])
    # pair-distance histogram split by like/unlike spins
    edges = np.linspace(0.0, 4.0, 81)
    like = np.zeros(len(edges) - 1, dtype=np.int64)
    unlike = np.zeros(len(edges) - 1, dtype=np.int64)
    for c in samples:
        pos, sp = c.interior_xy, c.interior_spin
        for i in range(len(pos) - 1):
            d = model.pot.norm.dist(pos[i + 1:] - pos[i])
            same = sp[i + 1:] == sp[i]
            like += np.histogram(d[same], bins=edges)[0]
            unlike += np.histogram(d[~same], bins=edges)[0]
    with open(out / "pair_distances.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "like_pairs", "unlike_pairs"])
        for k in range(len(edges) - 1):
            writer.writerow([repr(float(edges[k])), repr(float(edges[k + 1])),
                             int(like[k]), int(unlike[k])])
    # correlation estimates for a few single-particle probes
    from .core import Particle
    dec_or_pot = model.pot
    probes = [[Particle((0.0, 0.0), 0)], [Particle((0.5, 0.5), 1 % nspins)]]
    corr = estimate_correlation(samples, probes, dec_or_pot, xi=model.xi)
    with open(out / "correlation.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe", "size", "estimate", "std_error",
                         "bound", "violates_bound"])
        for k, est in enumerate(corr):
            writer.writerow([k, est.probe_size, repr(est.estimate),
                             repr(est.std_error), repr(est.bound),
                             est.violates_bound])
    _write_json(out / "manifest.json", _manifest(args, {
        "model": model.name, "n_samples": len(samples)}))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="planargibbs",
        description="Simulate, transform and verify 2D continuum Gibbs "
                    "particle systems with finite spin spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker-thread cap for parallel suites")

    p = sub.add_parser("sample", help="run the MCMC chain and store samples")
    common(p)
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--sweeps", type=int, default=100000)
    p.add_argument("--burn-in", type=int, default=20000, dest="burn_in")
    p.add_argument("--thinning", type=int, default=250)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("transform", help="apply a deformed translation")
    common(p)
    p.add_argument("--config", required=True, help="configuration JSON file")
    p.add_argument("--bonds", default=None, help="bond JSON file (else sampled)")
    p.add_argument("--direction", choices=("fwd", "bwd", "inv"), default="fwd")
    p.add_argument("--taper", default="0.5,4,16,1,0.25",
                   help="tau,R,n,nprime,delta")
    p.add_argument("--round-trip", action="store_true", dest="round_trip",
                   help="also invert and report the max position error")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="run verification suites")
    common(p)
    p.add_argument("--suite", default="all",
                   help=f"one of {', '.join(SUITES + ('all',))}")
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--taper", default="0.5,4,16,1,0.25")
    p.add_argument("--negative-control", action="store_true",
                   dest="negative_control",
                   help="run the suite against a deliberately broken variant")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="summarize a samples file")
    common(p)
    p.add_argument("--samples-file", required=True, dest="samples_file")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
