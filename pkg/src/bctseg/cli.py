"""Batch command-line front end.

Subcommands: segment (MCMC over change-points), exact (single change-point
posterior), maptree (per-segment MAP tree models), generate (piece-wise
simulation from a spec file), stationary (per-segment stationary marginals).

Every flag can also be set through the environment with the prefix BCTSEG_
(e.g. BCTSEG_DEPTH=10). Each run writes a manifest.json with the resolved
parameters, the input digest, and the tool version; outputs are byte-stable
for a given seed. Exit codes: 0 success, 2 usage, 3 input parse failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .changepoints import ChangePoints, exact_single_cp_posterior, partition
from .mcmc import McmcConfig, Summary, Trace, run, summarize
from .sequences import (
    Alphabet,
    ParseError,
    Sequence,
    parse_csv,
    parse_fasta,
    parse_plain,
    split_context,
)
from .simulate import (
    NumericalError,
    generate_piecewise,
    piecewise_spec_from_json,
    stationary_marginal,
)
from .trees import BctHyperParams, CountTree


def _env_default(name, fallback=None, cast=str):
    raw = os.environ.get(f"BCTSEG_{name}")
    if raw is None:
        return fallback
    return cast(raw)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _add_common_model_flags(p):
    p.add_argument(
        "--depth",
        type=int,
        default=_env_default("DEPTH", None, int),
        required=_env_default("DEPTH") is None,
        help="maximum memory depth D",
    )
    p.add_argument(
        "--beta",
        type=float,
        default=_env_default("BETA", None, float),
        help="leaf weight of the tree prior (default 1 - 2**-(m-1))",
    )
    p.add_argument(
        "--alphabet",
        default=_env_default("ALPHABET"),
        help="symbol labels, e.g. ACGT or 0,1,2 (default: ACGT for FASTA, 01 otherwise)",
    )


def _add_out_flag(p):
    p.add_argument(
        "--out",
        default=_env_default("OUT", "."),
        help="output directory (created if missing)",
    )


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="bctseg",
        description="Bayesian change-point segmentation of discrete time series",
    )
    top.add_argument("--version", action="version", version=f"bctseg {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="sample the change-point posterior by MCMC")
    seg.add_argument("input")
    _add_common_model_flags(seg)
    group = seg.add_mutually_exclusive_group(
        required=_env_default("LMAX") is None and _env_default("NUM_CHANGES") is None
    )
    group.add_argument(
        "--lmax", type=int, default=_env_default("LMAX", None, int),
        help="maximum number of change-points (unknown-count mode)",
    )
    group.add_argument(
        "--num-changes", type=int, default=_env_default("NUM_CHANGES", None, int),
        help="known number of change-points (fixed-count mode)",
    )
    seg.add_argument("--iters", type=int, default=_env_default("ITERS", 100_000, int))
    seg.add_argument("--burnin", type=int, default=_env_default("BURNIN", 10_000, int))
    seg.add_argument("--seed", type=int, default=_env_default("SEED", 0, int))
    seg.add_argument("--thin", type=int, default=_env_default("THIN", 1, int))
    seg.add_argument("--chains", type=int, default=_env_default("CHAINS", 1, int))
    seg.add_argument(
        "--format", choices=("json", "csv"), default=_env_default("FORMAT", "json"),
        help="csv additionally writes ell_hist.csv and loc_hist.csv",
    )
    _add_out_flag(seg)

    exact = sub.add_parser("exact", help="exact single change-point posterior")
    exact.add_argument("input")
    _add_common_model_flags(exact)
    exact.add_argument(
        "--format", choices=("csv", "json"), default=_env_default("FORMAT", "csv")
    )
    _add_out_flag(exact)

    mt = sub.add_parser("maptree", help="MAP tree model of each segment")
    mt.add_argument("input")
    _add_common_model_flags(mt)
    mt.add_argument(
        "--segments",
        default=_env_default("SEGMENTS"),
        help="comma-separated interior change-points fixing the segmentation",
    )
    _add_out_flag(mt)

    gen = sub.add_parser("generate", help="simulate a piece-wise homogeneous chain")
    gen.add_argument("spec", help="generation spec JSON")
    gen.add_argument(
        "--seed", type=int, default=_env_default("SEED", None, int),
        help="override the seed in the spec file",
    )
    _add_out_flag(gen)

    st = sub.add_parser("stationary", help="stationary marginal of each segment's MAP model")
    st.add_argument("input")
    _add_common_model_flags(st)
    st.add_argument("--segments", default=_env_default("SEGMENTS"))
    _add_out_flag(st)

    return top


# ------------------------------------------------------------------ plumbing


def _resolve_alphabet(arg: str | None, is_fasta: bool) -> Alphabet:
    if arg is None:
        return Alphabet.dna() if is_fasta else Alphabet(("0", "1"))
    if "," in arg:
        return Alphabet(tuple(tok.strip() for tok in arg.split(",")))
    return Alphabet(tuple(arg))


def _load_sequence(path: str, depth: int, alphabet_arg: str | None):
    data = Path(path).read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    head = data.lstrip()[:1]
    is_fasta = path.lower().endswith((".fa", ".fasta", ".fna")) or head == b">"
    alphabet = _resolve_alphabet(alphabet_arg, is_fasta)
    if is_fasta:
        mapping = {lab.upper(): i for i, lab in enumerate(alphabet.labels)}
        raw = parse_fasta(data, mapping)
    elif path.lower().endswith(".csv"):
        raw = parse_csv(data, alphabet)
    else:
        raw = parse_plain(data, alphabet)
    return split_context(raw, depth, alphabet), digest


def _parse_segment_list(arg: str | None, n: int) -> ChangePoints:
    if not arg:
        return ChangePoints(n)
    try:
        points = [int(tok) for tok in arg.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"--segments expects comma-separated integers, got {arg!r}")
    return ChangePoints(n, sorted(points))


def _write_manifest(outdir: Path, command: str, parameters: dict, digest, started):
    manifest = {
        "command": command,
        "tool_version": __version__,
        "parameters": parameters,
        "input_digest": digest,
        "wall_clock_seconds": time.perf_counter() - started,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ commands


def _chain_worker(payload):
    x, config = payload
    trace = run(x, config)
    return trace


def _merge_summaries(traces: list[Trace]) -> Summary:
    merged = traces[0]
    if len(traces) == 1:
        return summarize(merged)
    combined = Trace(merged.n, merged.ell_cap, store_states=False)
    for tr in traces:
        combined.ell_counts += tr.ell_counts
        combined.loc_counts += tr.loc_counts
        for ell, table in tr.rank_counts.items():
            if ell in combined.rank_counts:
                combined.rank_counts[ell] += table
            else:
                combined.rank_counts[ell] = table.copy()
        for move, c in tr.proposed.items():
            combined.proposed[move] = combined.proposed.get(move, 0) + c
        for move, c in tr.accepted.items():
            combined.accepted[move] = combined.accepted.get(move, 0) + c
        combined.retained += tr.retained
        if tr.best_log_post > combined.best_log_post:
            combined.best_log_post = tr.best_log_post
            combined.best_state = tr.best_state
    return summarize(combined)


def cmd_segment(args) -> int:
    started = time.perf_counter()
    x, digest = _load_sequence(args.input, args.depth, args.alphabet)
    base = McmcConfig(
        iterations=args.iters,
        burn_in=args.burnin,
        seed=args.seed,
        depth=args.depth,
        beta=args.beta,
        num_changes=args.num_changes,
        ell_max=args.lmax,
        thinning=args.thin,
    )
    if args.chains < 1:
        raise ValueError("--chains must be positive")
    if args.chains == 1:
        traces = [run(x, base)]
    else:
        seeds = np.random.SeedSequence(args.seed).spawn(args.chains)
        configs = [
            McmcConfig(
                iterations=args.iters, burn_in=args.burnin, seed=s,
                depth=args.depth, beta=args.beta, num_changes=args.num_changes,
                ell_max=args.lmax, thinning=args.thin,
            )
            for s in seeds
        ]
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.chains) as pool:
            traces = list(pool.map(_chain_worker, [(x, c) for c in configs]))

    outdir = _outdir(args)
    for i, tr in enumerate(traces):
        name = "trace.csv" if i == 0 else f"trace_{i}.csv"
        with open(outdir / name, "w") as fh:
            tr.write_csv(fh)
    summary = _merge_summaries(traces)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary.to_json_obj(), fh, indent=2)
        fh.write("\n")
    if args.format == "csv":
        with open(outdir / "ell_hist.csv", "w") as fh:
            for ell, c in sorted(summary.ell_hist.items()):
                fh.write(f"{ell},{c}\n")
        with open(outdir / "loc_hist.csv", "w") as fh:
            for p, c in sorted(summary.loc_hist.items()):
                fh.write(f"{p},{c}\n")

    params = base.hyper(x.alphabet.size)
    _write_manifest(
        outdir,
        "segment",
        {
            "input": args.input,
            "alphabet": list(x.alphabet.labels),
            "depth": args.depth,
            "beta": params.beta,
            "mode": "fixed" if base.fixed_mode else "variable",
            "num_changes": args.num_changes,
            "lmax": args.lmax,
            "iters": args.iters,
            "burnin": args.burnin,
            "thin": args.thin,
            "seed": args.seed,
            "chains": args.chains,
            "n": x.n,
            "format": args.format,
        },
        digest,
        started,
    )
    print(f"wrote {outdir / 'trace.csv'}, {outdir / 'summary.json'}")
    return 0


def cmd_exact(args) -> int:
    started = time.perf_counter()
    x, digest = _load_sequence(args.input, args.depth, args.alphabet)
    params = BctHyperParams(x.alphabet.size, args.depth, args.beta)
    probs = exact_single_cp_posterior(x, params)
    positions = np.arange(2, x.n)

    outdir = _outdir(args)
    if args.format == "csv":
        target = outdir / "posterior.csv"
        with open(target, "w") as fh:
            fh.write("position,probability\n")
            for p, v in zip(positions, probs):
                fh.write(f"{p},{_fmt(v)}\n")
    else:
        target = outdir / "posterior.json"
        with open(target, "w") as fh:
            json.dump(
                {"positions": positions.tolist(), "probs": probs.tolist()}, fh
            )
            fh.write("\n")
    _write_manifest(
        outdir,
        "exact",
        {
            "input": args.input,
            "alphabet": list(x.alphabet.labels),
            "depth": args.depth,
            "beta": params.beta,
            "n": x.n,
            "format": args.format,
        },
        digest,
        started,
    )
    print(f"wrote {target}")
    return 0


def _fit_segment_models(x: Sequence, cp: ChangePoints, params: BctHyperParams):
    views = partition(x, cp)
    fitted = []
    for view in views:
        if view.length < 1:
            raise ValueError(f"segment {view.index} is empty")
        codes = np.concatenate([view.context, view.observations])
        tree = CountTree.from_arrays(codes, params.depth, params)
        fitted.append((view, tree.map_model(with_params=True)))
    return fitted


def cmd_maptree(args) -> int:
    started = time.perf_counter()
    x, digest = _load_sequence(args.input, args.depth, args.alphabet)
    params = BctHyperParams(x.alphabet.size, args.depth, args.beta)
    cp = _parse_segment_list(args.segments, x.n)
    fitted = _fit_segment_models(x, cp, params)
    payload = {
        "segments": [
            {
                "start": view.start,
                "end": view.end,
                "depth": model.depth,
                "model": model.to_json(x.alphabet),
            }
            for view, model in fitted
        ]
    }
    outdir = _outdir(args)
    with open(outdir / "maptree.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _write_manifest(
        outdir,
        "maptree",
        {
            "input": args.input,
            "alphabet": list(x.alphabet.labels),
            "depth": args.depth,
            "beta": params.beta,
            "segments": list(cp.positions),
            "n": x.n,
        },
        digest,
        started,
    )
    print(f"wrote {outdir / 'maptree.json'}")
    return 0


def cmd_generate(args) -> int:
    started = time.perf_counter()
    raw = Path(args.spec).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"spec file is not valid JSON: {exc}") from None
    spec = piecewise_spec_from_json(obj)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    seq, truth = generate_piecewise(spec)

    outdir = _outdir(args)
    labels = seq.alphabet.labels
    joiner = "" if all(len(lab) == 1 for lab in labels) else "\n"
    full = list(seq.context) + list(seq.observations)
    with open(outdir / "sequence.txt", "w") as fh:
        fh.write(joiner.join(labels[c] for c in full))
        fh.write("\n")
    with open(outdir / "changepoints.json", "w") as fh:
        json.dump(
            {"n": seq.n, "depth": spec.depth, "change_points": list(truth),
             "seed": spec.seed},
            fh,
        )
        fh.write("\n")
    _write_manifest(
        outdir,
        "generate",
        {"spec": args.spec, "seed": spec.seed, "n": seq.n, "depth": spec.depth},
        digest,
        started,
    )
    print(f"wrote {outdir / 'sequence.txt'} ({seq.n + spec.depth} symbols)")
    return 0


def cmd_stationary(args) -> int:
    started = time.perf_counter()
    x, digest = _load_sequence(args.input, args.depth, args.alphabet)
    params = BctHyperParams(x.alphabet.size, args.depth, args.beta)
    cp = _parse_segment_list(args.segments, x.n)
    fitted = _fit_segment_models(x, cp, params)
    payload = {
        "segments": [
            {
                "start": view.start,
                "end": view.end,
                "model_depth": model.depth,
                "marginal": [float(v) for v in stationary_marginal(model)],
            }
            for view, model in fitted
        ]
    }
    outdir = _outdir(args)
    with open(outdir / "stationary.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _write_manifest(
        outdir,
        "stationary",
        {
            "input": args.input,
            "alphabet": list(x.alphabet.labels),
            "depth": args.depth,
            "beta": params.beta,
            "segments": list(cp.positions),
            "n": x.n,
        },
        digest,
        started,
    )
    print(f"wrote {outdir / 'stationary.json'}")
    return 0


_HANDLERS = {
    "segment": cmd_segment,
    "exact": cmd_exact,
    "maptree": cmd_maptree,
    "generate": cmd_generate,
    "stationary": cmd_stationary,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
