"""Command line driver.

    diagfree density X=gue_vp:eta=0.03125 Y=er:d=1 N=1000 grid=-3:3:0.02 y=0.001
    diagfree freeness-decay --word perm-perm-n2 --Ns 50,100,200,400
    diagfree traffic-check mobius --max-vertices 4
    diagfree traffic-check ms-bound --samples 100 --N 12

``density`` takes ``key=value`` pairs, optionally on top of ``--manifest FILE``
(``key=value`` lines or a JSON object). The default seed comes from
``DIAGFREE_SEED``. Exit status is 0 iff every check passed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import checks
from .experiments import DensityManifest, NonConvergenceError, default_seed, run_density
from .freeness import corpus_manifest, decay_verdict, run_experiment, word_corpus

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3


def read_manifest(path: str) -> dict:
    """``key=value`` lines (``#`` comments) or a JSON object."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        return json.loads(text)
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValueError(f"{path}:{n}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def parse_pairs(items: Sequence[str]) -> dict:
    values = {}
    for item in items:
        key, eq, value = item.partition("=")
        if not eq or not key:
            raise ValueError(f"expected key=value, got {item!r}")
        values[key] = value
    return values


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_density(args) -> int:
    values = read_manifest(args.manifest) if args.manifest else {}
    values.update(parse_pairs(args.pairs))
    manifest = DensityManifest.from_mapping(values)
    try:
        run = run_density(manifest)
    except NonConvergenceError as exc:
        print(f"density: {exc}", file=sys.stderr)
        print(json.dumps(exc.diagnostics, indent=2, sort_keys=True), file=sys.stderr)
        return EXIT_NONCONVERGED
    csv_path, json_path = run.write()
    _emit({"csv": csv_path, "record": json_path, "l1": run.record["l1"], "mass": run.record["mass"]})
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_freeness_decay(args) -> int:
    corpus = word_corpus()
    if args.list:
        _emit(corpus_manifest(corpus))
        return EXIT_OK
    if args.manifest:
        for key, value in read_manifest(args.manifest).items():
            key = key.replace("-", "_")
            if key == "Ns":
                value = value if isinstance(value, list) else _int_list(str(value))
            if getattr(args, key, None) is None:
                setattr(args, key, value)
    if args.word is None:
        print("freeness-decay: --word is required (see --list)", file=sys.stderr)
        return EXIT_USAGE
    if args.word not in corpus:
        print(f"freeness-decay: unknown word {args.word!r}; known: {', '.join(corpus)}", file=sys.stderr)
        return EXIT_USAGE
    exp = corpus[args.word]
    Ns = args.Ns if args.Ns is not None else list(exp.default_Ns)
    seed = int(args.seed) if args.seed is not None else default_seed()
    trials = int(args.trials) if args.trials is not None else 40
    p = int(args.p) if args.p is not None else 1
    table = run_experiment(exp, Ns, p=p, trials=trials, seed=seed)
    verdict = decay_verdict(table)
    name = args.name or args.word
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"{name}.csv")
    json_path = os.path.join(out, f"{name}.run.json")
    table.to_csv(csv_path)
    record = {
        "word": args.word,
        "experiment": corpus_manifest({args.word: exp})[args.word],
        "N": table.N,
        "mean": table.mean,
        "stderr": table.stderr,
        "trials": trials,
        "p": p,
        "seed": seed,
        "verdict": verdict,
    }
    with open(json_path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit({"csv": csv_path, "record": json_path, "verdict": verdict})
    return EXIT_OK if verdict["passed"] else EXIT_FAILED


def cmd_traffic_check(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.suite == "mobius":
        report = checks.check_mobius(max_vertices=args.max_vertices, N=args.N or 5, seed=seed)
    elif args.suite == "ms-bound":
        report = checks.check_ms_bound(samples=args.samples or 100, N=args.N or 12, seed=seed)
    elif args.suite == "homomorphism":
        report = checks.check_homomorphism(samples=args.samples or 50, N=args.N or 6, seed=seed)
    elif args.suite == "expansion":
        report = checks.check_expansion(N=args.N or 3, seed=seed)
    else:
        if not args.file:
            print("traffic-check manifest: a manifest file is required", file=sys.stderr)
            return EXIT_USAGE
        with open(args.file) as fh:
            text = fh.read()
        if text.lstrip().startswith("["):
            entries = json.loads(text)
        else:
            entries = [json.loads(line) for line in text.splitlines() if line.strip() and not line.startswith("#")]
        report = checks.run_manifest(entries)
    text = report.to_json()
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    for failure in report.failures:
        print("FAILED " + json.dumps(failure, sort_keys=True, default=str), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diagfree", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    dens = sub.add_parser("density", help="histogram, amalgamated and scalar free densities of (X+Y)/sqrt2")
    dens.add_argument("pairs", nargs="*", metavar="key=value",
                      help="X=, Y=, N=, grid=min:max:step, y=, tol=, max_iter=, seed=, name=, out=, chunks=, workers=")
    dens.add_argument("--manifest", help="key=value or JSON file with the same keys")
    dens.set_defaults(func=cmd_density)

    dec = sub.add_parser("freeness-decay", help="Schatten moment of the freeness defect along an N ladder")
    dec.add_argument("--word", help="name of a corpus experiment")
    dec.add_argument("--Ns", type=_int_list, help="comma-separated sizes")
    dec.add_argument("--trials", type=int)
    dec.add_argument("--p", type=int, help="Schatten moment order")
    dec.add_argument("--seed", type=int)
    dec.add_argument("--out", help="output directory")
    dec.add_argument("--name", help="output basename (default: the word name)")
    dec.add_argument("--manifest", help="key=value or JSON file with the same keys")
    dec.add_argument("--list", action="store_true", help="print the corpus as JSON and exit")
    dec.set_defaults(func=cmd_freeness_decay)

    tc = sub.add_parser("traffic-check", help="identity and bound checks over graph monomials and test graphs")
    tc.add_argument("suite", choices=["mobius", "ms-bound", "homomorphism", "expansion", "manifest"])
    tc.add_argument("file", nargs="?", help="identity-check manifest (for the manifest suite)")
    tc.add_argument("--max-vertices", type=int, default=4)
    tc.add_argument("--samples", type=int)
    tc.add_argument("--N", type=int)
    tc.add_argument("--seed", type=int)
    tc.add_argument("--out", help="also write the JSON verdict here")
    tc.set_defaults(func=cmd_traffic_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
