"""Command-line interface: ``effham <subcommand> ...``.

Exit codes: 0 when every certificate is PASS, VACUOUS or SKIPPED, 1 when
any certificate FAILs, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import CorpusSpec, generate_corpus, model_checksum, random_chain
from .errors import ConfigError, EffHamError
from .ising import build_instance
from .lattice import RegionSplit, derive_constants
from .runner import ExperimentConfig, MODEL_SUITES, read_certificates, run_suite, summarize
from .serialize import pack_operator, pack_spectrum, read_model, write_model
from .truncation import build_decomposition, truncate


def floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def pairs(text: str) -> tuple:
    """``"a:b,c:d"`` -> ``((a, b), (c, d))``."""
    out = []
    for item in text.split(","):
        if not item.strip():
            continue
        try:
            a, b = item.split(":")
            out.append((float(a), float(b)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a:b pairs, got {item!r}") from None
    return tuple(out)


def _model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ising", type=int, metavar="N", help="Ising chain on 2N sites (N odd)")
    g.add_argument("--model", type=Path, help="model file")
    g.add_argument("--corpus-index", type=int, metavar="I", help="corpus model I of --seed")
    p.add_argument("--seed", type=int, default=0, help="corpus seed (default 0)")
    p.add_argument("--sites", type=int, default=8, help="corpus site count (default 8)")
    p.add_argument("--j", type=float, default=2.0, help="corpus strength j (default 2.0)")


def _load(args) -> tuple:
    """``(model, split)`` from the model arguments."""
    if args.ising is not None:
        inst = build_instance(args.ising, 3.0)
        return inst.model, inst.split
    if args.model is not None:
        model, stored = read_model(args.model)
        r = (stored or derive_constants(model.interaction, model.lattice)).range_r
        lat = model.lattice
        return model, RegionSplit.minimal(lat, lat.sites[: lat.n_sites // 2], r)
    model, _ = random_chain(args.seed, args.corpus_index, args.sites, args.j, False)
    lat = model.lattice
    return model, RegionSplit.minimal(lat, lat.sites[: lat.n_sites // 2], 1)


def cmd_build(args) -> int:
    model, split = _load(args)
    consts = derive_constants(model.interaction, model.lattice)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_model(out / f"{model.name}.json", model, consts)
    if args.operator:
        dec = build_decomposition(model, split, shift_to_zero=False)
        (out / f"{model.name}.op").write_bytes(pack_operator(dec.full))
    print(json.dumps({"model": model.name, "sites": model.lattice.n_sites,
                      "boundary": [list(s) for s in split.boundary],
                      "range_r": consts.range_r, "strength_j": consts.strength_j,
                      "locality_N": consts.locality_N}))
    return 0


def cmd_truncate(args) -> int:
    model, split = _load(args)
    dec = build_decomposition(model, split, shift_to_zero=not args.no_shift)
    tr = truncate(dec, args.M)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "H_bar.op").write_bytes(pack_operator(tr.H_bar))
    (out / "env_bar.spec").write_bytes(pack_spectrum(tr.truncated_env_spectrum))
    inv = {k: {"value": v, "ok": bool(ok)} for k, (v, ok) in tr.invariants().items()}
    summary = {"model": model.name, "M": args.M, "shift": dec.shift,
               "boundary_norm": dec.boundary_norm, "tie_hits": tr.tie_hits, "invariants": inv}
    (out / "truncation.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0 if all(v["ok"] for v in inv.values()) else 1


def _report_manifest(man) -> int:
    print(f"{man.suite}: {man.rows} rows, {json.dumps(man.tallies, sort_keys=True)}"
          f"{' (halted on FAIL, bundle in ' + man.repro_dir + ')' if man.halted else ''}")
    print(f"csv: {man.csv_path}")
    return man.exit_code


def cmd_certify(args) -> int:
    cfg = ExperimentConfig(
        suite=args.suite, source=args.source, seed=args.seed, count=args.count,
        site_counts=args.sites, model_file=str(args.model_file) if args.model_file else None,
        ising_N=args.ising_N, M_grid=args.M, pq_grid=args.pq, ed_grid=args.ed,
        xi_grid=args.xi, cut_grid=args.cuts, tail_grid=args.tail, s_fractions=args.s_frac,
        n_max=args.n_max, rtol=args.rtol, out_dir=str(args.out), cache_dir=args.cache,
        workers=args.workers, halt_on_fail=not args.no_halt)
    return _report_manifest(run_suite(cfg))


def cmd_counterexample(args) -> int:
    cfg = ExperimentConfig(suite="counterexample", cutoff_M=args.M, N_min=args.N_min,
                           N_max=args.N_max, out_dir=str(args.out))
    return _report_manifest(run_suite(cfg))


def cmd_range_trunc(args) -> int:
    cfg = ExperimentConfig(suite="range-trunc", alphas=args.alpha, ells=args.ell, qs=args.q,
                           window=args.window, decay_seeds=args.seeds, seed=args.seed,
                           synthetic=args.synthetic, out_dir=str(args.out))
    return _report_manifest(run_suite(cfg))


def cmd_corpus(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models = generate_corpus(CorpusSpec(args.seed, args.count, args.sites), out)
    for cm in models:
        print(f"{model_checksum(cm)}  {cm.model_id}.json")
    return 0


def cmd_report(args) -> int:
    rows = read_certificates(args.csv)
    summary = summarize(rows)
    width = max((len(c) for c in summary["by_claim"]), default=5)
    for claim, tally in sorted(summary["by_claim"].items()):
        print(f"{claim:<{width}}  " + "  ".join(f"{k}={v}" for k, v in sorted(tally.items())))
    print(f"total {summary['rows']} rows: {json.dumps(summary['total'], sort_keys=True)}; "
          f"informative PASS fraction {summary['informative_fraction']:.3f}")
    return 1 if summary["total"].get("FAIL", 0) else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="effham", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="write a model file (and optionally its dense operator)")
    _model_args(b)
    b.add_argument("--out", default="models", help="output directory (default models)")
    b.add_argument("--operator", action="store_true", help="also write the binary H container")
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("truncate", help="build the truncated Hamiltonian at cutoff M")
    _model_args(t)
    t.add_argument("--M", type=float, required=True, help="energy cutoff")
    t.add_argument("--no-shift", action="store_true", help="keep the raw ground energy")
    t.add_argument("--out", default="truncation", help="output directory (default truncation)")
    t.set_defaults(func=cmd_truncate)

    c = sub.add_parser("certify", help="run a certificate suite over models")
    c.add_argument("suite", choices=MODEL_SUITES)
    c.add_argument("--source", choices=("corpus", "ising", "file"), default="corpus")
    c.add_argument("--seed", type=int, default=0, help="corpus seed (default 0)")
    c.add_argument("--count", type=int, default=10, help="corpus size (default 10)")
    c.add_argument("--sites", type=ints, default=(8, 9, 10), help="corpus site counts (default 8,9,10)")
    c.add_argument("--model-file", type=Path, help="model file for --source file")
    c.add_argument("--ising-N", type=int, default=5, help="Ising half length (default 5)")
    c.add_argument("--M", type=floats, help="cutoff grid (default: derived per model)")
    c.add_argument("--pq", type=pairs, help="(p,q) grid as p:q,... (default: derived)")
    c.add_argument("--ed", type=pairs, help="(eps,delta) grid as e:d,... (default: derived)")
    c.add_argument("--xi", type=floats, default=(0.0,), help="window shifts (default 0)")
    c.add_argument("--cuts", type=pairs, help="(M_cut,N_cut) grid (default: derived)")
    c.add_argument("--tail", type=pairs, help="(eps,N) grid (default: derived)")
    c.add_argument("--s-frac", type=floats, default=(0.5,), help="s / S_X values (default 0.5)")
    c.add_argument("--n-max", type=int, default=20, help="series order (default 20)")
    c.add_argument("--rtol", type=float, help="relative tolerance override (default 1e-8)")
    c.add_argument("--out", type=Path, default=Path("runs"), help="output directory (default runs)")
    c.add_argument("--cache", help="spectral cache directory (default: none)")
    c.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    c.add_argument("--no-halt", action="store_true", help="keep going after a FAIL")
    c.set_defaults(func=cmd_certify)

    x = sub.add_parser("counterexample", help="Ising divergence scan")
    x.add_argument("--M", type=float, default=10.0, help="cutoff (default 10)")
    x.add_argument("--N-max", type=int, default=101, help="largest odd N (default 101)")
    x.add_argument("--N-min", type=int, default=5, help="smallest odd N (default 5)")
    x.add_argument("--out", type=Path, default=Path("runs"), help="output directory (default runs)")
    x.set_defaults(func=cmd_counterexample)

    r = sub.add_parser("range-trunc", help="range truncation of decaying chains and gap stability")
    r.add_argument("--alpha", type=floats, default=(3.0,), help="decay exponents (default 3)")
    r.add_argument("--ell", type=ints, default=(4,), help="block lengths (default 4)")
    r.add_argument("--q", type=ints, default=(2,), help="block counts (default 2)")
    r.add_argument("--window", type=int, help="padding beyond [a, b] (default 3 l (q + 2))")
    r.add_argument("--seeds", type=int, default=1, help="instances per grid point (default 1)")
    r.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
    r.add_argument("--synthetic", type=int, default=0, help="synthetic gapped instances (default 0)")
    r.add_argument("--out", type=Path, default=Path("runs"), help="output directory (default runs)")
    r.set_defaults(func=cmd_range_trunc)

    k = sub.add_parser("corpus", help="write the seeded corpus as model files")
    k.add_argument("--seed", type=int, default=0, help="corpus seed (default 0)")
    k.add_argument("--count", type=int, default=100, help="number of models (default 100)")
    k.add_argument("--sites", type=ints, default=(8, 9, 10), help="site counts (default 8,9,10)")
    k.add_argument("--out", default="corpus", help="output directory (default corpus)")
    k.set_defaults(func=cmd_corpus)

    q = sub.add_parser("report", help="summarize a certificates CSV")
    q.add_argument("csv", type=Path)
    q.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EffHamError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
