"""Command-line front end.

Subcommands: ``spectrum``, ``detect``, ``theory``, ``hypercube`` and
``replay``.  Exit codes: 0 success, 1 input error, 2 numerical failure,
3 no community found.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from bipcomm import __version__
from bipcomm.graph import (
    COLLAPSE_MODES,
    GraphError,
    WeightedGraph,
    authority_hub_scores,
    load_directed_edges,
    load_edge_list,
    write_edge_list,
)
from bipcomm.heuristic import BIPARTITE, CLASSICAL, DetectionError, HeuristicConfig, detect, quality_targets
from bipcomm.hypercube import (
    FULL,
    ODD,
    PARITIES,
    HypercubeError,
    HypercubeSpec,
    eigenvalue_gap_check,
    exact_normalized_eigenvalue,
    gap_terms,
    generate,
    small_set_conductance_probe,
)
from bipcomm.spectral import LAPLACIAN, SIGNLESS, ConvergenceError, extreme_eigenpairs
from bipcomm.theory import TheoryConfig, TheoryError, theory_detect

log = logging.getLogger("bipcomm")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_EMPTY = 0, 1, 2, 3
SUPPORT_THRESHOLD = 1e-4


@dataclass(frozen=True)
class Preset:
    k: int
    r: int
    mode: str = BIPARTITE
    radius: float = 2 ** -0.5
    collapse: str = "sum"
    weighted: bool = True


PRESETS = {
    "blogs": Preset(k=6, r=3, collapse="sum", weighted=False),
    "as": Preset(k=20, r=10, mode=CLASSICAL, collapse="union", weighted=False),
    "marvel": Preset(k=10, r=4, collapse="union", weighted=False),
    "yeast": Preset(k=6, r=3, radius=math.sqrt(2), collapse="union", weighted=False),
}


class InputError(Exception):
    pass


class NoCommunity(Exception):
    pass


# -- formatting ------------------------------------------------------------------

def format_center(c, scale: int = 100, cutoff: int = 5) -> str:
    """Centre written as ``12a_1 - 40a_3``: coefficients of ``100 c`` rounded, those below 5 in size dropped."""
    coefs = np.rint(np.asarray(c) * scale).astype(int)
    terms = [(int(v), i + 1) for i, v in enumerate(coefs) if abs(v) >= cutoff]
    if not terms:
        return "0"
    out = []
    for j, (v, i) in enumerate(terms):
        body = f"{abs(v)}a_{i}"
        if j == 0:
            out.append(body if v > 0 else "-" + body)
        else:
            out.append(("+ " if v > 0 else "- ") + body)
    return " ".join(out)


def _g(x) -> str:
    if x is None:
        return "NA"
    return f"{x:.6g}"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read_input(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load_graph(data: bytes, weighted: bool, collapse: str) -> WeightedGraph:
    G = load_edge_list(data, weighted=weighted, collapse=collapse)
    if G.n == 0:
        raise InputError("graph has no edges")
    return G


# -- subcommands -------------------------------------------------------------------

def _apply_preset(args) -> Preset | None:
    preset = PRESETS.get(args.preset) if getattr(args, "preset", None) else None
    if getattr(args, "preset", None) and preset is None:
        raise InputError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    for name in ("k", "r", "mode", "radius", "collapse"):
        if hasattr(args, name) and getattr(args, name) is None:
            default = getattr(preset, name) if preset else {"r": None, "k": None, "mode": BIPARTITE,
                                                            "radius": 2 ** -0.5, "collapse": "sum"}[name]
            setattr(args, name, default)
    if hasattr(args, "weighted") and args.weighted is None:
        args.weighted = preset.weighted if preset else True
    return preset


def cmd_spectrum(args, out) -> dict:
    _apply_preset(args)
    if args.k is None:
        raise InputError("--k is required")
    data = _read_input(args.input)
    G = _load_graph(data, args.weighted, args.collapse)
    which = LAPLACIAN if args.which == "laplacian" else SIGNLESS
    removed = 0
    if args.strip_trivial:
        cfg = HeuristicConfig(k=1, r=1)
        from bipcomm.heuristic import _strip

        trivial, G, _ = _strip(G, cfg)
        removed = sum(p.size for p in trivial)
    emb = extreme_eigenpairs(G, args.k, which, seed=args.seed)
    support = emb.support_counts(args.support_threshold)
    rows = [
        {"i": i + 1, "eigenvalue": float(v), "positive_support": p, "negative_support": m}
        for i, (v, (p, m)) in enumerate(zip(emb.eigenvalues, support))
    ]
    report = {
        "command": "spectrum",
        "which": which,
        "n": G.n,
        "stripped_vertices": removed,
        "at_origin": int(emb.at_origin.sum()),
        "rows": rows,
        "residuals": [float(x) for x in emb.residuals],
    }
    if args.embedding:
        with open(args.embedding, "w", encoding="utf-8") as fh:
            emb.write_tsv(fh, G.labels)
    if args.format == "json":
        out.write(json.dumps(report, indent=2) + "\n")
    else:
        col = "2-lambda" if which == SIGNLESS else "lambda"
        out.write(f"i\t{col}\tpos_support\tneg_support\n")
        for row in rows:
            out.write(f"{row['i']}\t{row['eigenvalue']:.6f}\t{row['positive_support']}\t{row['negative_support']}\n")
    return report


def cmd_detect(args, out) -> dict:
    _apply_preset(args)
    if args.k is None or args.r is None:
        raise InputError("--k and --r are required (or use --preset)")
    data = _read_input(args.input)
    G = _load_graph(data, args.weighted, args.collapse)
    config = HeuristicConfig(
        k=args.k, r=args.r, iters=args.iters, seed=args.seed, radius=args.radius, mode=args.mode,
        min_side=args.min_side, threshold=not args.no_threshold, strip_trivial=not args.keep_trivial,
    )
    result = detect(G, config)
    report = result.to_dict(G.labels)
    report["command"] = "detect"
    report["input_sha256"] = _digest(data)
    report["quality_targets"] = quality_targets(result.eigenvalues).tolist() if args.mode == BIPARTITE else []
    if args.directed and args.mode == BIPARTITE:
        arcs = load_directed_edges(_read_input(args.directed), G)
        vertex_labels = _read_vertex_labels(args.vertex_labels, G) if args.vertex_labels else None
        for c, entry in zip(result.communities, report["communities"]):
            entry["orientation"] = authority_hub_scores(arcs, c.pair, vertex_labels)
    _write_communities(report, result, G, args.format, out)
    if not result.communities and not result.trivial:
        raise NoCommunity("no community found")
    return report


def _read_vertex_labels(path, G):
    index = {lab: i for i, lab in enumerate(G.labels)}
    labels = [None] * G.n
    for line in _read_input(path).decode().splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0] in index:
            labels[index[parts[0]]] = parts[1]
    return labels


def _write_communities(report, result, G, fmt, out) -> None:
    if fmt == "json":
        out.write(json.dumps(report, indent=2) + "\n")
        return
    centers = result.state.centers if result.state is not None else None
    out.write("# i\tcluster\tscore\tp_star\tn_star\tsize_S\tsize_S_prime\tcondition\t100c\n")
    for i, c in enumerate(result.communities, start=1):
        p = c.thresholds[0] if c.thresholds else None
        nstar = c.thresholds[1] if len(c.thresholds) > 1 else None
        sp = len(c.pair.S_prime) if c.pair is not None else 0
        sizes = len(c.pair.S) if c.pair is not None else len(c.community)
        center = format_center(centers[c.cluster]) if centers is not None else ""
        out.write(f"# {i}\t{c.cluster}\t{c.score:.6f}\t{_g(p)}\t{_g(nstar)}\t{sizes}\t{sp}\t{c.condition or ''}\t{center}\n")
    for p in result.trivial:
        out.write(f"# trivial\t-\t{p.score:.6f}\t\t\t{len(p.S)}\t{len(p.S_prime)}\t\t\n")
    out.write("community_id\tside\tvertex_label\tz_score\n")
    for i, c in enumerate(result.communities, start=1):
        sides = [("S", c.pair.S), ("S_prime", c.pair.S_prime)] if c.pair is not None else [("S", c.community)]
        for side, vs in sides:
            for u in vs:
                out.write(f"{i}\t{side}\t{G.labels[u]}\t{c.z.get(u, float('nan')):.6g}\n")


def _theory_graph(args) -> tuple[WeightedGraph, str | None]:
    if args.input:
        data = _read_input(args.input)
        return _load_graph(data, not args.unweighted, args.collapse or "sum"), _digest(data)
    if args.hypercube is not None:
        spec = _hypercube_spec(args.hypercube, args.c, args.eps, ODD)
        return generate(spec), None
    raise InputError("give --input or --hypercube")


def cmd_theory(args, out) -> dict:
    G, digest = _theory_graph(args)
    config = TheoryConfig(k=args.k, variant=args.variant, seed=args.seed, rounds=args.rounds,
                          strict=args.strict)
    result = theory_detect(G, config)
    report = result.to_dict(G.labels)
    report["command"] = "theory"
    report["input_sha256"] = digest
    if args.format == "json":
        out.write(json.dumps(report, indent=2) + "\n")
    else:
        out.write(f"# variant {config.variant}  k={config.k}  sum(lambda~)/k={result.rayleigh_value:.6g}\n")
        out.write("i\tphi_tilde\tbound\twithin\tsize_S\tsize_S_prime\tcoordinate\talpha\n")
        for p in result.pairs:
            out.write(f"{p.rank}\t{p.pair.score:.6f}\t{p.bound:.6g}\t{'PASS' if p.within_bound else 'FAIL'}\t"
                      f"{len(p.pair.S)}\t{len(p.pair.S_prime)}\t{p.coordinate + 1}\t{p.alpha:.4g}\n")
        if result.shortfall:
            out.write(f"# shortfall: {len(result.pairs)} of {config.constants()['r']} pairs\n")
    if not result.pairs:
        raise NoCommunity("no pair found")
    return report


def _hypercube_spec(k, c, eps, parity) -> HypercubeSpec:
    if (c is None) == (eps is None):
        raise InputError("give exactly one of --c and --eps")
    if c is not None:
        return HypercubeSpec.from_c(k, c, parity)
    return HypercubeSpec(k, eps, parity)


def cmd_hypercube(args, out) -> dict:
    spec = _hypercube_spec(args.k, args.c, args.eps, args.parity)
    report = {"command": "hypercube", "action": args.action, "spec": spec.to_dict()}
    if args.action == "spectrum":
        if spec.parity != ODD:
            raise InputError("closed-form spectrum is for --parity odd_only")
        rows = [{"s": s, "lambda": exact_normalized_eigenvalue(spec, s), "multiplicity": math.comb(spec.k, s)}
                for s in range(spec.k + 1)]
        report["rows"] = rows
        text = "s\tlambda\tmultiplicity\n" + "".join(f"{r['s']}\t{r['lambda']:.12g}\t{r['multiplicity']}\n" for r in rows)
    elif args.action == "gap":
        ok = eigenvalue_gap_check(spec)
        report.update(gap_terms(spec), passed=ok)
        text = f"2−λ_{{n−k}} ≤ 3ε: {'PASS' if ok else 'FAIL'}\n"
    elif args.action == "probe":
        res = small_set_conductance_probe(spec, args.samples, args.seed)
        ok = res.min_score >= 0.5
        report.update(min_phi_tilde=res.min_score, samples=res.samples, max_size=res.max_size,
                      fourier_violations=res.fourier_violations, passed=ok)
        text = (f"min phi_tilde over {res.samples} samples (|T u T'| <= {res.max_size}): {res.min_score:.6f}\n"
                f"phi_tilde >= 1/2: {'PASS' if ok else 'FAIL'}\n")
    else:
        buf = io.StringIO()
        write_edge_list(generate(spec), buf)
        text = buf.getvalue()
        report["edges"] = text.count("\n")
    if args.format == "json" and args.action != "export":
        out.write(json.dumps(report, indent=2) + "\n")
    else:
        out.write(text)
    return report


def cmd_replay(args, out) -> dict:
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest: {exc}") from None
    argv = manifest["argv"]
    parser = build_parser()
    replay_args = parser.parse_args(argv)
    replay_args.manifest = None
    replay_args.output = None
    if manifest.get("input_sha256") and getattr(replay_args, "input", None):
        if _digest(_read_input(replay_args.input)) != manifest["input_sha256"]:
            raise InputError("input file does not match the manifest digest")
    buf = io.StringIO()
    replay_args.func(replay_args, buf)
    text = buf.getvalue()
    same = _digest(text.encode()) == manifest["report_sha256"]
    out.write(text)
    if not same:
        raise InputError("replayed report differs from the manifest")
    return {"command": "replay", "identical": same}


# -- entry point -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1); argparse's own 2 means numerical failure here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bipcomm", description="Bipartite community detection from normalized Laplacian eigenpairs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("--input", required=True, help="edge list: lines 'u v [w]'")
            sp.add_argument("--collapse", choices=COLLAPSE_MODES, default=None)
            sp.add_argument("--unweighted", dest="weighted", action="store_false", default=None,
                            help="ignore a third column")
            sp.add_argument("--preset", default=None, help=f"one of {sorted(PRESETS)}")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("tsv", "json"), default="tsv")
        sp.add_argument("--output", default=None, help="write the report here instead of stdout")
        sp.add_argument("--manifest", default=None, help="write a run manifest (JSON) here")

    s = sub.add_parser("spectrum", help="extreme eigenvalues with sign-support counts")
    common(s)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--which", choices=("signless", "laplacian"), default="signless")
    s.add_argument("--strip-trivial", action="store_true", help="remove bipartite components first")
    s.add_argument("--support-threshold", type=float, default=SUPPORT_THRESHOLD)
    s.add_argument("--embedding", default=None, help="also write the embedding as TSV")
    s.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("detect", help="r-means heuristic with threshold search")
    common(d)
    d.add_argument("--k", type=int, default=None)
    d.add_argument("--r", type=int, default=None)
    d.add_argument("--iters", type=int, default=30)
    d.add_argument("--mode", choices=(BIPARTITE, CLASSICAL), default=None)
    d.add_argument("--radius", type=float, default=None)
    d.add_argument("--min-side", type=int, default=2)
    d.add_argument("--keep-trivial", action="store_true", help="do not split off bipartite components first")
    d.add_argument("--no-threshold", action="store_true", help="classical mode: return clusters unthresholded")
    d.add_argument("--directed", default=None, help="directed edge list for orientation statistics")
    d.add_argument("--vertex-labels", default=None, help="'vertex label' lines for label mixing")
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("theory", help="certified pipeline with explicit bounds")
    t.add_argument("--input", default=None)
    t.add_argument("--collapse", choices=COLLAPSE_MODES, default=None)
    t.add_argument("--unweighted", action="store_true")
    t.add_argument("--hypercube", type=int, default=None, metavar="K", help="use the odd noisy hypercube of dimension K")
    t.add_argument("--c", type=float, default=None)
    t.add_argument("--eps", type=float, default=None)
    t.add_argument("--k", type=int, required=True)
    t.add_argument("--variant", choices=("A", "B"), default="A")
    t.add_argument("--rounds", type=int, default=8)
    t.add_argument("--strict", action="store_true", help="exit 2 if any pair misses its bound")
    common(t, graph=False)
    t.set_defaults(func=cmd_theory)

    h = sub.add_parser("hypercube", help="noisy hypercube experiments")
    h.add_argument("--k", type=int, required=True)
    h.add_argument("--c", type=float, default=None)
    h.add_argument("--eps", type=float, default=None)
    h.add_argument("--parity", choices=PARITIES, default=ODD)
    h.add_argument("--action", choices=("spectrum", "gap", "probe", "export"), required=True)
    h.add_argument("--samples", type=int, default=10000)
    common(h, graph=False)
    h.set_defaults(func=cmd_hypercube)

    r = sub.add_parser("replay", help="re-run a manifest and check the report is identical")
    r.add_argument("--manifest", required=True)
    r.add_argument("--output", default=None)
    r.add_argument("--format", default="tsv")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    buf = io.StringIO()
    start = time.perf_counter()
    code = EXIT_OK
    report = None
    try:
        report = args.func(args, buf)
    except NoCommunity as exc:
        print(f"no community: {exc}", file=sys.stderr)
        code = EXIT_EMPTY
    except (InputError, GraphError, HypercubeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, TheoryError, DetectionError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    elapsed = time.perf_counter() - start
    text = buf.getvalue()
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if getattr(args, "manifest", None) and args.command != "replay":
        manifest = {
            "command": args.command,
            "version": __version__,
            "argv": [a for a in _strip_output_flags(argv)],
            "seed": getattr(args, "seed", None),
            "input_sha256": (report or {}).get("input_sha256"),
            "report_sha256": _digest(text.encode()),
            "eigenvalues": (report or {}).get("eigenvalues") or [r.get("eigenvalue") for r in (report or {}).get("rows", [])
                                                                  if "eigenvalue" in r],
            "communities": (report or {}).get("communities") or (report or {}).get("pairs") or [],
            "timing": {"seconds": elapsed},
        }
        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
    return code


def _strip_output_flags(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("--output", "--manifest"):
            skip = True
            continue
        if a.startswith("--output=") or a.startswith("--manifest="):
            continue
        out.append(a)
    return out


if __name__ == "__main__":
    sys.exit(main())
