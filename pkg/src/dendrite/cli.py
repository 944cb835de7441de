"""Command-line entry point.

Each subcommand reads an optional JSON config document, lets flags override
its keys, validates the result as a whole and only then runs.  Artifacts are
named ``<command>-<confighash>-<seed>.<ext>`` and every run writes a JSON
metadata file next to them.  Exit codes: 0 success, 1 runtime failure,
2 invalid configuration.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import bm, diagnostics
from .embedding import embed, tree_net
from .exceptions import ConfigError, DomainError, RetryExhaustedError
from .excursions import search_depth
from .gw import KINDS, OffspringDistribution, sample_conditioned_tree, scaling_sequence
from .streams import check_seed, replica_rng
from .trees import MetricTree, OrderedTree, dumps_tree, load_tree, pushforward_measure, spanning_subtree, \
    uniform_vertex_measure
from .walks import additive_functional_discrete, local_times_discrete, observe_on_subtree, run_srw

GLOBAL_KEYS = {"seed": "seed", "output-dir": "str", "workers": "int+"}
OFFSPRING_KEYS = {"offspring": "offspring", "alpha": "real", "tail-c": "real+", "k0": "int+"}

# key -> kind; required keys are listed separately
SCHEMAS = {
    "generate-tree": ({**OFFSPRING_KEYS, "n": "int+"}, {"offspring", "n", "seed"}),
    "search-depth": ({"tree": "file"}, {"tree"}),
    "embed": ({"tree": "tree", "spacing": "real+", "edge-length": "real+"}, {"tree"}),
    "walk": ({**OFFSPRING_KEYS, "n": "int+", "tree": "file", "steps": "int0", "format": "format", "k": "int+"},
             {"steps", "seed"}),
    "bm": ({"tree": "tree", "h": "real+", "t-end": "real+", "check-oracles": "bool", "replicas": "int+"},
           {"tree", "seed"}),
    "volume-profile": ({**OFFSPRING_KEYS, "n": "int+", "trees": "int+", "tree": "tree", "radii": "radii",
                        "log-correction": "real"}, set()),
}
SIMULATION = {"generate-tree", "walk", "bm", "converge"}


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _load_tree_arg(value):
    if isinstance(value, str) and (value.startswith("star:") or value.startswith("segment:")):
        return diagnostics.parse_tree_spec(value)
    return load_tree(value)


def _check_kind(kind, value):
    """Error message for a value of the wrong kind, else ``None``."""
    if kind == "seed":
        try:
            check_seed(value)
        except DomainError as exc:
            return str(exc)
        return None
    if kind == "str":
        return None if isinstance(value, str) else "must be a string"
    if kind == "int+":
        return None if _is_int(value) and value >= 1 else "must be a positive integer"
    if kind == "int0":
        return None if _is_int(value) and value >= 0 else "must be a non-negative integer"
    if kind == "real":
        return None if _is_real(value) else "must be a finite real"
    if kind == "real+":
        return None if _is_real(value) and value > 0 else "must be a positive real"
    if kind == "bool":
        return None if isinstance(value, bool) else "must be true or false"
    if kind == "offspring":
        return None if value in KINDS else f"must be one of {', '.join(KINDS)}"
    if kind == "format":
        return None if value in ("u32", "csv") else "must be 'u32' or 'csv'"
    if kind == "radii":
        ok = isinstance(value, list) and value and all(_is_real(r) and r > 0 for r in value)
        ok = ok and all(b > a for a, b in zip(value, value[1:]))
        return None if ok else "must be a non-empty increasing list of positive reals"
    if kind in ("file", "tree"):
        if not isinstance(value, str):
            return "must be a path" if kind == "file" else "must be a path or a fixture spec"
        try:
            _load_tree_arg(value) if kind == "tree" else load_tree(value)
        except (OSError, DomainError, ValueError) as exc:
            return f"cannot load tree: {exc}"
        return None
    raise AssertionError(kind)


def validate_config(doc, command: str) -> list:
    """All problems with a run configuration as ``(key, message)`` pairs; empty when valid."""
    if not isinstance(doc, dict):
        return [("<root>", "configuration must be a mapping")]
    if command == "converge":
        errors = []
        if "output-dir" in doc and not isinstance(doc["output-dir"], str):
            errors.append(("output-dir", "must be a string"))
        core = {k: v for k, v in doc.items() if k != "output-dir"}
        return errors + diagnostics.validate_experiment_config(core)
    if command not in SCHEMAS:
        return [("<command>", f"unknown command {command!r}")]
    kinds, required = SCHEMAS[command]
    kinds = {**GLOBAL_KEYS, **kinds}
    errors = []
    for k in sorted(set(doc) - set(kinds)):
        errors.append((k, "unknown key"))
    for k in sorted(required):
        if k not in doc:
            errors.append((k, "required"))
    for k in sorted(set(doc) & set(kinds)):
        msg = _check_kind(kinds[k], doc[k])
        if msg:
            errors.append((k, msg))
    if errors:
        return errors
    # cross-key checks once every value has the right kind
    if "offspring" in doc:
        try:
            OffspringDistribution.from_config(doc)
        except DomainError as exc:
            errors.append(("alpha" if "alpha" in str(exc) else "offspring", str(exc)))
    if command in ("walk", "volume-profile"):
        sampled = "offspring" in doc
        if sampled == ("tree" in doc):
            errors.append(("tree", "give either a tree or an offspring law with n"))
        elif sampled:
            if "n" not in doc:
                errors.append(("n", "required with an offspring law"))
            if "seed" not in doc:
                errors.append(("seed", "required when trees are sampled"))
    if command == "volume-profile" and "tree" in doc and "radii" not in doc:
        errors.append(("radii", "required for a fixed tree"))
    if command == "walk" and "tree" in doc and not isinstance(load_tree(doc["tree"]), OrderedTree):
        errors.append(("tree", "walks run on graph trees"))
    if command == "bm":
        t = _as_metric(_load_tree_arg(doc["tree"]))
        if t.n_nodes < 2:
            errors.append(("tree", "tree needs at least one edge"))
        elif doc.get("h", min(0.01, t.shortest_edge)) > t.shortest_edge:
            errors.append(("h", f"mesh spacing {doc['h']} exceeds the shortest edge {t.shortest_edge}"))
    return errors


def _as_metric(t, edge_length: float = 1.0) -> MetricTree:
    return t if isinstance(t, MetricTree) else MetricTree.from_ordered(t, edge_length)


def config_hash(doc: dict) -> str:
    """Short digest of the settings that determine the output bytes."""
    core = {k: v for k, v in doc.items() if k not in ("output-dir", "workers")}
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()[:12]


def _csv_with_header(text: str, h: str, seed) -> str:
    return f"# config-hash={h} seed={seed}\n" + text


# --------------------------------------------------------------------------
# commands; each returns (artifacts, summary) with artifacts as (ext, content, description)

def _sample_tree(doc, stream: int = 0) -> OrderedTree:
    dist = OffspringDistribution.from_config(doc)
    return sample_conditioned_tree(dist, doc["n"], replica_rng(doc["seed"], stream))


def cmd_generate_tree(doc, h):
    dist = OffspringDistribution.from_config(doc)
    t = _sample_tree(doc)
    sc = scaling_sequence(dist, t.n)
    text = dumps_tree(t, [f"config-hash={h} seed={doc['seed']}"])
    summary = {"law": dist.describe(), "n": t.n, "height": int(t.depth.max()),
               "a_n": sc.a_n, "alpha_n": sc.alpha_n}
    return [("tree", text, f"conditioned tree with {t.n} vertices")], summary


def cmd_search_depth(doc, h):
    t = load_tree(doc["tree"])
    if not isinstance(t, OrderedTree):
        raise DomainError("search depth is defined for graph trees")
    w = search_depth(t)
    return [("csv", _csv_with_header(w.to_csv(), h, doc.get("seed", 0)), "search-depth function")], \
        {"n": t.n, "max-depth": float(w.values.max())}


def cmd_embed(doc, h):
    t = _as_metric(_load_tree_arg(doc["tree"]), doc.get("edge-length", 1.0))
    psi = embed(t)
    pts = tree_net(t, doc.get("spacing"))
    ids = [f"node-{v}" for v in range(t.n_nodes)] + [f"edge-{p.edge}@{p.offset!r}" for p in pts[t.n_nodes:]]
    text = psi.to_csv(pts, ids)
    return [("csv", _csv_with_header(text, h, doc.get("seed", 0)), f"embedded net of {len(pts)} points")], \
        {"coordinates": psi.k, "points": len(pts)}


def cmd_walk(doc, h):
    t = load_tree(doc["tree"]) if "tree" in doc else _sample_tree(doc)
    rng = replica_rng(doc["seed"], 1)
    x = run_srw(t, doc["steps"], rng)
    fmt = doc.get("format", "u32")
    seed = doc["seed"]
    arts = [("u32", x.to_u32(), f"{x.steps}-step walk, uint32 vertex ids") if fmt == "u32"
            else ("csv", _csv_with_header(x.to_csv(), h, seed), f"{x.steps}-step walk")]
    summary = {"n": t.n, "steps": x.steps}
    if "k" in doc:
        targets = rng.integers(0, t.n, size=doc["k"])
        sub = spanning_subtree(t, targets)
        if sub.n_vertices < 2:
            raise DomainError("sampled subtree has no edge; draw again with another seed")
        obs = observe_on_subtree(x, sub)
        mu = pushforward_measure(uniform_vertex_measure(t), t, sub)
        A = additive_functional_discrete(local_times_discrete(obs), mu, t.n)
        lines = ["l,A,J,A_hat"] + [f"{i},{a},{j},{float(v)!r}" for i, (a, j, v) in enumerate(zip(obs.A, obs.J, A))]
        arts.append(("functional.csv", _csv_with_header("\n".join(lines) + "\n", h, seed),
                     f"jump chain of the walk on the span of {doc['k']} vertices"))
        summary.update({"targets": [int(v) for v in targets], "jumps": int(obs.J.size)})
    return arts, summary


def cmd_bm(doc, h):
    t = _as_metric(_load_tree_arg(doc["tree"]))
    spacing = doc.get("h", min(0.01, t.shortest_edge))
    seed = doc["seed"]
    if doc.get("check-oracles", False):
        checks = bm.check_oracles(t, seed, spacing, doc.get("replicas", 10_000))
        lines = ["check,exact,estimate,tolerance,passed"]
        lines += [f"{c.name},{c.exact!r},{c.estimate!r},{c.tolerance!r},{str(c.passed).lower()}" for c in checks]
        summary = {"checks": {c.name: c.passed for c in checks}, "passed": all(c.passed for c in checks)}
        return [("oracles.csv", _csv_with_header("\n".join(lines) + "\n", h, seed), "oracle checks")], summary
    path = bm.run_bm(t, spacing, doc.get("t-end", 1.0), t.node(t.root), replica_rng(seed, 0))
    return [("csv", _csv_with_header(path.to_csv(), h, seed), f"Brownian path with {path.nodes.size} steps")], \
        {"steps": int(path.nodes.size - 1), "clock": float(path.clock[-1]), "h": spacing}


def cmd_volume_profile(doc, h):
    if "tree" in doc:
        t = _load_tree_arg(doc["tree"])
        prof = diagnostics.ball_volume_profile(t, radii=doc["radii"])
    else:
        dist = OffspringDistribution.from_config(doc)
        prof = diagnostics.gw_volume_profile(dist, doc["n"], doc.get("trees", 1), doc["seed"], doc.get("radii"))
    summary = {"radii": [float(r) for r in prof.radii], "inf-volumes": [float(v) for v in prof.volumes]}
    try:
        fit = diagnostics.exponent_fit(prof, doc.get("log-correction"))
        summary["fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    except DomainError as exc:
        summary["fit"] = {"error": str(exc)}
    return [("csv", _csv_with_header(prof.to_csv(), h, doc.get("seed", 0)), "inf-volume profile")], summary


def cmd_converge(doc, h):
    core = {k: v for k, v in doc.items() if k != "output-dir"}
    rep = diagnostics.convergence_experiment(core)
    arts = [("json", rep.to_json(), "convergence report"),
            ("samples.csv", _csv_with_header(rep.samples_csv(), h, doc["seed"]), "raw samples")]
    fails = [r for r in rep.document.get("ks-reference", []) if not r["below-threshold"]]
    return arts, {"series": len(rep.document["per-size"]), "reference-failures": len(fails)}


HANDLERS = {
    "generate-tree": cmd_generate_tree,
    "search-depth": cmd_search_depth,
    "embed": cmd_embed,
    "walk": cmd_walk,
    "bm": cmd_bm,
    "volume-profile": cmd_volume_profile,
    "converge": cmd_converge,
}

# flag name -> (key, parser) per command
_LIST_REAL = ("list-real", lambda s: [float(x) for x in s.split(",") if x])
_LIST_INT = ("list-int", lambda s: [int(x) for x in s.split(",") if x])
FLAGS = {
    "common": {"seed": int, "output-dir": str, "workers": int},
    "offspring": {"offspring": str, "alpha": float, "tail-c": float, "k0": int, "n": int},
    "generate-tree": {},
    "search-depth": {"tree": str},
    "embed": {"tree": str, "spacing": float, "edge-length": float},
    "walk": {"tree": str, "steps": int, "format": str, "k": int},
    "bm": {"tree": str, "h": float, "t-end": float, "check-oracles": "flag", "replicas": int},
    "volume-profile": {"tree": str, "trees": int, "radii": _LIST_REAL, "log-correction": float},
    "converge": {"mode": str, "replicas": int, "sizes": _LIST_INT, "scales": _LIST_INT, "times": _LIST_REAL,
                 "tree": str, "bm-spacing": float, "k": int, "ks-threshold": float},
}
USES_OFFSPRING = {"generate-tree", "walk", "volume-profile", "converge"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dendrite", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.flag_keys = {}
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config document; flags override its keys")
        flags = dict(FLAGS["common"])
        if name in USES_OFFSPRING:
            flags.update(FLAGS["offspring"])
        flags.update(FLAGS[name])
        parser.flag_keys[name] = list(flags)
        for key, kind in flags.items():
            dest = key.replace("-", "_")
            if kind == "flag":
                p.add_argument(f"--{key}", dest=dest, action="store_true", default=None)
            elif isinstance(kind, tuple):
                p.add_argument(f"--{key}", dest=dest, type=kind[1], metavar="A,B,...")
            else:
                p.add_argument(f"--{key}", dest=dest, type=kind)
    return parser


def merged_config(args, parser) -> dict:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError([("<root>", "configuration must be a JSON object")])
    for key in parser.flag_keys[args.command]:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            doc[key] = value
    return doc


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        doc = merged_config(args, parser)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: cannot read {args.config}: {exc}", file=err)
        return 2
    except ConfigError as exc:
        for k, m in exc.errors:
            print(f"config: {k}: {m}", file=err)
        return 2
    errors = validate_config(doc, args.command)
    if not errors and args.command in SIMULATION and "seed" not in doc:
        errors = [("seed", "required")]
    if errors:
        for k, m in errors:
            print(f"config: {k}: {m}", file=err)
        return 2
    h = config_hash(doc)
    seed = doc.get("seed", 0)
    outdir = doc.get("output-dir", ".")
    try:
        os.makedirs(outdir, exist_ok=True)
        artifacts, summary = HANDLERS[args.command](doc, h)
        stem = os.path.join(outdir, f"{args.command}-{h}-{seed}")
        written = []
        for ext, content, desc in artifacts:
            path = f"{stem}.{ext}"
            with open(path, "wb" if isinstance(content, bytes) else "w") as fh:
                fh.write(content)
            written.append((path, desc))
        meta = {"command": args.command, "config": doc, "config-hash": h, "seed": seed,
                "artifacts": [os.path.basename(p) for p, _ in written], "summary": summary}
        meta_path = f"{stem}.meta.json"
        with open(meta_path, "w") as fh:
            fh.write(json.dumps(meta, sort_keys=True, indent=2, default=_json_default) + "\n")
        written.append((meta_path, "run metadata"))
    except (DomainError, RetryExhaustedError, OSError, ConfigError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    for path, desc in written:
        print(f"wrote {path}: {desc}", file=out)
    if args.command == "bm" and doc.get("check-oracles") and not summary["passed"]:
        print("error: oracle checks failed", file=err)
        return 1
    return 0


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
