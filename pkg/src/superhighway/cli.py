"""``shx``: the ingest -> build -> train -> eval -> grid -> report pipeline.

Each command reads and writes versioned artifacts and appends one JSON line
per successful run to a manifest recording the parameters, the derived seed
and the sha256 of every input and output file.  Failures print a single JSON
object on stderr and exit non-zero.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .artifacts import (
    EVAL_SCHEMA,
    GRID_SCHEMA,
    digest,
    read_json,
    read_structure,
    read_system,
    write_json,
    write_structure,
    write_system,
)
from .construct import DEFAULT_CAP, ConstructionParams, construct_superhighway
from .data import SynthConfig, generate_synthetic, ingest, write_tsv
from .embed import Backend, EmbeddingModel, TrainConfig, train, train_transfer
from .embed.model import sidecar
from .errors import ArtifactError, InvalidParam, SuperhighwayError
from .evaluate import evaluate, split
from .graph import Domain, StructureKind, merge_highway, single_structure, stats, system_stats
from .grid import frange, grid_search

logger = logging.getLogger("superhighway.cli")

REPORT_SCHEMA = "shx-report/1"
MANIFEST_NAME = "shx-manifest.jsonl"
MODELS = [b.value for b in Backend]
STRUCTURES = [k.value for k in StructureKind]
TRAIN_FIELDS = [f for f in dataclasses.fields(TrainConfig) if f.name not in ("seed", "workers")]
SYNTH_FIELDS = [f for f in dataclasses.fields(SynthConfig) if f.name != "seed"]

REQUIRED = {
    "ingest": ("source", "target", "out"),
    "synth": ("out_dir",),
    "build": ("system", "structure", "out"),
    "train": ("model", "out"),
    "eval": ("model", "system", "out"),
    "grid": ("system", "model", "out"),
    "report": ("inputs",),
}


class UsageError(Exception):
    code = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def derive_seed(seed: int, stage: str) -> int:
    """Stable 32-bit seed for one stage, from the run seed and the stage name."""
    return int.from_bytes(hashlib.sha256(f"{stage}:{seed}".encode()).digest()[:4], "big")


def resolve_seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("SHX_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SHX_SEED must be an integer, got {env!r}") from None


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _type_of(f: dataclasses.Field):
    t = f.type if isinstance(f.type, str) else f.type.__name__
    return float if "float" in t else int


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="run seed (falls back to $SHX_SEED, then 0)")
    common.add_argument("--config", default=None, help="flat key=value file; command-line flags win")
    common.add_argument("--workers", type=int, default=1, help="threads for the stage (1 = reproducible)")
    common.add_argument("--manifest", default=None, help=f"manifest path (default: {MANIFEST_NAME} next to the output)")
    common.add_argument("--log-level", default="warning", choices=["debug", "info", "warning", "error"])

    parser = _Parser(prog="shx", description="Superhighway cross-domain CF pipeline.")
    parser.add_argument("--version", action="version", version=f"shx {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, metavar="command")
    p = {}

    def sub(name, help_text):
        p[name] = subs.add_parser(name, parents=[common], help=help_text, description=help_text)
        return p[name]

    def train_flags(sp):
        sp.add_argument("--model", choices=MODELS, help="embedding backend")
        for f in TRAIN_FIELDS:
            sp.add_argument(_flag(f.name), type=_type_of(f), default=None, help=f"default {f.default}")

    def eval_flags(sp):
        sp.add_argument("--domain", choices=[d.value for d in Domain], default="target")
        sp.add_argument("--k", type=int, default=10)
        sp.add_argument("--similarity", choices=["cosine", "dot"], default="cosine")
        sp.add_argument("--queries", choices=["top-degree", "all"], default="top-degree")

    s = sub("ingest", "Read two TSV domains, hold out evaluation edges, write a system file.")
    s.add_argument("--source", help="source-domain TSV")
    s.add_argument("--target", help="target-domain TSV")
    s.add_argument("--out", help="system file to write")
    s.add_argument("--weighted", action="store_true", help="keep the weight column instead of binarizing")
    s.add_argument("--skip-bad-lines", action="store_true", help="log and skip malformed lines")
    s.add_argument("--holdout", type=float, default=0.2, help="fraction of each user's items held out")
    s.add_argument("--split-domains", choices=["target", "both"], default="target",
                   help="hold out edges in the target domain only, or in both")

    s = sub("synth", "Write a synthetic source/target pair as TSV files.")
    s.add_argument("--out-dir", help="directory for source.tsv and target.tsv")
    for f in SYNTH_FIELDS:
        kind = float if f.name in ("overlap_ratio", "noise") else int
        s.add_argument(_flag(f.name), type=kind, default=None, help=f"default {f.default}")

    s = sub("build", "Build a training structure from a system file.")
    s.add_argument("--system")
    s.add_argument("--structure", choices=STRUCTURES)
    s.add_argument("--alpha", type=float, default=None, help="smoothness threshold (superhighway only)")
    s.add_argument("--beta", type=float, default=None, help="alignment scale (superhighway only)")
    s.add_argument("--cap", type=int, default=DEFAULT_CAP, help="upper bound on candidate pairs")
    s.add_argument("--out")

    s = sub("train", "Train an embedding on a structure, or pretrain+fine-tune with --transfer.")
    s.add_argument("--structure", help="structure file")
    s.add_argument("--system", help="system file (with --transfer)")
    s.add_argument("--transfer", action="store_true", help="pretrain on the source domain, fine-tune on the target")
    s.add_argument("--finetune-epochs", type=int, default=None)
    train_flags(s)
    s.add_argument("--out", help="model file (word2vec text; metadata goes to <out>.meta.json)")

    s = sub("eval", "Score a model on the held-out split stored in a system file.")
    s.add_argument("--model")
    s.add_argument("--system")
    eval_flags(s)
    s.add_argument("--out", help="JSON report")

    s = sub("grid", "Search the alpha/beta grid for superhighway structures.")
    s.add_argument("--system")
    train_flags(s)
    s.add_argument("--alphas", default=None, help="start:stop:step or a comma list (default 0.1:1.0:0.1)")
    s.add_argument("--betas", default=None, help="start:stop:step or a comma list (default 0.5:1.5:0.1)")
    s.add_argument("--cap", type=int, default=DEFAULT_CAP)
    eval_flags(s)
    s.add_argument("--out", help="JSON grid report")

    s = sub("report", "Tabulate eval and grid reports as structure x model.")
    s.add_argument("inputs", nargs="*", help="eval or grid JSON reports")
    s.add_argument("--out", default=None, help="JSON table")
    s.add_argument("--text", default=None, help="plain-text table")
    return parser, p


# -- configuration -------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    entries = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected key=value")
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _convert(action: argparse.Action, key: str, value: str):
    if isinstance(action, argparse._StoreTrueAction):
        low = value.lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise UsageError(f"config {key}: expected a boolean, got {value!r}")
        return low in ("1", "true", "yes", "on")
    parts = value.split() if action.nargs in ("*", "+") else [value]
    out = []
    for part in parts:
        try:
            v = action.type(part) if action.type else part
        except (TypeError, ValueError):
            raise UsageError(f"config {key}: invalid value {part!r}") from None
        if action.choices is not None and v not in action.choices:
            raise UsageError(f"config {key}: {v!r} is not one of {', '.join(map(str, action.choices))}")
        out.append(v)
    return out if action.nargs in ("*", "+") else out[0]


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sp = subs[args.command]
        actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
        defaults = {}
        for key, value in read_config(args.config).items():
            if key not in actions:
                raise UsageError(f"config key {key!r} is not a flag of '{args.command}'")
            defaults[key] = _convert(actions[key], key, value)
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    missing = [_flag(d) if d != "inputs" else d for d in REQUIRED[args.command] if getattr(args, d) in (None, [])]
    if missing:
        raise UsageError(f"{args.command}: missing required argument(s): {', '.join(missing)}")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    return args


# -- run bookkeeping ------------------------------------------------------------

class Run:
    """Inputs, outputs and seeds of one command, for the manifest."""

    def __init__(self, args: argparse.Namespace, argv: list[str]):
        self.args = args
        self.argv = argv
        self.seed = resolve_seed(args.seed)
        self.stage_seeds: dict[str, int] = {}
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.started = time.perf_counter()
        if args.config:
            self.inputs.append(args.config)

    def stage_seed(self, stage: str) -> int:
        self.stage_seeds[stage] = derive_seed(self.seed, stage)
        return self.stage_seeds[stage]

    def read(self, path) -> str:
        self.inputs.append(str(path))
        return str(path)

    def wrote(self, *paths) -> None:
        self.outputs.extend(str(p) for p in paths)

    def manifest_path(self) -> Path:
        if self.args.manifest:
            return Path(self.args.manifest)
        anchor = Path(self.outputs[0]) if self.outputs else Path.cwd() / "x"
        return anchor.parent / MANIFEST_NAME

    def record(self) -> dict:
        params = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("manifest", "log_level")}
        return {
            "command": self.args.command,
            "argv": self.argv,
            "parameters": params,
            "seed": self.seed,
            "stage_seeds": self.stage_seeds,
            "inputs": {p: digest(p) for p in self.inputs},
            "outputs": {p: digest(p) for p in self.outputs},
            "wall_time_s": round(time.perf_counter() - self.started, 3),
            "version": __version__,
        }

    def append_manifest(self) -> None:
        path = self.manifest_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(self.record(), sort_keys=True) + "\n")


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _train_config(args, run: Run) -> TrainConfig:
    overrides = {f.name: getattr(args, f.name) for f in TRAIN_FIELDS if getattr(args, f.name) is not None}
    return TrainConfig(**overrides, seed=run.stage_seed("train"), workers=args.workers)


def _values(spec: str | None):
    if spec is None:
        return None
    try:
        if ":" in spec:
            start, stop, step = (float(v) for v in spec.split(":"))
            return frange(start, stop, step)
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise InvalidParam(f"malformed range {spec!r}") from None


def _split_for(run: Run, system_path: str, domain: str):
    train_sys, splits = read_system(run.read(system_path))
    d = Domain(domain)
    if d not in splits:
        raise ArtifactError(f"{system_path} holds no {d.value} split; ingest with --split-domains both")
    return train_sys, splits[d]


# -- commands -----------------------------------------------------------------

def cmd_ingest(args, run: Run) -> None:
    full = ingest(run.read(args.source), run.read(args.target),
                  binarize=not args.weighted, skip_bad_lines=args.skip_bad_lines)
    train_sys, target_split = split(full, args.holdout, run.stage_seed("split-target"), Domain.TARGET)
    splits = {Domain.TARGET: target_split}
    if args.split_domains == "both":
        train_sys, splits[Domain.SOURCE] = split(train_sys, args.holdout, run.stage_seed("split-source"), Domain.SOURCE)
    write_system(args.out, train_sys, splits)
    run.wrote(args.out)
    _emit({
        "system": system_stats(full),
        "training": system_stats(train_sys),
        "eval_users": {d.value: len(s.users) for d, s in splits.items()},
    })


def cmd_synth(args, run: Run) -> None:
    fields = {f.name: getattr(args, f.name) for f in SYNTH_FIELDS if getattr(args, f.name) is not None}
    cfg = SynthConfig(**fields, seed=run.stage_seed("synth"))
    sys_, _ = generate_synthetic(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = out / "source.tsv", out / "target.tsv"
    write_tsv(sys_.source, paths[0], weights=False)
    write_tsv(sys_.target, paths[1], weights=False)
    run.wrote(*paths)
    _emit({"config": dataclasses.asdict(cfg), **system_stats(sys_)})


def cmd_build(args, run: Run) -> None:
    train_sys, _ = read_system(run.read(args.system))
    kind = StructureKind(args.structure)
    if kind is StructureKind.SUPERHIGHWAY:
        if args.alpha is None or args.beta is None:
            raise UsageError("build --structure superhighway needs --alpha and --beta")
        structure = construct_superhighway(train_sys, ConstructionParams(args.alpha, args.beta),
                                           cap=args.cap, workers=args.workers)
    elif args.alpha is not None or args.beta is not None:
        raise UsageError(f"--alpha/--beta only apply to superhighway structures, not {kind.value}")
    elif kind is StructureKind.HIGHWAY:
        structure = merge_highway(train_sys)
    else:
        structure = single_structure(train_sys)
    write_structure(args.out, structure, {"system_sha256": digest(args.system)})
    run.wrote(args.out)
    _emit({"kind": kind.value, "provenance": structure.provenance, "stats": stats(structure).to_dict()})


def cmd_train(args, run: Run) -> None:
    if args.model is None:
        raise UsageError("train: missing required argument(s): --model")
    cfg = _train_config(args, run)
    if args.transfer:
        if args.system is None or args.structure is not None:
            raise UsageError("train --transfer takes --system and no --structure")
        train_sys, _ = read_system(run.read(args.system))
        model = train_transfer(train_sys, args.model, cfg, finetune_epochs=args.finetune_epochs)
        kind, provenance = StructureKind.SINGLE.value, {"domain": Domain.TARGET.value}
    else:
        if args.structure is None:
            raise UsageError("train needs --structure (or --transfer with --system)")
        if args.finetune_epochs is not None:
            raise UsageError("--finetune-epochs only applies with --transfer")
        structure, _ = read_structure(run.read(args.structure))
        model = train(structure, args.model, cfg)
        kind, provenance = structure.kind.value, structure.provenance
    model.hyperparams = {
        **model.hyperparams,
        "structure": kind,
        "provenance": provenance,
        "pretrained": bool(args.transfer),
    }
    model.save(args.out)
    run.wrote(args.out, sidecar(Path(args.out)))
    _emit({"model": args.model, "structure": kind, "nodes": len(model.nodes), "dims": model.dims,
           "seed": model.seed})


def cmd_eval(args, run: Run) -> None:
    model = EmbeddingModel.load(run.read(args.model))
    _, eval_split = _split_for(run, args.system, args.domain)
    hp = model.hyperparams
    prov = hp.get("provenance") or {}
    config = {
        "structure": hp.get("structure"),
        "pretrained": bool(hp.get("pretrained", False)),
        "alpha": prov.get("alpha"),
        "beta": prov.get("beta"),
        "model": model.trainer_tag.value,
        "seed": model.seed,
        "domain": eval_split.domain.value,
        "similarity": args.similarity,
        "queries": args.queries,
    }
    report = evaluate(model, eval_split, k=args.k, similarity=args.similarity, queries=args.queries, config=config)
    write_json(args.out, {"schema": EVAL_SCHEMA, "model_sha256": digest(args.model), **report.to_dict()})
    run.wrote(args.out)
    label = config["structure"] + (" (pretrained)" if config["pretrained"] else "")
    print(f"MAP@{report.k}\t{eval_split.domain.value}\t{label}\t{model.trainer_tag.value}\t{report.map_at_k:.6f}")


def grid_table(cells, alphas: list[float], betas: list[float]) -> str:
    by = {(c.alpha, c.beta): c for c in cells}
    rows = ["alpha\\beta " + " ".join(f"{b:>7g}" for b in betas)]
    for a in alphas:
        vals = []
        for b in betas:
            c = by.get((a, b))
            vals.append(f"{c.score:7.4f}" if c is not None and c.ok else f"{'ERR':>7}")
        rows.append(f"{a:<10g} " + " ".join(vals))
    return "\n".join(rows)


def cmd_grid(args, run: Run) -> None:
    if args.model is None:
        raise UsageError("grid: missing required argument(s): --model")
    train_sys, eval_split = _split_for(run, args.system, args.domain)
    cfg = _train_config(args, run).replace(workers=1)
    alphas = _values(args.alphas) or frange(0.1, 1.0, 0.1)
    betas = _values(args.betas) or frange(0.5, 1.5, 0.1)
    cells = grid_search(train_sys, eval_split, args.model, cfg, alphas=alphas, betas=betas, k=args.k,
                        cap=args.cap, similarity=args.similarity, queries=args.queries, workers=args.workers)
    ok = [c for c in cells if c.ok]
    payload = {
        "schema": GRID_SCHEMA,
        "model": Backend(args.model).value,
        "domain": eval_split.domain.value,
        "k": args.k,
        "queries": args.queries,
        "seed": cfg.seed,
        "alphas": alphas,
        "betas": betas,
        "failed_cells": len(cells) - len(ok),
        "best": ({"alpha": ok[0].alpha, "beta": ok[0].beta, "map_at_k": ok[0].score} if ok else None),
        "cells": [c.to_dict() for c in cells],
    }
    write_json(args.out, payload)
    run.wrote(args.out)
    print(grid_table(cells, alphas, betas))
    if ok:
        print(f"best alpha={ok[0].alpha:g} beta={ok[0].beta:g} MAP@{args.k}={ok[0].score:.6f}")
    if len(ok) < len(cells):
        print(f"{len(cells) - len(ok)} cell(s) failed")


ROW_LABELS = {"single": "Single", "highway": "Highway", "superhighway": "Superhighway"}


def _report_entries(run: Run, paths: list[str]) -> list[dict]:
    entries = []
    for path in paths:
        d = read_json(run.read(path), (EVAL_SCHEMA, GRID_SCHEMA))
        if d["schema"] == GRID_SCHEMA:
            if d["best"] is None:
                logger.warning("%s: every grid cell failed; skipped", path)
                continue
            entries.append({"structure": "superhighway", "pretrained": False, "model": d["model"],
                            "domain": d["domain"], "k": d["k"], "map_at_k": d["best"]["map_at_k"],
                            "alpha": d["best"]["alpha"], "beta": d["best"]["beta"], "file": path})
        else:
            c = d.get("config", {})
            if c.get("structure") not in ROW_LABELS or c.get("model") not in MODELS:
                raise ArtifactError(f"{path}: report lacks a structure/model label")
            entries.append({"structure": c["structure"], "pretrained": bool(c.get("pretrained")),
                            "model": c["model"], "domain": c.get("domain", "target"), "k": d["k"],
                            "map_at_k": d["map_at_k"], "alpha": c.get("alpha"), "beta": c.get("beta"),
                            "file": path})
    return entries


def report_tables(entries: list[dict]) -> list[dict]:
    """Group runs into one structure x model table per (domain, k)."""
    tables = {}
    for e in entries:
        t = tables.setdefault((e["domain"], e["k"]), {"domain": e["domain"], "k": e["k"], "cells": {}, "pretrained": {}})
        slot = t["pretrained"] if e["pretrained"] else t["cells"]
        row = slot.setdefault(e["structure"], {})
        if e["model"] in row:
            raise InvalidParam(
                f"two runs for {e['structure']}/{e['model']} ({e['domain']}, k={e['k']}); report one per cell"
            )
        row[e["model"]] = e["map_at_k"]
    return [tables[key] for key in sorted(tables)]


def render_table(table: dict) -> str:
    """Percent-scaled table: rows are structures, columns are models."""
    pre = table["pretrained"].get("single", {})
    labels = dict(ROW_LABELS)
    if pre:
        labels["single"] = "Single (Pretrained)"
    header = [f"MAP@{table['k']} (%), {table['domain']} domain", ""]
    cols = [Backend(m).label for m in MODELS]
    grid = [["Structure", *cols]]
    for key, label in labels.items():
        cells = []
        for m in MODELS:
            v = table["cells"].get(key, {}).get(m)
            text = "-" if v is None else f"{100 * v:.2f}"
            if key == "single" and m in pre:
                text += f" ({100 * pre[m]:.2f})"
            cells.append(text)
        grid.append([label, *cells])
    widths = [max(len(r[i]) for r in grid) for i in range(len(grid[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in grid]
    return "\n".join(header[:1] + lines)


def cmd_report(args, run: Run) -> None:
    entries = _report_entries(run, args.inputs)
    tables = report_tables(entries)
    text = "\n\n".join(render_table(t) for t in tables) + "\n"
    if args.out:
        write_json(args.out, {"schema": REPORT_SCHEMA, "tables": tables, "runs": entries})
        run.wrote(args.out)
    if args.text:
        Path(args.text).write_text(text, encoding="utf-8")
        run.wrote(args.text)
    sys.stdout.write(text)


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "build": cmd_build,
    "train": cmd_train,
    "eval": cmd_eval,
    "grid": cmd_grid,
    "report": cmd_report,
}


def _fail(code: str, message: str, command: str | None) -> None:
    line = json.dumps({"error": code, "command": command, "message": " ".join(str(message).split())})
    sys.stderr.write(line + "\n")


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    try:
        args = parse_args(argv)
        command = args.command
        logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        run = Run(args, argv)
        COMMANDS[command](args, run)
        run.append_manifest()
        return 0
    except UsageError as exc:
        _fail(UsageError.code, str(exc), command)
        return 2
    except SuperhighwayError as exc:
        _fail(exc.code, str(exc), command)
        return 1
    except OSError as exc:
        _fail("IOError", f"{exc.filename or ''}: {exc.strerror or exc}".strip(": "), command)
        return 1


if __name__ == "__main__":
    sys.exit(main())
