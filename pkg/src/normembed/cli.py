"""Command-line front end.

Subcommands::

    normembed generate    'tree(3,5)' tree.edges
    normembed reconstruct 'grid(5,5)' --space linf:20 --space l2:20 --seeds 0-2 --out runs/grid
    normembed capacity    --family tree --sizes 1-5 --space linf:20 --out runs/cap
    normembed recsys      --data planted --space l1:20 --out runs/rec
    normembed linkpred    graph.edges --space l2:16 --out runs/lp

Every run-producing command writes a per-run CSV, a mean/std summary CSV and
SVG figures into ``--out``. Metrics in CSV files are percentages.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import engine, graphs, metrics, plotting, spaces, tasks
from .engine import FULL, DEFAULT_GRID, TrainConfig
from .graphs import Graph, GraphError
from .spaces import SpaceError

log = logging.getLogger("normembed")

RECONSTRUCT_HEADER = ["graph", "space", "seed", "d_avg_pct", "map_pct", "wall_time_s", "best_epoch", "status"]
CAPACITY_HEADER = ["family", "size", "nodes", "edges", "space", "seed", "d_avg_pct", "map_pct",
                   "wall_time_s", "best_epoch", "status"]
RECSYS_HEADER = ["dataset", "space", "seed", "hr10", "ndcg10", "status"]
LINKPRED_HEADER = ["dataset", "space", "seed", "auc", "status"]
HIST_HEADER = ["bin_low", "bin_high", "count"]
CONFIG_FIELDS = {f.name for f in fields(TrainConfig)}


class UsageError(ValueError):
    """Bad command-line input; reported without a traceback."""


# ---------------------------------------------------------------------------
# generator expressions


class ExprError(UsageError):
    def __init__(self, text: str, pos: int, message: str):
        super().__init__(f"{message} at position {pos}\n  {text}\n  {' ' * pos}^")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_]\w*)|(?P<int>\d+)|(?P<punct>[(),]))")


def _tokenize(text: str):
    tokens, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprError(text, pos + len(text[pos:]) - len(text[pos:].lstrip()), "unexpected character")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


_GENERATORS: dict[str, tuple[str, Callable]] = {
    # name: (argument signature, builder); 'i' = integer, 'g' = graph expression
    "tree": ("ii", graphs.gen_tree),
    "grid": ("i+", lambda *s: graphs.gen_grid(list(s))),
    "cartesian": ("gg", graphs.cartesian_product),
    "rooted": ("gg|ggi", graphs.rooted_product),
    "margulis": ("i", graphs.gen_margulis),
    "paley": ("i", graphs.gen_paley),
    "chordal": ("i", graphs.gen_chordal_cycle),
}


def parse_generator(text: str) -> Graph:
    """Build a graph from e.g. ``rooted(tree(2,4), grid(5,5), 0)``."""
    tokens = _tokenize(text)
    pos = 0

    def expect(kind, value=None):
        nonlocal pos
        tk = tokens[pos]
        if tk[0] != kind or (value is not None and tk[1] != value):
            want = repr(value) if value else kind
            got = "end of input" if tk[0] == "end" else repr(tk[1])
            raise ExprError(text, tk[2], f"expected {want}, got {got}")
        pos += 1
        return tk

    def expr():
        nonlocal pos
        _, name, at = expect("name")
        if name not in _GENERATORS:
            raise ExprError(text, at, f"unknown generator {name!r}; valid: {', '.join(_GENERATORS)}")
        expect("punct", "(")
        args = []
        while True:
            tk = tokens[pos]
            if tk[0] == "int":
                pos += 1
                args.append(("i", int(tk[1]), tk[2]))
            elif tk[0] == "name":
                args.append(("g", expr(), tk[2]))
            else:
                raise ExprError(text, tk[2], "expected an integer or a generator")
            if tokens[pos][1] == ",":
                pos += 1
                continue
            expect("punct", ")")
            break
        signature, builder = _GENERATORS[name]
        kinds = "".join(a[0] for a in args)
        ok = any(re.fullmatch(alt, kinds) for alt in signature.split("|"))
        if not ok:
            readable = signature.replace("i", "int,").replace("g", "graph,").replace(",+", "...").rstrip(",")
            raise ExprError(text, at, f"{name} takes ({readable.replace('|', ' or ')})")
        return builder(*(a[1] for a in args))

    g = expr()
    expect("end")
    return g


def is_generator_expr(source: str) -> bool:
    return re.match(r"^\s*[A-Za-z_]\w*\s*\(", source) is not None


def load_graph(source: str, weighted: bool = False) -> tuple[str, Graph]:
    """``(label, graph)`` from a generator expression or an edge-list path."""
    if is_generator_expr(source):
        return re.sub(r"\s+", "", source), parse_generator(source)
    path = Path(source)
    if not path.exists():
        raise UsageError(f"{source}: neither a generator expression nor an existing edge-list file")
    return path.stem, graphs.load_edge_list(path, weighted=weighted)


# ---------------------------------------------------------------------------
# CSV helpers


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in header])
    return path


def _parse_cell(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_csv(path) -> list[dict]:
    """Rows of a CSV written by this tool, with numbers converted back."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def aggregate(rows: Sequence[dict], keys: Sequence[str], values: Sequence[str]) -> list[dict]:
    """Mean and population std of ``values`` per ``keys`` group over rows with status ok."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), [])
        if row.get("status", "ok") == "ok":
            groups[tuple(row[k] for k in keys)].append(row)
    out = []
    for key, members in groups.items():
        summary = dict(zip(keys, key))
        summary["runs"] = len(members)
        for v in values:
            arr = np.array([float(m[v]) for m in members])
            summary[f"{v}_mean"] = float(arr.mean()) if len(arr) else math.nan
            summary[f"{v}_std"] = float(arr.std()) if len(arr) else math.nan
        out.append(summary)
    return out


def summary_header(keys: Sequence[str], values: Sequence[str]) -> list[str]:
    return list(keys) + ["runs"] + [f"{v}_{s}" for v in values for s in ("mean", "std")]


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.-]+", "_", text).strip("_")


# ---------------------------------------------------------------------------
# configuration


def parse_seeds(text: str) -> list[int]:
    """``0-4``, ``0..4`` or ``1,3,5``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(-?\d+)\s*(?:-|\.\.)\s*(-?\d+)", part)
        try:
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if hi < lo:
                    raise ValueError
                seeds.extend(range(lo, hi + 1))
            elif part:
                seeds.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("need at least one seed")
    return seeds


def _batch(value) -> int:
    if isinstance(value, str) and value.lower() in ("full", "-1"):
        return FULL
    return int(value)


def _coerce(key: str, value):
    if key == "batch_size":
        return _batch(value)
    kind = {f.name: f.type for f in fields(TrainConfig)}[key]
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    return value


def load_config(path) -> dict:
    """JSON object keyed by TrainConfig field names; list values form a grid."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = set(data) - CONFIG_FIELDS
    if unknown:
        raise UsageError(f"{path}: unknown keys {sorted(unknown)}; valid keys: {', '.join(sorted(CONFIG_FIELDS))}")
    return data


def build_plan(args, base: TrainConfig, default_grid: dict | None):
    """``(base config, grids)`` from defaults, the config file and flag overrides."""
    settings: dict = dict(default_grid or {})
    if args.config:
        settings.update(load_config(args.config))
    flags = {"learning_rate": args.lr, "batch_size": args.batch, "max_grad_norm": args.clip,
             "max_epochs": args.max_epochs, "patience": args.patience}
    settings.update({k: v for k, v in flags.items() if v is not None})
    scalars, grids = {}, {}
    for key, value in settings.items():
        if isinstance(value, (list, tuple)):
            if len(value) == 0:
                raise UsageError(f"empty grid for {key}")
            vals = [_coerce(key, v) for v in value]
            if len(vals) == 1:
                scalars[key] = vals[0]
            else:
                grids[key] = vals
        else:
            scalars[key] = _coerce(key, value)
    if "patience" not in scalars and "max_epochs" in scalars:
        scalars["patience"] = min(base.patience, scalars["max_epochs"])
    try:
        cfg = replace(base, **scalars)
        if grids:
            engine.expand_grid(grids, cfg)  # validates every grid point
    except ValueError as exc:
        raise UsageError(f"invalid training config: {exc}") from None
    return cfg, grids


def parse_spaces(texts: Sequence[str] | None) -> list[spaces.SpaceSpec]:
    if not texts:
        raise UsageError("at least one --space is required")
    return [spaces.parse_space(t) for t in texts]


# ---------------------------------------------------------------------------
# workers (top level so they pickle)


def _reconstruct_job(job: dict) -> dict:
    spec = spaces.parse_space(job["space"])
    cfg = replace(job["base"], seed=job["seed"])
    g = job["graph"]
    pairs = job["pairs"]
    try:
        if job["grids"]:
            pts, rep, _ = engine.grid_search(pairs, spec, job["grids"], cfg, graph=g)
        else:
            pts, rep = engine.train(pairs, spec, cfg, graph=g)
    except Exception as exc:  # recorded as a failed row
        log.warning("%s %s seed %d failed: %s", job["label"], job["space"], job["seed"], exc)
        return {"ok": False, "error": str(exc)}
    init = spaces.init_points(spec, pairs.num_nodes, cfg.seed)
    return {
        "ok": True,
        "points": pts,
        "report": rep,
        "hist": metrics.distortion_histogram(spec, pts, pairs),
        "hist_init": metrics.distortion_histogram(spec, init, pairs),
    }


def _run_jobs(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _fidelity_row(res: dict) -> dict:
    if not res["ok"]:
        return {"d_avg_pct": math.nan, "map_pct": math.nan, "wall_time_s": math.nan,
                "best_epoch": -1, "status": "failed"}
    rep = res["report"]
    return {"d_avg_pct": 100.0 * rep.final_d_avg, "map_pct": 100.0 * rep.final_map,
            "wall_time_s": rep.wall_time_seconds, "best_epoch": rep.best_epoch, "status": "ok"}


def _save_run(res: dict, spec_text: str, run_dir: Path, stem: str) -> None:
    if not res["ok"]:
        return
    rep = res["report"]
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / f"{stem}.report.json").write_text(json.dumps(rep.to_dict(), indent=1), encoding="utf-8")
    spaces.save_embedding(run_dir / f"{stem}.emb", spaces.parse_space(spec_text), res["points"])
    write_csv(run_dir / f"{stem}.hist.csv", HIST_HEADER,
              [dict(zip(HIST_HEADER, h)) for h in res["hist"]])
    write_csv(run_dir / f"{stem}.hist_init.csv", HIST_HEADER,
              [dict(zip(HIST_HEADER, h)) for h in res["hist_init"]])


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    label, g = load_graph(args.expr)
    graphs.write_edge_list(g, args.out_path)
    print(f"{label}: |V|={g.num_nodes} |E|={g.num_edges} -> {args.out_path}")
    return 0


def cmd_reconstruct(args) -> int:
    specs = parse_spaces(args.space)
    base, grids = build_plan(args, TrainConfig(), DEFAULT_GRID)
    label, g = load_graph(args.graph, weighted=args.weighted)
    pairs = graphs.apsp(g)
    if len(pairs) == 0:
        raise UsageError(f"{label} has no connected pairs")
    out = Path(args.out)
    jobs = [{"label": label, "graph": g, "pairs": pairs, "space": str(s), "seed": seed,
             "base": base, "grids": grids} for s in specs for seed in args.seeds]
    results = _run_jobs(_reconstruct_job, jobs, args.workers)
    rows = []
    curves: dict[str, dict[str, list]] = {}
    for job, res in zip(jobs, results):
        rows.append({"graph": label, "space": job["space"], "seed": job["seed"], **_fidelity_row(res)})
        stem = f"{slug(label)}_{slug(job['space'])}_seed{job['seed']}"
        _save_run(res, job["space"], out / "runs", stem)
        if res["ok"]:
            curves.setdefault(job["space"], {})[f"seed {job['seed']}"] = res["report"].loss_curve
            if job["seed"] == args.seeds[0]:
                plotting.histogram(res["hist"], out / "plots" / f"hist_{stem}.svg",
                                   title=f"{label} in {job['space']} (trained)")
                plotting.histogram(res["hist_init"], out / "plots" / f"hist_init_{stem}.svg",
                                   title=f"{label} in {job['space']} (initial)")
    for space, by_seed in curves.items():
        plotting.loss_curves(by_seed, out / "plots" / f"loss_{slug(label)}_{slug(space)}.svg",
                             title=f"{label} in {space}")
    write_csv(out / "results.csv", RECONSTRUCT_HEADER, rows)
    summary = aggregate(rows, ["graph", "space"], ["d_avg_pct", "map_pct", "wall_time_s"])
    write_csv(out / "summary.csv", summary_header(["graph", "space"], ["d_avg_pct", "map_pct", "wall_time_s"]),
              summary)
    _print_summary(summary, ["d_avg_pct", "map_pct"])
    return _exit_code(rows)


def capacity_graphs(family: str, sizes: Sequence[int], data_dir: Path):
    if not sizes:
        raise UsageError("empty size range")
    out = []
    for size in sizes:
        if family == "tree":
            if size < 1:
                raise UsageError("tree heights start at 1")
            out.append((size, graphs.gen_tree(3, size)))
        elif family == "grid":
            if size < 2:
                raise UsageError("grid sides start at 2")
            out.append((size, graphs.gen_grid([size] * 4)))
        else:
            path = data_dir / f"fullerene_{size}.edges"
            if not path.exists():
                raise UsageError(f"missing {path}; fullerene files are named fullerene_<n>.edges")
            out.append((size, graphs.load_edge_list(path)))
    return out


def cmd_capacity(args) -> int:
    specs = parse_spaces(args.space)
    base, grids = build_plan(args, TrainConfig(), DEFAULT_GRID)
    sizes = args.sizes if args.sizes is not None else {"tree": list(range(1, 8)), "grid": list(range(2, 8)),
                                                        "fullerene": []}[args.family]
    family_graphs = capacity_graphs(args.family, sizes, Path(args.data_dir))
    out = Path(args.out)
    jobs, meta = [], []
    for size, g in family_graphs:
        pairs = graphs.apsp(g)
        label = f"{args.family}{size}"
        for s in specs:
            for seed in args.seeds:
                jobs.append({"label": label, "graph": g, "pairs": pairs, "space": str(s), "seed": seed,
                             "base": base, "grids": grids})
                meta.append((size, g))
    results = _run_jobs(_reconstruct_job, jobs, args.workers)
    rows = []
    for job, (size, g), res in zip(jobs, meta, results):
        row = {"family": args.family, "size": size, "nodes": g.num_nodes, "edges": g.num_edges,
               "space": job["space"], "seed": job["seed"], **_fidelity_row(res)}
        rows.append(row)
        _save_run(res, job["space"], out / "runs", f"{job['label']}_{slug(job['space'])}_seed{job['seed']}")
    write_csv(out / "capacity.csv", CAPACITY_HEADER, rows)
    keys = ["family", "size", "space"]
    vals = ["d_avg_pct", "map_pct", "wall_time_s"]
    summary = aggregate(rows, keys, vals)
    write_csv(out / "capacity_summary.csv", summary_header(keys, vals), summary)
    for value, name, log_y in (("d_avg_pct", "capacity", False), ("wall_time_s", "timing", True)):
        series: dict[str, list] = {}
        for r in summary:
            if r["runs"]:
                series.setdefault(r["space"], []).append((r["size"], r[f"{value}_mean"], r[f"{value}_std"]))
        plotting.series_plot(series, out / "plots" / f"{name}_{args.family}.svg",
                             xlabel="height" if args.family == "tree" else "size", ylabel=value,
                             title=f"{args.family}: {value}", log_y=log_y)
    _print_summary(summary, vals)
    return _exit_code(rows)


def _recsys_job(job: dict) -> dict:
    try:
        _, res = tasks.train_recsys(job["data"], spaces.parse_space(job["space"]), replace(job["cfg"], seed=job["seed"]),
                                    loss_kind=job["loss"])
    except Exception as exc:
        log.warning("recsys %s seed %d failed: %s", job["space"], job["seed"], exc)
        return {"hr10": math.nan, "ndcg10": math.nan, "status": "failed"}
    return {"hr10": 100.0 * res["hr10"], "ndcg10": 100.0 * res["ndcg10"], "status": "ok"}


def cmd_recsys(args) -> int:
    specs = parse_spaces(args.space)
    cfg, grids = build_plan(args, tasks.recsys_config(), None)
    if grids:
        raise UsageError("recsys takes single hyperparameter values, not grids")
    if args.data == "planted":
        label, data = "planted", tasks.planted_blocks(seed=0)
    else:
        label = Path(args.data).name
        try:
            data = tasks.load_interactions(args.data)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from None
    jobs = [{"data": data, "space": str(s), "seed": seed, "cfg": cfg, "loss": args.loss}
            for s in specs for seed in args.seeds]
    results = _run_jobs(_recsys_job, jobs, args.workers)
    rows = [{"dataset": label, "space": j["space"], "seed": j["seed"], **r} for j, r in zip(jobs, results)]
    out = Path(args.out)
    write_csv(out / "recsys.csv", RECSYS_HEADER, rows)
    summary = aggregate(rows, ["dataset", "space"], ["hr10", "ndcg10"])
    write_csv(out / "recsys_summary.csv", summary_header(["dataset", "space"], ["hr10", "ndcg10"]), summary)
    _print_summary(summary, ["hr10", "ndcg10"])
    return _exit_code(rows)


def _linkpred_job(job: dict) -> dict:
    g = job["graph"]
    try:
        split = tasks.make_link_split(g, seed=job["seed"])
        _, auc = tasks.train_linkpred(g, split, spaces.parse_space(job["space"]), replace(job["cfg"], seed=job["seed"]))
    except Exception as exc:
        log.warning("linkpred %s seed %d failed: %s", job["space"], job["seed"], exc)
        return {"auc": math.nan, "status": "failed"}
    return {"auc": 100.0 * auc, "status": "ok"}


def cmd_linkpred(args) -> int:
    specs = parse_spaces(args.space)
    cfg, grids = build_plan(args, TrainConfig(learning_rate=0.01, max_epochs=1000, patience=200), None)
    if grids:
        raise UsageError("linkpred takes single hyperparameter values, not grids")
    label, g = load_graph(args.graph)
    jobs = [{"graph": g, "space": str(s), "seed": seed, "cfg": cfg} for s in specs for seed in args.seeds]
    results = _run_jobs(_linkpred_job, jobs, args.workers)
    rows = [{"dataset": label, "space": j["space"], "seed": j["seed"], **r} for j, r in zip(jobs, results)]
    out = Path(args.out)
    write_csv(out / "linkpred.csv", LINKPRED_HEADER, rows)
    summary = aggregate(rows, ["dataset", "space"], ["auc"])
    write_csv(out / "linkpred_summary.csv", summary_header(["dataset", "space"], ["auc"]), summary)
    _print_summary(summary, ["auc"])
    return _exit_code(rows)


def _print_summary(summary: list[dict], values: Sequence[str]) -> None:
    for row in summary:
        head = " ".join(str(v) for k, v in row.items() if not k.endswith(("_mean", "_std")) and k != "runs")
        cells = ", ".join(f"{v} {row[f'{v}_mean']:.2f}±{row[f'{v}_std']:.2f}" for v in values)
        print(f"{head} [{row['runs']} runs]: {cells}")


def _exit_code(rows: Sequence[dict]) -> int:
    return 0 if any(r["status"] == "ok" for r in rows) else 1


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, default_seeds: str) -> None:
    p.add_argument("--space", action="append", help="space spec such as linf:20 or l1:10*poincare:10; repeatable")
    p.add_argument("--seeds", type=parse_seeds, default=parse_seeds(default_seeds),
                   help=f"seed list, e.g. 0-4 or 1,3 (default {default_seeds})")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", help="JSON file keyed by training-config field names; lists form a grid")
    p.add_argument("--workers", type=int, default=1, help="parallel runs (processes)")
    p.add_argument("--lr", type=float, nargs="+", help="learning rate(s)")
    p.add_argument("--batch", type=_batch, nargs="+", help="batch size(s); 'full' uses every pair")
    p.add_argument("--clip", type=float, nargs="+", help="maximum gradient norm(s)")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normembed", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a generated graph as an edge list")
    p.add_argument("expr", help="e.g. tree(3,5), grid(5,5,5,5), rooted(tree(2,4),grid(5,5),0)")
    p.add_argument("out_path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("reconstruct", help="embed one graph per space and seed, with grid search")
    p.add_argument("graph", help="generator expression or edge-list path")
    p.add_argument("--weighted", action="store_true", help="edge list has a weight column")
    _common(p, "0-4")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("capacity", help="distortion and runtime against graph size")
    p.add_argument("--family", choices=["tree", "grid", "fullerene"], required=True)
    p.add_argument("--sizes", type=lambda t: parse_seeds(t) if t.strip() else [],
                   help="tree heights, 4D grid sides or fullerene atom counts, e.g. 1-5")
    p.add_argument("--data-dir", default="data/fullerenes")
    _common(p, "0-2")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("recsys", help="metric recommender on split interaction files")
    p.add_argument("--data", required=True, help="split-file prefix (<prefix>.train.tsv ...) or 'planted'")
    p.add_argument("--loss", choices=["hinge", "bce"], default="hinge")
    _common(p, "0-4")
    p.set_defaults(func=cmd_recsys)

    p = sub.add_parser("linkpred", help="shallow Fermi-Dirac link prediction")
    p.add_argument("graph", help="generator expression or edge-list path")
    _common(p, "0-4")
    p.set_defaults(func=cmd_linkpred)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (UsageError, SpaceError, GraphError) as exc:
        print(f"normembed {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
