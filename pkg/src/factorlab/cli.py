"""Command-line entry point: gen, ingest, run, report, graph, simk, plot, serve.

Exit codes: 0 success, 1 usage, 2 validation (bad recipes, unknown panels,
malformed inputs), 3 runtime (aborted steps, I/O failures). Only the
generator consumes randomness, and it honors --seed; everything else is
deterministic by construction.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import panel as panelio
from . import evalharness, pipeline, plotting, report, synthetic, transforms
from .errors import EngineError, RecipeError, StepExecutionError
from .panel import Panel, PanelRegistry
from .toolserver import ToolServer

log = logging.getLogger("factorlab")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

SIZE_TERCILES = [100.0 / 3.0, 200.0 / 3.0]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage is 1 here
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _fail(code: int, message: str):
    sys.stderr.write(f"error: {message}\n")
    sys.exit(code)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="factorlab",
                     description="Deterministic panel-data factor research engine")
    parser.add_argument("--data-dir", default=".", help="input directory")
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="generator seed")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write synthetic monthly.csv and annual.csv")
    gen.add_argument("--n-assets", type=int, default=50)
    gen.add_argument("--n-months", type=int, default=120)
    gen.add_argument("--start", default="1990-01")
    gen.add_argument("--fraction-nyse", type=float, default=0.4)
    gen.add_argument("--mom-spread", type=float, default=0.0)
    gen.add_argument("--val-spread", type=float, default=0.0)
    gen.add_argument("--idio-vol", type=float, default=0.05)
    gen.add_argument("--beta-sd", type=float, default=0.2)
    gen.add_argument("--missing-ret-rate", type=float, default=0.0)
    gen.add_argument("--small-only", action="store_true",
                     help="restrict the momentum drift to below-median caps")

    ing = sub.add_parser("ingest", help="ingest CSVs into saved source panels")
    ing.add_argument("--monthly", default="monthly.csv")
    ing.add_argument("--annual", default="annual.csv")

    run = sub.add_parser("run", help="validate and execute a recipe")
    run.add_argument("recipe", help="recipe path or shipped name (hml, jkp_momentum, ...)")
    run.add_argument("--monthly", default="monthly.csv")
    run.add_argument("--annual", default="annual.csv")
    run.add_argument("--param", action="append", default=[],
                     metavar="KEY=VALUE", help="override a recipe parameter")
    run.add_argument("--dry-run", action="store_true",
                     help="validate and print the step plan without executing")

    rep = sub.add_parser("report", help="build the standardized diagnostics report")
    rep.add_argument("--spread", required=True, help="saved spread panel id")
    rep.add_argument("--characteristic", required=True)
    rep.add_argument("--cap", default="CAP")
    rep.add_argument("--size-bins", default=None,
                     help="saved size-bin panel id; default: cap terciles")
    rep.add_argument("--model", action="append", default=[],
                     metavar="NAME=ID[,ID...]", help="benchmark model factor ids")
    rep.add_argument("--stratify-recipe", default=None)
    rep.add_argument("--stratify-output", default=None)
    rep.add_argument("--weights", default=None,
                     help="weight panel id for the turnover statistic")

    gra = sub.add_parser("graph", help="export a panel's provenance graph")
    gra.add_argument("panel_id")
    gra.add_argument("--format", choices=["dot", "json"], default="dot")

    sim = sub.add_parser("simk", help="Sim@k table from an evaluation manifest")
    sim.add_argument("manifest")
    sim.add_argument("--k", type=int, nargs="+", default=[1, 2, 5])
    sim.add_argument("--failure-score", type=float,
                     default=evalharness.FAILED_ATTEMPT_SCORE)

    plo = sub.add_parser("plot", help="SVG scatter of a series against a benchmark")
    plo.add_argument("panel_id")
    plo.add_argument("benchmark_id")

    sub.add_parser("serve", help="JSON-RPC 2.0 tool server on stdio")
    return parser


# -- command bodies -------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        config = synthetic.GeneratorConfig(
            seed=args.seed if args.seed is not None else 42,
            n_assets=args.n_assets,
            n_months=args.n_months,
            start_month=args.start,
            fraction_nyse=args.fraction_nyse,
            mom_spread=args.mom_spread,
            val_spread=args.val_spread,
            idio_vol=args.idio_vol,
            beta_sd=args.beta_sd,
            missing_ret_rate=args.missing_ret_rate,
            mom_spread_small_only=args.small_only,
        )
        config.validate()
    except EngineError as exc:
        _fail(EXIT_USAGE, str(exc))
    try:
        paths = synthetic.generate_synthetic(config, args.out_dir)
    except OSError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    for path in paths:
        print(path)
    return EXIT_OK


def _ingest_sources(args):
    from .ingest import ingest_dataset

    monthly = Path(args.data_dir) / args.monthly
    annual = Path(args.data_dir) / args.annual
    for path in (monthly, annual):
        if not path.exists():
            _fail(EXIT_VALIDATION, f"input file not found: {path}")
    return ingest_dataset(monthly, annual)


def cmd_ingest(args) -> int:
    try:
        result = _ingest_sources(args)
        for name in sorted(result.panels):
            for path in panelio.save(result.panels[name], args.out_dir):
                print(path)
    except EngineError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    print(f"rows={result.n_rows} removed={json.dumps(result.removed, sort_keys=True)} "
          f"skipped={result.skipped_rows}")
    return EXIT_OK


def _parse_overrides(pairs) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            _fail(EXIT_USAGE, f"--param expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def cmd_run(args) -> int:
    try:
        spec = pipeline.load_recipe(args.recipe, overrides=_parse_overrides(args.param))
    except (RecipeError, EngineError) as exc:
        _fail(EXIT_VALIDATION, str(exc))

    if args.dry_run:
        print(f"recipe {spec.name}: {len(spec.steps)} steps, sources {list(spec.sources)}")
        for i, step in enumerate(spec.steps):
            print(f"  {i:3d}  {step.op}({', '.join(step.inputs)}) -> {step.output}")
        return EXIT_OK

    ingested = _ingest_sources(args)
    missing = [s for s in spec.sources if s not in ingested.panels]
    if missing:
        _fail(EXIT_VALIDATION, f"recipe sources missing from ingested data: {missing}")

    registry = PanelRegistry()
    sources = {name: ingested.panels[name] for name in spec.sources}
    try:
        registry, result = pipeline.run_recipe(spec, sources, registry=registry)
    except StepExecutionError as exc:
        _save_run_outputs(registry, spec.sources, exc.outputs, args.out_dir)
        _fail(EXIT_RUNTIME, str(exc))
    except EngineError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    try:
        _save_run_outputs(registry, spec.sources, result.outputs, args.out_dir)
    except OSError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    run_log = {
        "recipe": spec.name,
        "params": spec.params,
        "sources": list(spec.sources),
        "outputs": result.outputs,
        "steps": result.log,
        "flags": result.flags,
        "ingest_removed": ingested.removed,
    }
    log_path = Path(args.out_dir) / "run_log.json"
    log_path.write_text(json.dumps(run_log, sort_keys=True, indent=2) + "\n")
    print(log_path)
    for name, panel_id in result.outputs.items():
        print(f"{name} -> {panel_id}")
    return EXIT_OK


def _save_run_outputs(registry, sources, outputs, out_dir):
    for name in sources:
        if name in registry:
            panelio.save(registry.get(name), out_dir)
    for panel_id in outputs.values():
        panelio.save(registry.get(panel_id), out_dir)


def _load_data_registry(args):
    try:
        registry = panelio.load_registry(args.data_dir)
    except EngineError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    if not len(registry):
        _fail(EXIT_VALIDATION, f"no saved panels found in {args.data_dir}")
    return registry


def cmd_report(args) -> int:
    registry = _load_data_registry(args)

    def get_panel(panel_id: str) -> Panel:
        if panel_id not in registry:
            _fail(EXIT_VALIDATION, f"panel {panel_id!r} not found in {args.data_dir}")
        return registry.get(panel_id)

    spread_panel = get_panel(args.spread)
    try:
        spread = spread_panel.to_series(name=args.spread)
    except EngineError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    char = get_panel(args.characteristic)
    cap = get_panel(args.cap)

    if args.size_bins:
        size_bins = get_panel(args.size_bins)
    else:
        universe = registry.get("NYSE") if "NYSE" in registry else None
        bins = transforms.quantile_bins(cap, SIZE_TERCILES, universe=universe)
        registry.register(bins, name="SIZE_TERCILES_AUTO")
        size_bins = registry.get("SIZE_TERCILES_AUTO")

    if not args.model:
        _fail(EXIT_USAGE, "at least one --model NAME=ID[,ID...] is required")
    models = {}
    for entry in args.model:
        if "=" not in entry:
            _fail(EXIT_USAGE, f"--model expects NAME=ID[,ID...], got {entry!r}")
        name, ids = entry.split("=", 1)
        models[name] = [get_panel(i).to_series(name=i) for i in ids.split(",") if i]

    builder = None
    if args.stratify_recipe:
        try:
            spec = pipeline.load_recipe(args.stratify_recipe)
            output = args.stratify_output or spec.steps[-1].output
            sources = {name: get_panel(name) for name in spec.sources}
            builder = pipeline.make_spread_builder(spec, sources, output)
        except (RecipeError, EngineError) as exc:
            _fail(EXIT_VALIDATION, str(exc))

    weights = get_panel(args.weights) if args.weights else None

    try:
        rep = report.build_report(
            spread, char, cap, size_bins, models,
            spread_builder=builder,
            weight_panel=weights,
            recipe_reference=args.stratify_recipe or "",
        )
    except EngineError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    md_path = out / f"report_{args.spread}.md"
    json_path = out / f"report_{args.spread}.json"
    md_path.write_text(report.render_markdown(rep))
    json_path.write_text(report.render_json(rep))
    print(md_path)
    print(json_path)
    return EXIT_OK


def cmd_graph(args) -> int:
    registry = _load_data_registry(args)
    if args.panel_id not in registry:
        _fail(EXIT_VALIDATION, f"panel {args.panel_id!r} not found in {args.data_dir}")
    doc, dot = panelio.export_graph(registry, args.panel_id)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "dot":
        path = out / f"{args.panel_id}.dot"
        path.write_text(dot)
    else:
        path = out / f"{args.panel_id}.graph.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(path)
    return EXIT_OK


def cmd_simk(args) -> int:
    ks = sorted(set(args.k))
    if any(k < 1 for k in ks):
        _fail(EXIT_USAGE, "k values must be >= 1")
    try:
        table = evalharness.evaluate_manifest(args.manifest, ks,
                                              failure_score=args.failure_score)
    except EngineError as exc:
        if "outside 1.." in str(exc):
            _fail(EXIT_USAGE, str(exc))
        _fail(EXIT_VALIDATION, str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "simk.json"
    json_path.write_text(json.dumps(table, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(evalharness.format_simk_table(table))
    print(json_path)
    return EXIT_OK


def cmd_plot(args) -> int:
    registry = _load_data_registry(args)
    for pid in (args.panel_id, args.benchmark_id):
        if pid not in registry:
            _fail(EXIT_VALIDATION, f"panel {pid!r} not found in {args.data_dir}")
    try:
        y, x = evalharness.align(registry.get(args.panel_id),
                                 registry.get(args.benchmark_id))
    except EngineError as exc:
        _fail(EXIT_RUNTIME, str(exc))
    svg = plotting.scatter_svg(
        x, y,
        x_label=f"benchmark: {args.benchmark_id}",
        y_label=f"factor: {args.panel_id}",
        title=f"{args.panel_id} vs {args.benchmark_id}",
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.panel_id}_vs_{args.benchmark_id}.svg"
    path.write_text(svg)
    print(path)
    return EXIT_OK


def cmd_serve(args) -> int:
    ToolServer().serve()
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "ingest": cmd_ingest,
    "run": cmd_run,
    "report": cmd_report,
    "graph": cmd_graph,
    "simk": cmd_simk,
    "plot": cmd_plot,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
