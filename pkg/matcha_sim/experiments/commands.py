"""
matcha-sim CLI Command Handlers
decompose, sweep, train, compare, usage; each returns a process exit code
"""

import logging
from pathlib import Path
from typing import List, Optional

from matcha_sim.config import get_config
from matcha_sim.constants import CsvColumns, ExitCodes, FileNames, RunStatus
from matcha_sim.core.graph import Topology, load_topology
from matcha_sim.experiments.config import ExperimentConfig
from matcha_sim.experiments.pipeline import decomposition_report, run_experiment, sweep_rows, write_compare
from matcha_sim.utils.error_reporter import handle_failure
from matcha_sim.utils.errors import InvalidConfig
from matcha_sim.utils.io import write_csv, write_json

logger = logging.getLogger(__name__)

DOCS_DIR = Path(__file__).parent.parent.parent / "docs" / "usage"


def resolve_config(config_path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """
    Load the experiment config (or defaults) and apply flag overrides

    @param {str} config_path - JSON config file
    @returns {ExperimentConfig} Validated configuration
    """
    cfg = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
    return cfg.with_overrides(**overrides)


def resolve_topology(graph_path: Optional[str], cfg: Optional[ExperimentConfig],
                     seed: Optional[int] = None) -> Topology:
    """
    --graph wins over the config's graph section

    @param {str} graph_path - Graph file
    @param {ExperimentConfig} cfg - Config whose graph section is built otherwise
    @param {int} seed - Generator seed replacing graph.seed (ignored for graph files)
    @returns {Topology} Base graph
    """
    if graph_path:
        if seed is not None:
            logger.warning(f"--seed {seed} ignored: {graph_path} is a graph file, not a generator")
        return load_topology(graph_path)
    if cfg is None:
        raise InvalidConfig("no graph given: pass --graph or --config")
    return cfg.with_graph_seed(seed).graph.build()


def _output_dir(out: Optional[str], cfg: Optional[ExperimentConfig]) -> Path:
    path = Path(out or (cfg.output_dir if cfg else get_config().output_dir))
    path.mkdir(parents=True, exist_ok=True)
    return path


@handle_failure("decompose")
def cmd_decompose(graph: Optional[str] = None, out: Optional[str] = None,
                  config: Optional[str] = None, seed: Optional[int] = None) -> int:
    """
    Write the matching decomposition and its summary

    @param {str} graph - Graph file
    @param {str} out - Output directory
    @param {str} config - Experiment config (graph section used when --graph is absent)
    @param {int} seed - Graph generator seed override
    @returns {int} Exit code
    """
    cfg = resolve_config(config) if config else None
    topology = resolve_topology(graph, cfg, seed)
    decomp, summary = decomposition_report(topology)
    out_dir = _output_dir(out, cfg)

    write_json(out_dir / FileNames.DECOMPOSITION, decomp.to_json_dict())
    write_json(out_dir / FileNames.DECOMPOSITION_SUMMARY, summary)

    print("🧩 Matching decomposition")
    print(f"   m={summary['m']}  |E|={summary['edges']}  Delta={summary['max_degree']}  M={summary['M']}")
    if not summary['connected']:
        print(f"⚠️  Graph is disconnected ({summary['components']} components)")
    if summary['problems']:
        for problem in summary['problems']:
            print(f"❌ {problem}")
        return ExitCodes.NUMERICAL_FAILURE
    print(f"✅ Wrote {out_dir / FileNames.DECOMPOSITION}")
    return ExitCodes.SUCCESS


@handle_failure("sweep")
def cmd_sweep(graph: Optional[str] = None, budgets: Optional[List[float]] = None,
              out: Optional[str] = None, config: Optional[str] = None, seed: Optional[int] = None) -> int:
    """
    Spectral norm of MATCHA, periodic and vanilla DecenSGD across budgets

    @returns {int} Exit code
    """
    cfg = resolve_config(config, budgets=budgets)
    topology = resolve_topology(graph, cfg, seed)
    decomp, _ = decomposition_report(topology)
    rows = sweep_rows(decomp, cfg.budgets, cfg.optimizer, cfg.comm_time)
    out_dir = _output_dir(out, cfg)
    path = write_csv(out_dir / FileNames.SWEEP, rows, CsvColumns.SWEEP)

    print("📉 Budget sweep")
    for row in rows:
        print(f"   C_b={row['C_b']:<6g} rho_matcha={row['rho_matcha']:.4f} "
              f"rho_periodic={row['rho_periodic']:.4f} rho_vanilla={row['rho_vanilla']:.4f}")
    print(f"✅ Wrote {path}")
    return ExitCodes.SUCCESS


@handle_failure("train")
def cmd_train(config: Optional[str] = None, graph: Optional[str] = None, seed: Optional[int] = None,
              out: Optional[str] = None, workers: Optional[int] = None) -> int:
    """
    Run every (policy, budget, seed) of the experiment

    --seed replaces the config's seed list with that single run seed.

    @returns {int} 0, or 3 when any run diverged (artifacts are still written)
    """
    cfg = resolve_config(config, seeds=[seed] if seed is not None else None)
    topology = resolve_topology(graph, cfg)
    out_dir = _output_dir(out, cfg)
    manifest = run_experiment(cfg, topology, out_dir, workers=workers or get_config().workers)

    diverged = [r for r in manifest['runs'] if r['status'] == RunStatus.DIVERGED]
    print(f"🏃 Trained {len(manifest['runs'])} runs -> {out_dir / FileNames.MANIFEST}")
    for entry in manifest['runs']:
        print(f"   {entry['label']:<32} {entry['status']:<9} final loss {entry['final_loss']:.6g}")
    if diverged:
        print(f"❌ {len(diverged)} run(s) diverged")
        return ExitCodes.NUMERICAL_FAILURE
    return ExitCodes.SUCCESS


@handle_failure("compare")
def cmd_compare(manifest: str, out: Optional[str] = None, target: Optional[float] = None) -> int:
    """
    Time-to-target-loss summary of a training manifest

    @param {str} manifest - manifest.json written by train
    @param {str} out - Output directory (default: next to the manifest)
    @param {float} target - Target loss (default: manifest value, then worst vanilla final loss)
    @returns {int} Exit code
    """
    manifest_path = Path(manifest)
    out_dir = _output_dir(out or str(manifest_path.parent), None)
    path, rows = write_compare(manifest_path, out_dir, target)

    print("⏱️  Time to target")
    for row in rows:
        ratio = row['ratio_vs_vanilla']
        shown = f"{ratio:.3f}" if ratio is not None else "-"
        print(f"   {row['policy']:<9} C_b={row['C_b']:<6g} seed={row['seed']:<4} {row['status']:<18} ratio {shown}")
    print(f"✅ Wrote {path}")
    return ExitCodes.SUCCESS


def handle_usage() -> int:
    """Print the usage guide shipped in docs/usage"""
    usage_path = DOCS_DIR / "readme.md"
    if not usage_path.exists():
        print("❌ Usage documentation not found at expected location")
        print(f"   Expected: {usage_path}")
        return ExitCodes.FAILURE

    print("🧩 matcha-sim Usage")
    print("=" * 50)
    in_code_block = False
    for line in usage_path.read_text(encoding='utf-8').split('\n'):
        if line.startswith('```'):
            in_code_block = not in_code_block
            print("─" * 40)
        elif in_code_block:
            print(f"   {line}")
        elif line.startswith('# '):
            print(f"\n🔥 {line[2:]}")
        elif line.startswith('## '):
            print(f"\n💠 {line[3:]}")
        elif line.startswith('- '):
            print(f"  • {line[2:]}")
        else:
            print(line)

    print("\n📁 Full documentation files:")
    for doc_file in sorted(DOCS_DIR.glob("*.md")):
        if doc_file.name != "readme.md":
            print(f"   • {doc_file.name}")
    return ExitCodes.SUCCESS
