"""Run an experiment grid and write its artifacts.

Layout of an output directory::

    manifest.json            config, trial index, per-trial summaries
    records/*.jsonl          one file per trial, one line per episode
    milestones.csv           cross-trial milestone means
    welch.csv                Welch tests for every agent pair at every milestone
    summary.csv              auc / best_window / final_window per trial
    ratios.csv               score ratio of each setting to the first (several settings only)
    curves/*.svg             one learning-curve plot per (agent, game)

Everything in it is a pure function of the config, so reruns are
byte-identical whatever the number of worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import ConfigError, ExperimentConfig
from .plotting import emit_curves
from .protocol import TrialRecord, aggregate, boundary_index, milestone_score, run_trial, summary_metrics
from .stats import DegenerateSampleError, welch_t_test

MANIFEST = "manifest.json"
RECORDS = "records"
MILESTONE_COLUMNS = ["game", "agent", "milestone_frames", "n_trials", "mean", "std", "k"]
WELCH_COLUMNS = ["game", "agent_a", "agent_b", "milestone", "t", "df", "p"]
SUMMARY_COLUMNS = ["game", "agent", "trial", "auc", "best_window", "final_window"]
RATIO_COLUMNS = ["game", "agent", "setting", "reference_setting", "milestone_frames", "ratio"]

EXIT_OK, EXIT_INVALID, EXIT_TRIAL_FAILED = 0, 1, 2


def stable_seed(base_seed: int, agent: str, game: str, trial: int) -> int:
    """64-bit seed from blake2b over the JSON text of the quadruple."""
    text = json.dumps([base_seed, agent, game, trial], separators=(",", ":"))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def safe_name(text: str) -> str:
    return text.replace(":", "-")


@dataclass(frozen=True)
class Cell:
    label: str
    agent: str
    setting: str
    game: str
    trial: int
    seed: int
    agent_spec: dict
    stack: tuple

    @property
    def filename(self) -> str:
        return f"{self.label}__{safe_name(self.game)}__{self.trial}.jsonl"


def agent_label(name: str, setting: str, n_settings: int) -> str:
    return name if n_settings == 1 else f"{name}@{setting}"


def build_cells(cfg: ExperimentConfig) -> List[Cell]:
    """Grid in config order. The seed ignores the setting, so settings are paired."""
    cells = []
    for game in cfg.games:
        for entry in cfg.agents:
            for setting, stack in cfg.stochasticity.items():
                label = agent_label(entry.name, setting, len(cfg.stochasticity))
                for trial in range(cfg.trials_per_cell):
                    seed = stable_seed(cfg.base_seed, entry.name, game, trial)
                    cells.append(Cell(label, entry.name, setting, game, trial, seed,
                                      entry.spec(), tuple(stack)))
    return cells


def _run_cell(args) -> TrialRecord:
    cell, cfg, weights_dir = args
    return run_trial(cell.agent_spec, cell.game, cfg.frame_budget, cfg.milestones, cell.seed,
                     list(cell.stack), trial=cell.trial, agent_label=cell.label,
                     max_episode_frames=cfg.max_episode_frames,
                     terminate_on_life_loss=cfg.terminate_on_life_loss, weights_dir=weights_dir)


# ---------------------------------------------------------------- run ledger

def _read_ledger(path) -> List[dict]:
    p = Path(path)
    if not p.exists():
        return []
    return [json.loads(line) for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def check_ledger(cfg: ExperimentConfig) -> None:
    """Refuse a final run when an earlier search run touched a test game."""
    if cfg.run_ledger is None or cfg.purpose != "final":
        return
    test = set(cfg.test_games)
    for entry in _read_ledger(cfg.run_ledger):
        if entry.get("purpose") == "search":
            touched = test & set(entry.get("games", []))
            if touched:
                raise ConfigError(f"hyperparameter search already ran on test games {sorted(touched)}; "
                                  "refusing to produce a final report")


def append_ledger(cfg: ExperimentConfig) -> None:
    if cfg.run_ledger is None:
        return
    entry = {"purpose": cfg.purpose, "games": list(cfg.games), "base_seed": cfg.base_seed,
             "agents": [a.name for a in cfg.agents]}
    with open(cfg.run_ledger, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


# ------------------------------------------------------------------- writing

def _jsonable(value):
    if hasattr(value, "item"):
        return value.item()
    return value


def _record_jsonl(record: TrialRecord) -> str:
    return "".join(json.dumps({k: _jsonable(v) for k, v in row.items()}) + "\n"
                   for row in record.to_rows())


def _num(x) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        return "nan"
    return repr(float(x))


def _csv(rows: Sequence[Sequence], header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _manifest_config(cfg: ExperimentConfig) -> dict:
    data = cfg.to_dict()
    data.pop("output_dir", None)
    data.pop("run_ledger", None)
    return data


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1, log=None) -> int:
    """Run the whole grid; returns the process exit code."""
    out = Path(out_dir)
    check_ledger(cfg)
    cells = build_cells(cfg)
    weights_dir = None
    if cfg.dump_weights:
        weights_dir = out / "weights"
        weights_dir.mkdir(parents=True, exist_ok=True)
    work = [(cell, cfg, weights_dir) for cell in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, work))
    else:
        records = [_run_cell(w) for w in work]

    trials = []
    for cell, record in zip(cells, records):
        _write(out / RECORDS / cell.filename, _record_jsonl(record))
        entry = {
            "file": cell.filename, "agent": cell.label, "game": cell.game, "trial": cell.trial,
            "setting": cell.setting, "seed": cell.seed, "episodes": len(record.episodes),
            "frames": record.total_frames, "failure": record.failure,
            "milestone_stats": {str(m): s for m, s in sorted(record.milestone_stats.items())},
        }
        trials.append(entry)
        if record.failure and log:
            log(f"trial failed: {cell.label} {cell.game} #{cell.trial}: {record.failure}")
    manifest = {
        "format": 1,
        "config": _manifest_config(cfg),
        "settings": list(cfg.stochasticity),
        "agents": [agent_label(a.name, s, len(cfg.stochasticity))
                   for a in cfg.agents for s in cfg.stochasticity],
        "notes": {"best_window": "maximum over many noisy windows; biased upward"},
        "trials": trials,
    }
    _write(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    append_ledger(cfg)
    write_reports(out)
    return EXIT_TRIAL_FAILED if any(r.failure for r in records) else EXIT_OK


# ------------------------------------------------------------------ reporting

def find_manifest(path) -> Path:
    p = Path(path)
    for candidate in (p / MANIFEST, p.parent / MANIFEST):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"no {MANIFEST} in {p} or its parent")


def load_records(out: Path, manifest: dict) -> List[TrialRecord]:
    records = []
    for t in manifest["trials"]:
        path = out / RECORDS / t["file"]
        rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]
        rec = TrialRecord.from_rows(rows, t["agent"], t["game"], t["trial"], t["seed"])
        rec.failure = t.get("failure")
        rec.check()
        records.append(rec)
    return records


def _reached(records, milestone):
    return [r for r in records if boundary_index(r, milestone) is not None]


def write_reports(path) -> Dict[str, Path]:
    """(Re)build every CSV and SVG from the JSONL records and the manifest."""
    manifest_path = find_manifest(path)
    out = manifest_path.parent
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cfg = manifest["config"]
    k, milestones = cfg["k"], cfg["milestones"]
    games, agents, settings = cfg["games"], manifest["agents"], manifest["settings"]
    records = load_records(out, manifest)
    cell: Dict[tuple, List[TrialRecord]] = {}
    for r in records:
        cell.setdefault((r.game, r.agent), []).append(r)
    for rs in cell.values():
        rs.sort(key=lambda r: r.trial)

    milestone_rows, welch_rows, summary_rows, ratio_rows = [], [], [], []
    means: Dict[tuple, float] = {}
    for game in games:
        for agent in agents:
            rs = cell.get((game, agent), [])
            for m in milestones:
                reached = _reached(rs, m)
                if not reached:
                    continue
                rep = aggregate(reached, m, k)
                means[(game, agent, m)] = rep.mean
                milestone_rows.append([game, agent, m, rep.n, _num(rep.mean), _num(rep.std), k])
            for r in rs:
                if r.episodes:
                    s = summary_metrics(r, k)
                    summary_rows.append([game, agent, r.trial, _num(s["auc"]),
                                         _num(s["best_window"]), _num(s["final_window"])])
        for a, b in combinations(agents, 2):
            for m in milestones:
                xa = [milestone_score(r, m, k) for r in _reached(cell.get((game, a), []), m)]
                xb = [milestone_score(r, m, k) for r in _reached(cell.get((game, b), []), m)]
                try:
                    w = welch_t_test(xa, xb)
                    welch_rows.append([game, a, b, m, _num(w.t), _num(w.df), _num(w.p)])
                except DegenerateSampleError:
                    welch_rows.append([game, a, b, m, "nan", "nan", "nan"])
        if len(settings) > 1:
            names = []
            for agent in agents:
                name = agent.rsplit("@", 1)[0]
                if name not in names:
                    names.append(name)
            final = milestones[-1]
            ref = settings[0]
            for name in names:
                base = means.get((game, f"{name}@{ref}", final))
                for setting in settings[1:]:
                    val = means.get((game, f"{name}@{setting}", final))
                    ratio = float("nan") if base in (None, 0) or val is None else val / base
                    ratio_rows.append([game, name, setting, ref, final, _num(ratio)])

    written = {
        "milestones": out / "milestones.csv",
        "welch": out / "welch.csv",
        "summary": out / "summary.csv",
    }
    _write(written["milestones"], _csv(milestone_rows, MILESTONE_COLUMNS))
    _write(written["welch"], _csv(welch_rows, WELCH_COLUMNS))
    _write(written["summary"], _csv(summary_rows, SUMMARY_COLUMNS))
    if len(settings) > 1:
        written["ratios"] = out / "ratios.csv"
        _write(written["ratios"], _csv(ratio_rows, RATIO_COLUMNS))
    for (game, agent), rs in sorted(cell.items()):
        if any(r.episodes for r in rs):
            svg = emit_curves([r for r in rs if r.episodes], k, title=f"{agent} on {game}")
            _write(out / "curves" / f"{agent}__{safe_name(game)}.svg", svg)
    return written


def summarize(path, milestone: Optional[int] = None) -> str:
    """Plain-text table of milestone means for the terminal."""
    manifest_path = find_manifest(path)
    text = (manifest_path.parent / "milestones.csv").read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    if milestone is None and rows:
        milestone = max(int(r["milestone_frames"]) for r in rows)
    lines = [f"{'game':<22} {'agent':<28} {'mean':>10} {'std':>10} {'n':>4}"]
    for r in rows:
        if int(r["milestone_frames"]) == milestone:
            lines.append(f"{r['game']:<22} {r['agent']:<28} {float(r['mean']):>10.3f} "
                         f"{float(r['std']):>10.3f} {r['n_trials']:>4}")
    return "\n".join(lines)
