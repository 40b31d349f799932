"""End-to-end orchestration: scan, attribute, diff, map, select, rank,
report.  All analysis is pure and happens before any file is written, so a
failed run leaves no partial reports behind.

Report files are deterministic: identical inputs produce byte-identical
output trees.  Step timings are kept on the in-memory RunSummary (and the
eval metrics CSV, which is inherently about measured time) but stay out of
run_summary.json so reruns compare clean.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import callgraph, changes, conditions, evaluation, reports, tracing
from .callgraph import FileGraph, TestCase
from .changes import ChangedFeatureSet
from .config import Config
from .diffs import DiffHunk
from .evaluation import CommitLog
from .features import (
    BASE,
    AttributionResult,
    FeatureSet,
    FeatureSpan,
    PresenceSolver,
    attribute_spans,
    mine_features,
)
from .preproc import MacroTable, ScanResult, build_macro_table, guard_exprs, scan_file
from .snapshots import Snapshot, empty_snapshot, load_git_snapshot, load_snapshot, snapshot_from_texts
from .tracing import RankedTest, TraceRecord

log = logging.getLogger(__name__)

APPROACH_FEATURE = "feature"
APPROACH_CHANGED_FILE = "changed-file"
APPROACH_RETEST_ALL = "retest-all"


def job_count() -> int:
    raw = os.environ.get("FEATRACE_JOBS", "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _scan_pair(item: Tuple[str, str]) -> ScanResult:
    return scan_file(item[0], item[1])


def _scan_all(code_files: Dict[str, str]) -> Dict[str, ScanResult]:
    items = sorted(code_files.items())
    jobs = job_count()
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_pair, items))
    else:
        results = [_scan_pair(it) for it in items]
    return {r.path: r for r in results}


@dataclass
class SnapshotAnalysis:
    snapshot: Snapshot
    scans: Dict[str, ScanResult]
    macro_table: MacroTable
    features: FeatureSet
    spans: List[FeatureSpan]
    graphs: Dict[str, FileGraph]
    warnings: List[str] = field(default_factory=list)
    negated: List[Tuple[str, int, str]] = field(default_factory=list)
    dead_blocks: List[Tuple[str, int]] = field(default_factory=list)
    macro_files: Dict[str, Set[str]] = field(default_factory=dict)

    def feature_names(self) -> Set[str]:
        return set(self.features.names)


def analyze_snapshot(snapshot: Snapshot, config: Config) -> SnapshotAnalysis:
    """Scan every code file and attribute each line to its owning feature."""
    code = snapshot.code_files(config.code_extensions)
    scans = _scan_all(code)
    warnings: List[str] = []
    for scan in scans.values():
        for issue in scan.issues:
            warnings.append(f"{issue.file}:{issue.line}: {issue.kind}: {issue.detail}")

    macro_table = build_macro_table(list(scans.values()))
    all_guards = [g for s in scans.values() for g in guard_exprs(s)]
    features = mine_features(macro_table, all_guards, warnings)

    macro_files: Dict[str, Set[str]] = {}
    for scan in scans.values():
        for guard in guard_exprs(scan):
            for name in conditions.macro_names(guard):
                macro_files.setdefault(features.display(name), set()).add(scan.path)

    solver = PresenceSolver(macro_table, features.macros)
    spans: List[FeatureSpan] = []
    negated: List[Tuple[str, int, str]] = []
    dead: List[Tuple[str, int]] = []
    for path in sorted(scans):
        attr = attribute_spans(scans[path], features, macro_table, solver)
        spans.extend(attr.spans)
        negated.extend(attr.negated)
        dead.extend(attr.dead_blocks)
        warnings.extend(attr.warnings)

    graphs = {path: callgraph.analyze_file(path, scans[path].stripped)
              for path in sorted(scans)}
    return SnapshotAnalysis(snapshot, scans, macro_table, features, spans,
                            graphs, warnings, negated, dead, macro_files)


@dataclass
class RunSummary:
    old_label: str
    new_label: str
    counts: Dict[str, int] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    features: List[str] = field(default_factory=list)
    changed_features: List[str] = field(default_factory=list)
    negated_features: List[Tuple[str, int, str]] = field(default_factory=list)
    dead_blocks: List[Tuple[str, int]] = field(default_factory=list)
    unresolved_calls: List[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.warnings else 0

    def to_json(self) -> str:
        payload = {
            "old": self.old_label,
            "new": self.new_label,
            "counts": dict(sorted(self.counts.items())),
            "features": self.features,
            "changed_features": self.changed_features,
            "warnings": self.warnings,
            "negated_features": [list(t) for t in self.negated_features],
            "dead_blocks": [list(t) for t in self.dead_blocks],
            "unresolved_calls": self.unresolved_calls,
        }
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def resolve_snapshots(config: Config, old_source: Optional[str], new_source: Optional[str],
                      git_repo: Optional[str] = None,
                      patch_path: Optional[str] = None) -> Tuple[Snapshot, Snapshot, Optional[List[DiffHunk]]]:
    """Materialize the two snapshots from directories, a git repo plus two
    revisions, or a new tree plus a unified diff (old side reconstructed by
    reverse-applying the patch)."""
    new_src = new_source or config.system_path
    if new_src is None:
        raise config_error("no new snapshot: pass --new or set system_path")
    if patch_path is not None:
        new_snap = load_snapshot(new_src)
        hunks = changes.parse_patch_file(patch_path)
        old_files = changes.reconstruct_old_files(new_snap, hunks)
        old_snap = snapshot_from_texts(old_source or "pre-patch", old_files)
        old_snap.binary_files = set(new_snap.binary_files)
        old_snap.binary_digests = dict(new_snap.binary_digests)
        return old_snap, new_snap, hunks
    if git_repo is not None:
        if not old_source or not new_source:
            raise config_error("--git needs --old and --new revisions")
        return load_git_snapshot(git_repo, old_source), load_git_snapshot(git_repo, new_source), None
    if old_source is None:
        old_snap = empty_snapshot("empty")
    else:
        old_snap = load_snapshot(old_source)
    return old_snap, load_snapshot(new_src), None


def config_error(message: str):
    from .config import ConfigError
    return ConfigError(message)


@dataclass
class PipelineResult:
    summary: RunSummary
    selected: Set[TestCase]
    ranked: Optional[List[RankedTest]]
    traces: List[TraceRecord]
    changed: ChangedFeatureSet
    new_analysis: SnapshotAnalysis
    old_analysis: SnapshotAnalysis
    tests: List[TestCase]
    hunks: List[DiffHunk]


def run_pipeline(config: Config, old_snap: Snapshot, new_snap: Snapshot,
                 out_dir, hunks: Optional[List[DiffHunk]] = None,
                 prioritization: Optional[bool] = None,
                 seed: Optional[int] = None,
                 write_reports: bool = True) -> PipelineResult:
    """The five analysis steps in order, then report emission."""
    do_rank = config.prioritization if prioritization is None else prioritization
    timings: Dict[str, float] = {}

    t0 = time.perf_counter()
    old_analysis = analyze_snapshot(old_snap, config)
    new_analysis = analyze_snapshot(new_snap, config)
    timings["identify_features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if hunks is None:
        hunks = changes.diff_snapshots(old_snap, new_snap)
    changed = changes.changed_features(
        hunks, old_analysis.spans, new_analysis.spans,
        old_analysis.feature_names(), new_analysis.feature_names(),
        config.code_extensions, new_analysis.macro_files)
    timings["identify_changes"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tests = callgraph.discover_tests(new_snap, config.test_name, config.test_folder,
                                     config.code_extensions, new_analysis.graphs)
    defs = [fd for g in new_analysis.graphs.values() for fd in g.functions]
    edges = [e for g in new_analysis.graphs.values() for e in g.edges]
    unresolved: List[str] = []
    reach = callgraph.build_reach(tests, defs, edges, unresolved=unresolved)
    traces = tracing.link_traces(reach, new_analysis.spans)
    timings["map_tests_to_features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    selected = tracing.select_tests(traces, changed)
    timings["select_tests"] = time.perf_counter() - t0

    ranked: Optional[List[RankedTest]] = None
    if do_rank:
        t0 = time.perf_counter()
        if seed is None:
            ranked = tracing.prioritize(selected, traces)
        else:
            ranked = tracing.prioritize(selected, traces,
                                        tiebreak="seeded-random", seed=seed)
        timings["prioritize_tests"] = time.perf_counter() - t0

    summary = RunSummary(old_analysis.snapshot.label, new_analysis.snapshot.label)
    summary.timings = timings
    summary.warnings = sorted(set(old_analysis.warnings) | set(new_analysis.warnings))
    summary.features = sorted(new_analysis.features.names)
    summary.changed_features = sorted(changed.features)
    summary.negated_features = sorted(set(new_analysis.negated))
    summary.dead_blocks = sorted(set(new_analysis.dead_blocks))
    summary.unresolved_calls = unresolved
    summary.counts = {
        "files": len(new_snap.paths()),
        "code_files": len(new_analysis.scans),
        "features": len(new_analysis.features.names),
        "feature_spans": len(new_analysis.spans),
        "tests": len(tests),
        "reach_targets": sum(len(r.targets) for r in reach),
        "trace_records": len(traces),
        "changed_features": len(changed.features),
        "selected": len(selected),
        "ranked": len(ranked) if ranked is not None else 0,
    }

    if write_reports:
        t0 = time.perf_counter()
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        n_spans = reports.write_features_csv(out / "features.csv", new_analysis.spans)
        n_lines = reports.write_test_lines_csv(out / "test_to_lines.csv", reach)
        n_traces = reports.write_test_features_csv(out / "test_to_features.csv", traces)
        n_selected = reports.write_selected_csv(out / "selected.csv", selected)
        assert n_spans == summary.counts["feature_spans"]
        assert n_lines == summary.counts["reach_targets"]
        assert n_traces == summary.counts["trace_records"]
        assert n_selected == summary.counts["selected"]
        if ranked is not None:
            n_ranked = reports.write_prioritized_csv(out / "prioritized.csv", ranked)
            assert n_ranked == summary.counts["ranked"]
        (out / "run_summary.json").write_text(summary.to_json(), encoding="utf-8")
        timings["write_reports"] = time.perf_counter() - t0

    return PipelineResult(summary, selected, ranked, traces, changed,
                          new_analysis, old_analysis, tests, hunks)


def analyze_only(config: Config, snapshot: Snapshot, out_dir,
                 write_files: bool = True) -> PipelineResult:
    """Feature identification plus test mapping on a single snapshot (no
    diff, no selection)."""
    analysis = analyze_snapshot(snapshot, config)
    tests = callgraph.discover_tests(snapshot, config.test_name, config.test_folder,
                                     config.code_extensions, analysis.graphs)
    defs = [fd for g in analysis.graphs.values() for fd in g.functions]
    edges = [e for g in analysis.graphs.values() for e in g.edges]
    unresolved: List[str] = []
    reach = callgraph.build_reach(tests, defs, edges, unresolved=unresolved)
    traces = tracing.link_traces(reach, analysis.spans)

    summary = RunSummary(snapshot.label, snapshot.label)
    summary.warnings = sorted(set(analysis.warnings))
    summary.features = sorted(analysis.features.names)
    summary.negated_features = sorted(set(analysis.negated))
    summary.dead_blocks = sorted(set(analysis.dead_blocks))
    summary.unresolved_calls = unresolved
    summary.counts = {
        "files": len(snapshot.paths()),
        "code_files": len(analysis.scans),
        "features": len(analysis.features.names),
        "feature_spans": len(analysis.spans),
        "tests": len(tests),
        "reach_targets": sum(len(r.targets) for r in reach),
        "trace_records": len(traces),
        "changed_features": 0,
        "selected": 0,
        "ranked": 0,
    }
    if write_files:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        reports.write_features_csv(out / "features.csv", analysis.spans)
        reports.write_test_lines_csv(out / "test_to_lines.csv", reach)
        reports.write_test_features_csv(out / "test_to_features.csv", traces)
        (out / "run_summary.json").write_text(summary.to_json(), encoding="utf-8")
    empty_changed = ChangedFeatureSet()
    return PipelineResult(summary, set(), None, traces, empty_changed,
                          analysis, analysis, tests, [])


# -- evaluation over commit pairs --------------------------------------------


def eval_command(config: Config, pairs: Sequence[Tuple[Snapshot, Snapshot]],
                 logs: Dict[str, CommitLog], out_dir,
                 seed: Optional[int] = None) -> List[List]:
    """Per commit pair: feature-oriented selection, the changed-file
    baseline, and retest-all, each with reduction / failure-detection /
    budget metrics.  A failing pair is logged and skipped; the others
    continue."""
    rows: List[List] = []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for old_snap, new_snap in pairs:
        try:
            rows.extend(_eval_pair(config, old_snap, new_snap, logs, seed))
        except Exception:
            log.exception("evaluation of %s -> %s failed; continuing",
                          old_snap.label, new_snap.label)
    reports.write_metrics_csv(out / "metrics.csv", rows)
    return rows


def _eval_pair(config: Config, old_snap: Snapshot, new_snap: Snapshot,
               logs: Dict[str, CommitLog], seed: Optional[int]) -> List[List]:
    commit = new_snap.label
    commit_log = logs.get(commit)

    t0 = time.perf_counter()
    result = run_pipeline(config, old_snap, new_snap, out_dir=None,
                          write_reports=False, seed=seed)
    feature_seconds = time.perf_counter() - t0

    tests = result.tests
    traces = result.traces
    n_total = len(tests)

    t0 = time.perf_counter()
    defs = [fd for g in result.new_analysis.graphs.values() for fd in g.functions]
    edges = [e for g in result.new_analysis.graphs.values() for e in g.edges]
    reach = callgraph.build_reach(tests, defs, edges)
    cf_selected = evaluation.baseline_changed_file(reach, result.hunks)
    cf_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    all_selected = evaluation.baseline_retest_all(tests)
    retest_seconds = time.perf_counter() - t0

    if result.ranked is not None:
        feature_rank = result.ranked
    else:
        feature_rank = tracing.lexicographic_rank(sorted(result.selected,
                                                         key=lambda t: (t.test_file, t.name)),
                                                  traces)
    selections = [
        (APPROACH_FEATURE, result.selected, feature_rank, feature_seconds),
        (APPROACH_CHANGED_FILE, cf_selected,
         tracing.lexicographic_rank(sorted(cf_selected, key=lambda t: (t.test_file, t.name)),
                                    traces), cf_seconds),
        (APPROACH_RETEST_ALL, all_selected,
         tracing.lexicographic_rank(tests, traces), retest_seconds),
    ]

    rows = []
    for approach, selected, ranked, seconds in selections:
        reduction = evaluation.reduction_percent(selected, tests)
        if commit_log is not None:
            detected, failures = evaluation.failure_detection(selected, commit_log)
            budget = evaluation.gamma_budget(ranked, commit_log)
            gamma = "" if budget.gamma_percent is None else f"{budget.gamma_percent:.2f}"
        else:
            detected, failures, gamma = 0, 0, ""
        rows.append([commit, approach, len(selected), n_total,
                     f"{reduction:.2f}", detected, failures, gamma,
                     f"{seconds:.3f}"])
    return rows
