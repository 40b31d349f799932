"""Evaluation harness: baselines and quality metrics.

CI logs come in at file granularity (which test files failed, how long each
file took), so test-case-level numbers are approximations: a file's time is
split evenly across its functions, and a failed file is located by the best
ranked test case it contains.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .callgraph import ReachSet, TestCase
from .diffs import DiffHunk
from .tracing import RankedTest

log = logging.getLogger(__name__)


@dataclass
class Job:
    job_id: str
    failed_test_files: Set[str] = field(default_factory=set)
    file_durations: Dict[str, float] = field(default_factory=dict)


@dataclass
class CommitLog:
    commit: str
    jobs: List[Job] = field(default_factory=list)


@dataclass
class BudgetEntry:
    job_id: str
    failed_test: str
    position: int
    total: int
    percent: float


@dataclass
class BudgetReport:
    commit: str
    gamma_percent: Optional[float]
    per_job: List[BudgetEntry]
    warnings: List[str] = field(default_factory=list)


def load_commit_logs(path) -> Dict[str, CommitLog]:
    """JSON-lines log ingestion, one object per job:
    {"commit": str, "job": str, "failed": [test_file...],
     "durations": {test_file: seconds}}"""
    logs: Dict[str, CommitLog] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON in log: {exc}") from exc
            commit = str(obj["commit"])
            entry = logs.setdefault(commit, CommitLog(commit))
            entry.jobs.append(Job(
                job_id=str(obj.get("job", f"job-{len(entry.jobs) + 1}")),
                failed_test_files=set(obj.get("failed", ())),
                file_durations={str(k): float(v)
                                for k, v in obj.get("durations", {}).items()},
            ))
    return logs


def _file_matches(log_name: str, test_file: str) -> bool:
    """Logs usually carry bare file stems (torture_packet); test cases carry
    snapshot-relative paths (tests/torture_packet.c)."""
    if log_name == test_file:
        return True
    basename = test_file.rsplit("/", 1)[-1]
    if log_name == basename:
        return True
    stem = basename.rsplit(".", 1)[0]
    return log_name == stem


def baseline_retest_all(tests: Iterable[TestCase]) -> Set[TestCase]:
    """Everything that was discovered; definitionally equal to the test set."""
    return set(tests)


def baseline_changed_file(reach: Iterable[ReachSet], hunks: Iterable[DiffHunk]) -> Set[TestCase]:
    """Tests statically linked to a file the commit touched, or whose own
    file was touched."""
    changed_files = {h.file for h in hunks}
    selected: Set[TestCase] = set()
    for rs in reach:
        if rs.test.test_file in changed_files:
            selected.add(rs.test)
            continue
        if any(target_file in changed_files for target_file, _ in rs.targets):
            selected.add(rs.test)
    return selected


def reduction_percent(selected: Sequence, total: Sequence) -> float:
    n_total = len(set(total))
    if n_total == 0:
        return 0.0
    return 100.0 * (1.0 - len(set(selected)) / n_total)


def failure_detection(selected: Iterable[TestCase], commit_log: CommitLog) -> Tuple[int, int]:
    """(detected, total_failures) over all jobs; a failed file counts as
    detected when the selection contains at least one of its test cases."""
    selected_files = {t.test_file for t in selected}
    detected = 0
    total = 0
    for job in commit_log.jobs:
        for failed in sorted(job.failed_test_files):
            total += 1
            if any(_file_matches(failed, tf) for tf in selected_files):
                detected += 1
    return detected, total


def per_function_time(file_durations: Mapping[str, float],
                      function_counts: Mapping[str, int],
                      warnings: Optional[List[str]] = None) -> Dict[str, float]:
    """Seconds per test case (function) for each timed test file: the
    file's duration divided by its function count.  Timed files with no
    discovered functions are skipped with a warning."""
    times: Dict[str, float] = {}
    for log_name, seconds in sorted(file_durations.items()):
        count = _lookup_count(log_name, function_counts)
        if count is None or count < 1:
            msg = f"timed file {log_name!r} has no discovered functions; skipped"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            continue
        times[log_name] = seconds / count
    return times


def _lookup_count(log_name: str, function_counts: Mapping[str, int]) -> Optional[int]:
    if log_name in function_counts:
        return function_counts[log_name]
    for path, count in function_counts.items():
        if _file_matches(log_name, path):
            return count
    return None


def selected_time(selected: Iterable[TestCase],
                  times_per_function: Mapping[str, float]) -> float:
    """Total approximate runtime of a selection."""
    total = 0.0
    for t in selected:
        for log_name, per_fn in times_per_function.items():
            if _file_matches(log_name, t.test_file):
                total += per_fn
                break
    return total


def gamma_budget(ranked: Sequence[RankedTest], commit_log: CommitLog) -> BudgetReport:
    """Mean percentage of the ranked list that must run to reach each failed
    test file (its best-ranked test case), averaged over all failures in all
    jobs.  A failed file with no ranked test counts as 100 (worst case)."""
    nt = len(ranked)
    report = BudgetReport(commit_log.commit, None, [])
    for job in commit_log.jobs:
        for failed in sorted(job.failed_test_files):
            position = None
            for rt in ranked:
                if _file_matches(failed, rt.test_file):
                    position = rt.index
                    break
            if position is None:
                msg = (f"{commit_log.commit}/{job.job_id}: failed test file "
                       f"{failed!r} has no ranked test case; budget 100")
                log.warning(msg)
                report.warnings.append(msg)
                report.per_job.append(BudgetEntry(job.job_id, failed, nt, nt, 100.0))
                continue
            percent = 100.0 * position / nt if nt else 100.0
            report.per_job.append(BudgetEntry(job.job_id, failed, position, nt, percent))
    if report.per_job:
        report.gamma_percent = sum(e.percent for e in report.per_job) / len(report.per_job)
    return report
