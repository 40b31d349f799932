"""featrace: feature-oriented regression test selection and prioritization
for C/C++ systems configured through preprocessor conditionals."""

from .callgraph import (
    CallEdge,
    FunctionDef,
    ReachSet,
    TestCase,
    build_reach,
    discover_tests,
    extract_functions,
)
from .changes import ChangedFeatureSet, changed_features, diff_snapshots
from .conditions import CondExpr, UnsupportedExpression, parse_condition
from .config import Config, ConfigError, MissingKey, load_config
from .diffs import DiffHunk
from .evaluation import (
    BudgetReport,
    CommitLog,
    baseline_changed_file,
    baseline_retest_all,
    failure_detection,
    gamma_budget,
    load_commit_logs,
    per_function_time,
    reduction_percent,
)
from .features import (
    BASE,
    FeatureSet,
    FeatureSpan,
    PresenceCondition,
    PresenceSolver,
    attribute_spans,
    mine_features,
    solve_presence,
)
from .pipeline import RunSummary, analyze_snapshot, eval_command, run_pipeline
from .preproc import (
    BlockNode,
    Directive,
    DirectiveKind,
    MacroTable,
    ScanResult,
    build_macro_table,
    scan_file,
)
from .snapshots import Snapshot, load_snapshot
from .tracing import RankedTest, TraceRecord, link_traces, prioritize, select_tests

__version__ = "0.1.0"
