"""Feature identification and line attribution.

A feature is a macro that guards conditional blocks but is never defined
inside the snapshot, so it can only come from the build configuration.
Every line of every file is attributed to exactly one owning feature; the
sentinel BASE owns everything not positively governed by a feature.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from . import conditions
from .conditions import (
    And,
    Arith,
    Compare,
    CondExpr,
    DefinedTest,
    IntLiteral,
    MacroRef,
    Not,
    Or,
    UnsupportedExpression,
)
from .preproc import Branch, BlockNode, MacroTable, ScanResult, all_branches

log = logging.getLogger(__name__)

BASE = "BASE"
BASE_RENAMED = "BASE_"


class SubstitutionCycle(Exception):
    def __init__(self, macro: str):
        self.macro = macro
        super().__init__(f"#define substitution loops through {macro!r}")


@dataclass(frozen=True)
class FeatureSet:
    """Mined features plus the BASE sentinel.

    ``macros`` holds the raw mined macro names; ``names`` the report names,
    which differ only when a macro literally called BASE had to be renamed
    to avoid colliding with the sentinel.
    """

    macros: FrozenSet[str]
    names: FrozenSet[str]
    renamed_base: bool = False

    def display(self, macro: str) -> str:
        return BASE_RENAMED if (macro == BASE and self.renamed_base) else macro

    def __contains__(self, macro: str) -> bool:
        return macro in self.macros


def mine_features(macro_table: MacroTable, all_guards: Iterable[CondExpr],
                  warnings: Optional[List[str]] = None) -> FeatureSet:
    """Macros referenced in any guard minus macros defined anywhere in the
    snapshot.  BASE is always present."""
    referenced: Set[str] = set()
    for guard in all_guards:
        referenced |= conditions.macro_names(guard)
    mined = {m for m in referenced if not macro_table.defined_anywhere(m)}
    renamed = BASE in mined
    if renamed:
        msg = "macro named BASE collides with the sentinel; reported as BASE_"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
    names = {BASE_RENAMED if m == BASE else m for m in mined} | {BASE}
    return FeatureSet(frozenset(mined), frozenset(names), renamed)


@dataclass(frozen=True)
class PresenceCondition:
    """Conjunction of all enclosing branch conditions for one block, plus
    the location whose #define context governs substitution."""

    expr: CondExpr
    file: str
    line: int


@dataclass(frozen=True)
class SolveResult:
    satisfiable: bool
    witness: Optional[Dict[str, Optional[int]]] = None


class PresenceSolver:
    """Decides satisfiability of presence conditions by bounded enumeration.

    Internally defined macros are substituted by their most recent textual
    value at the block's location; the remaining free macros are features,
    each either undefined or defined with an integer drawn from the
    comparison constants +-1 plus {0, 1}.  Conditions in real code are
    small, so memoized brute force is the contract here, not a SAT solver.
    """

    def __init__(self, macro_table: MacroTable, feature_macros: FrozenSet[str],
                 warnings: Optional[List[str]] = None):
        self.table = macro_table
        self.features = feature_macros
        self.warnings = warnings if warnings is not None else []
        self._cache: Dict[str, SolveResult] = {}

    def solve(self, pc: PresenceCondition) -> SolveResult:
        try:
            expr = self._substitute(pc.expr, pc.file, pc.line, ())
        except SubstitutionCycle as exc:
            msg = f"{pc.file}:{pc.line}: {exc}"
            log.warning(msg)
            self.warnings.append(msg)
            return SolveResult(False)
        key = conditions.render(expr)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        result = self._enumerate(expr)
        self._cache[key] = result
        return result

    # -- substitution of internally defined macros ------------------------

    def _substitute(self, expr: CondExpr, file: str, line: int,
                    seen: Tuple[str, ...]) -> CondExpr:
        if isinstance(expr, MacroRef):
            return self._expand_ref(expr.name, file, line, seen)
        if isinstance(expr, DefinedTest):
            if expr.name in self.features or not self.table.events.get(expr.name):
                return expr
            event = self.table.last_event_at(expr.name, file, line)
            return IntLiteral(1 if (event and event.kind == "define") else 0)
        if isinstance(expr, Not):
            return Not(self._substitute(expr.child, file, line, seen))
        if isinstance(expr, And):
            return And(self._substitute(expr.left, file, line, seen),
                       self._substitute(expr.right, file, line, seen))
        if isinstance(expr, Or):
            return Or(self._substitute(expr.left, file, line, seen),
                      self._substitute(expr.right, file, line, seen))
        if isinstance(expr, Compare):
            return Compare(self._substitute(expr.left, file, line, seen), expr.op,
                           self._substitute(expr.right, file, line, seen))
        if isinstance(expr, Arith):
            return Arith(self._substitute(expr.left, file, line, seen), expr.op,
                         self._substitute(expr.right, file, line, seen))
        return expr

    def _expand_ref(self, name: str, file: str, line: int,
                    seen: Tuple[str, ...]) -> CondExpr:
        if name in self.features or not self.table.events.get(name):
            return MacroRef(name)
        if name in seen:
            raise SubstitutionCycle(name)
        event = self.table.last_event_at(name, file, line)
        if event is None or event.kind == "undef":
            return IntLiteral(0)
        if event.value is None:
            # "#define X" with no body: defined flag, conventionally 1
            return IntLiteral(1)
        try:
            value_expr = conditions.parse_condition(event.value)
        except UnsupportedExpression:
            msg = (f"{file}:{line}: value of internally defined {name!r} "
                   f"({event.value!r}) is not a constant expression; using 0")
            log.warning(msg)
            self.warnings.append(msg)
            return IntLiteral(0)
        return self._substitute(value_expr, file, line, seen + (name,))

    # -- bounded enumeration ----------------------------------------------

    def _enumerate(self, expr: CondExpr) -> SolveResult:
        macros = sorted(conditions.macro_names(expr))
        if not macros:
            try:
                ok = conditions.evaluate(expr, {}) != 0
            except ZeroDivisionError:
                ok = False
            return SolveResult(ok, {} if ok else None)

        arithmetic = _arithmetic_macros(expr)
        constants = sorted(conditions.int_constants(expr))
        values = {0, 1}
        for c in constants:
            values.update((c - 1, c, c + 1))
        int_choices = sorted(values)

        domains = []
        for m in macros:
            if m in arithmetic:
                domains.append([None] + int_choices)
            else:
                domains.append([None, 1])

        for combo in itertools.product(*domains):
            env = dict(zip(macros, combo))
            try:
                if conditions.evaluate(expr, env) != 0:
                    return SolveResult(True, env)
            except ZeroDivisionError:
                continue
        return SolveResult(False)


def _arithmetic_macros(expr: CondExpr) -> Set[str]:
    """Macros whose value (not just definedness) can matter: any reference
    outside a defined() test."""
    out: Set[str] = set()

    def walk(node: CondExpr) -> None:
        if isinstance(node, MacroRef):
            out.add(node.name)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or, Compare, Arith)):
            walk(node.left)
            walk(node.right)

    walk(expr)
    return out


def solve_presence(pc: PresenceCondition, features: FeatureSet,
                   internal_defs: MacroTable) -> SolveResult:
    """One-shot convenience around PresenceSolver for a single condition."""
    return PresenceSolver(internal_defs, features.macros).solve(pc)


# -- attribution -----------------------------------------------------------


@dataclass
class FeatureSpan:
    file: str
    feature: str
    from_line: int
    to_line: int


@dataclass
class AttributionResult:
    spans: List[FeatureSpan]
    owners: List[str]  # owners[i] = owning feature of line i+1
    dead_blocks: List[Tuple[str, int]] = field(default_factory=list)
    negated: List[Tuple[str, int, str]] = field(default_factory=list)  # file, line, feature
    warnings: List[str] = field(default_factory=list)


def _branch_condition(branch: BlockNode, group: List[BlockNode]) -> Optional[CondExpr]:
    """Condition under which this branch is compiled, sibling exclusions
    included (an elif/else is only reached when every earlier branch guard
    failed)."""
    idx = group.index(branch)
    parts: List[CondExpr] = []
    for earlier in group[:idx]:
        if earlier.guard is not None:
            parts.append(Not(earlier.guard))
    if branch.guard is not None:
        parts.append(branch.guard)
    return conditions.conjoin(parts)


def attribute_spans(scan: ScanResult, features: FeatureSet,
                    internal_defs: MacroTable,
                    solver: Optional[PresenceSolver] = None) -> AttributionResult:
    """Attribute every line of a scanned file to exactly one owning feature.

    Ownership walks guards from the innermost block outward and takes the
    first feature referenced positively (not solely under negations);
    internally-defined-only guards defer to the enclosing owner, negated-only
    guards and unparseable guards fall to BASE, and blocks whose presence
    condition cannot be satisfied are dead variability, owned by BASE.
    """
    result = AttributionResult(spans=[], owners=[BASE] * scan.line_count)
    if solver is None:
        solver = PresenceSolver(internal_defs, features.macros, result.warnings)
    else:
        solver.warnings = result.warnings

    # group membership is needed to build sibling-exclusion conditions
    branch_ranges: List[Tuple[BlockNode, str]] = []
    covered = [False] * (scan.line_count + 1)

    for branch, chain, group in all_branches(scan.root):
        owner = _owner_for(chain, features)
        pc_parts: List[Optional[CondExpr]] = []
        determinate = True
        walk_groups = _chain_groups(scan.root, chain)
        for br, grp in zip(chain, walk_groups):
            if br.unsupported:
                determinate = False
                break
            pc_parts.append(_branch_condition(br, grp))
        if determinate:
            pc_expr = conditions.conjoin([p for p in pc_parts if p is not None])
            if pc_expr is not None:
                verdict = solver.solve(PresenceCondition(pc_expr, scan.path, branch.lines_from))
                if not verdict.satisfiable:
                    owner = BASE
                    result.dead_blocks.append((scan.path, branch.lines_from))
                    msg = f"{scan.path}:{branch.lines_from}: dead variability (presence condition unsatisfiable)"
                    result.warnings.append(msg)
                    log.warning(msg)
        if owner == BASE and branch.guard is not None and not branch.unsupported:
            for name in conditions.negated_macro_order(branch.guard):
                if name in features.macros:
                    result.negated.append((scan.path, branch.lines_from, features.display(name)))
        branch_ranges.append((branch, owner))

    # innermost wins: all_branches yields parents before their children,
    # so later assignments overwrite enclosing ones
    for branch, owner in branch_ranges:
        lo = max(branch.lines_from, 1)
        hi = min(branch.lines_to, scan.line_count)
        for ln in range(lo, hi + 1):
            result.owners[ln - 1] = owner
            covered[ln] = True

    lines = scan.stripped.split("\n")
    emitted: List[Tuple[int, str]] = []
    for ln in range(1, scan.line_count + 1):
        if not covered[ln] and not lines[ln - 1].strip():
            continue  # plain blank/comment-only line outside any block
        emitted.append((ln, result.owners[ln - 1]))

    for ln, owner in emitted:
        if (result.spans and result.spans[-1].feature == owner
                and result.spans[-1].to_line == ln - 1):
            result.spans[-1].to_line = ln
        else:
            result.spans.append(FeatureSpan(scan.path, owner, ln, ln))
    return result


def _chain_groups(root: BlockNode, chain: List[BlockNode]) -> List[List[BlockNode]]:
    """For each branch in the chain, the sibling group it belongs to."""
    groups: List[List[BlockNode]] = []
    parent = root
    for br in chain:
        for head in parent.children:
            grp = [head] + head.siblings
            if br in grp:
                groups.append(grp)
                break
        parent = br
    return groups


def _owner_for(chain: List[BlockNode], features: FeatureSet) -> str:
    innermost = chain[-1]
    if innermost.unsupported:
        return BASE
    for branch in reversed(chain):
        if branch.unsupported or branch.guard is None:
            continue
        for name in conditions.positive_macro_order(branch.guard):
            if name in features.macros:
                return features.display(name)
    return BASE
