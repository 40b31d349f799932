"""Directive-level scanning of C/C++ sources.

The scanner never expands anything: it strips comments and string contents,
joins backslash-continuation lines, records every conditional / definition /
include directive, and builds the nested block tree of conditional branches
per file.  Header expansion is deliberately not attempted; every file is
analyzed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .conditions import (
    CondExpr,
    DefinedTest,
    Not,
    UnsupportedExpression,
    parse_condition,
    parse_defined_name,
)

DEFAULT_CODE_EXTENSIONS = (".c", ".h", ".cpp", ".hpp", ".cc", ".hh")


class DirectiveKind(Enum):
    IF = "if"
    IFDEF = "ifdef"
    IFNDEF = "ifndef"
    ELIF = "elif"
    ELSE = "else"
    ENDIF = "endif"
    DEFINE = "define"
    UNDEF = "undef"
    INCLUDE = "include"


_CONDITIONAL_OPENERS = (DirectiveKind.IF, DirectiveKind.IFDEF, DirectiveKind.IFNDEF)


@dataclass
class Directive:
    kind: DirectiveKind
    file: str
    line: int  # first physical line, 1-based
    raw: str   # continuation-joined, comment-stripped text
    expr: Optional[CondExpr] = None
    name: Optional[str] = None   # macro name for define/undef/ifdef/ifndef
    value: Optional[str] = None  # verbatim body text for #define


class Branch(Enum):
    IF_BRANCH = "if"
    ELIF_BRANCH = "elif"
    ELSE_BRANCH = "else"
    FILE_ROOT = "root"


@dataclass
class BlockNode:
    """One branch of a conditional group (or the file root).

    ``span`` is the governed line range excluding the delimiting directive
    lines; ``lines_from``/``lines_to`` include them (the opener, and the
    #endif for the last branch of a group), which is the range reports use.
    """

    branch: Branch
    guard: Optional[CondExpr]
    span: Tuple[int, int]
    children: List["BlockNode"] = field(default_factory=list)
    siblings: List["BlockNode"] = field(default_factory=list)
    lines_from: int = 0
    lines_to: int = 0
    unsupported: bool = False


@dataclass
class ScanIssue:
    kind: str  # "unbalanced-conditional" | "unsupported-expression"
    file: str
    line: int
    detail: str


@dataclass
class ScanResult:
    path: str
    directives: List[Directive]
    root: BlockNode
    line_count: int
    issues: List[ScanIssue]
    stripped: str  # comment/string-stripped text, line structure preserved


@dataclass
class DefineEvent:
    file: str
    line: int
    value: Optional[str]
    kind: str  # "define" | "undef"


class MacroTable:
    """All #define/#undef events per macro, in scan order within a file."""

    def __init__(self) -> None:
        self.events: Dict[str, List[DefineEvent]] = {}

    def add(self, name: str, event: DefineEvent) -> None:
        self.events.setdefault(name, []).append(event)

    def defined_anywhere(self, name: str) -> bool:
        return any(e.kind == "define" for e in self.events.get(name, ()))

    def last_event_at(self, name: str, file: str, line: int) -> Optional[DefineEvent]:
        """Most recent event for ``name`` as seen from (file, line): the
        last event earlier in the same file, else the last event anywhere
        (snapshot order is (file, line); no include expansion exists to
        do better)."""
        events = self.events.get(name)
        if not events:
            return None
        same_file = [e for e in events if e.file == file and e.line < line]
        if same_file:
            return same_file[-1]
        ordered = sorted(events, key=lambda e: (e.file, e.line))
        return ordered[-1]

    def names(self) -> List[str]:
        return sorted(self.events)


def strip_comments_and_strings(text: str) -> str:
    """Blank out comment bodies and string/char contents, preserving the
    line structure so line numbers stay valid.  Real C code embeds
    directive-looking text in comments; this runs before any directive
    detection."""
    out = list(text)
    n = len(text)
    i = 0
    state = "code"
    while i < n:
        c = text[i]
        if state == "code":
            if c == "/" and i + 1 < n and text[i + 1] == "*":
                out[i] = out[i + 1] = " "
                state = "block"
                i += 2
            elif c == "/" and i + 1 < n and text[i + 1] == "/":
                out[i] = out[i + 1] = " "
                state = "line"
                i += 2
            elif c == '"':
                state = "string"
                i += 1
            elif c == "'":
                state = "char"
                i += 1
            else:
                i += 1
        elif state == "block":
            if c == "*" and i + 1 < n and text[i + 1] == "/":
                out[i] = out[i + 1] = " "
                state = "code"
                i += 2
            else:
                if c != "\n":
                    out[i] = " "
                i += 1
        elif state == "line":
            if c == "\n":
                # a backslash right before the newline continues the comment
                if i > 0 and text[i - 1] == "\\":
                    pass
                else:
                    state = "code"
                i += 1
            else:
                out[i] = " "
                i += 1
        elif state in ("string", "char"):
            quote = '"' if state == "string" else "'"
            if c == "\\" and i + 1 < n:
                out[i] = " "
                if text[i + 1] != "\n":
                    out[i + 1] = " "
                i += 2
            elif c == quote:
                state = "code"
                i += 1
            elif c == "\n":
                # unterminated literal: recover at end of line
                state = "code"
                i += 1
            else:
                out[i] = " "
                i += 1
    return "".join(out)


def decode_source(data) -> str:
    """UTF-8 first, Latin-1 as the lossless byte fallback; never aborts."""
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def count_lines(text: str) -> int:
    if not text:
        return 0
    return text.count("\n") + (0 if text.endswith("\n") else 1)


def _split_directive(logical: str) -> Optional[Tuple[str, str]]:
    s = logical.lstrip()
    if not s.startswith("#"):
        return None
    s = s[1:].lstrip()
    i = 0
    while i < len(s) and (s[i].isalnum() or s[i] == "_"):
        i += 1
    return s[:i], s[i:].strip()


def _logical_lines(stripped: str, original: str):
    """Yield (first_line_number, joined_text) with backslash continuations
    joined.  Continuation is decided on the original text so a backslash
    that only appears after comment blanking never joins lines."""
    stripped_lines = stripped.split("\n")
    original_lines = original.split("\n")
    i = 0
    n = len(stripped_lines)
    while i < n:
        first = i + 1
        parts = [stripped_lines[i]]
        while i < n - 1 and original_lines[i].rstrip().endswith("\\"):
            cut = parts[-1].rstrip()
            if cut.endswith("\\"):
                cut = cut[:-1]
            parts[-1] = cut
            i += 1
            parts.append(stripped_lines[i])
        i += 1
        yield first, "".join(parts)


def scan_file(path: str, text) -> ScanResult:
    """Scan one file: directives, conditional-block tree, line count.

    Never raises on malformed input; structural problems degrade the file
    to a FileRoot-only tree and are reported in ``issues``.
    """
    decoded = decode_source(text)
    stripped = strip_comments_and_strings(decoded)
    line_count = count_lines(decoded)

    directives: List[Directive] = []
    issues: List[ScanIssue] = []

    for first_line, logical in _logical_lines(stripped, decoded):
        split = _split_directive(logical)
        if split is None:
            continue
        word, rest = split
        try:
            kind = DirectiveKind(word)
        except ValueError:
            continue  # #pragma, #error, #line, ... are irrelevant here
        raw = logical.strip()
        d = Directive(kind=kind, file=path, line=first_line, raw=raw)
        if kind in (DirectiveKind.IF, DirectiveKind.ELIF):
            try:
                d.expr = parse_condition(rest)
            except UnsupportedExpression as exc:
                issues.append(ScanIssue("unsupported-expression", path, first_line, exc.token))
        elif kind in (DirectiveKind.IFDEF, DirectiveKind.IFNDEF):
            try:
                test = parse_defined_name(rest)
                d.expr = test
                d.name = test.name
            except UnsupportedExpression as exc:
                issues.append(ScanIssue("unsupported-expression", path, first_line, exc.token))
        elif kind in (DirectiveKind.DEFINE, DirectiveKind.UNDEF):
            name, value = _parse_define(rest)
            d.name = name
            d.value = value if kind == DirectiveKind.DEFINE else None
        directives.append(d)

    root = _build_tree(path, directives, line_count, issues)
    return ScanResult(path, directives, root, line_count, issues, stripped)


def _parse_define(rest: str) -> Tuple[Optional[str], Optional[str]]:
    i = 0
    while i < len(rest) and (rest[i].isalnum() or rest[i] == "_"):
        i += 1
    name = rest[:i] or None
    body = rest[i:].strip()
    return name, (body or None)


def _build_tree(path: str, directives: List[Directive], line_count: int,
                issues: List[ScanIssue]) -> BlockNode:
    root = BlockNode(Branch.FILE_ROOT, None, (1, line_count),
                     lines_from=1, lines_to=line_count)

    # (parent, group_head, current_branch) per open conditional
    stack: List[Tuple[BlockNode, BlockNode, BlockNode]] = []
    parent = root

    def close_branch(branch: BlockNode, at_line: int, include_endif: bool) -> None:
        branch.span = (branch.span[0], at_line - 1)
        branch.lines_to = at_line if include_endif else at_line - 1

    def fail(line: int, detail: str) -> BlockNode:
        issues.append(ScanIssue("unbalanced-conditional", path, line, detail))
        return BlockNode(Branch.FILE_ROOT, None, (1, line_count),
                         lines_from=1, lines_to=line_count)

    for d in directives:
        if d.kind in _CONDITIONAL_OPENERS:
            unsupported = d.expr is None
            guard = None
            if d.expr is not None:
                guard = Not(d.expr) if d.kind == DirectiveKind.IFNDEF else d.expr
            node = BlockNode(Branch.IF_BRANCH, guard, (d.line + 1, d.line),
                             lines_from=d.line, unsupported=unsupported)
            parent.children.append(node)
            stack.append((parent, node, node))
            parent = node
        elif d.kind == DirectiveKind.ELIF:
            if not stack:
                return fail(d.line, "#elif without matching #if")
            outer, head, current = stack.pop()
            if current.branch == Branch.ELSE_BRANCH:
                return fail(d.line, "#elif after #else")
            close_branch(current, d.line, include_endif=False)
            node = BlockNode(Branch.ELIF_BRANCH, d.expr, (d.line + 1, d.line),
                             lines_from=d.line, unsupported=d.expr is None)
            head.siblings.append(node)
            stack.append((outer, head, node))
            parent = node
        elif d.kind == DirectiveKind.ELSE:
            if not stack:
                return fail(d.line, "#else without matching #if")
            outer, head, current = stack.pop()
            if current.branch == Branch.ELSE_BRANCH:
                return fail(d.line, "duplicate #else")
            close_branch(current, d.line, include_endif=False)
            node = BlockNode(Branch.ELSE_BRANCH, None, (d.line + 1, d.line),
                             lines_from=d.line)
            head.siblings.append(node)
            stack.append((outer, head, node))
            parent = node
        elif d.kind == DirectiveKind.ENDIF:
            if not stack:
                return fail(d.line, "#endif without matching opener")
            outer, head, current = stack.pop()
            close_branch(current, d.line, include_endif=True)
            parent = outer
    if stack:
        return fail(stack[-1][1].lines_from, "unterminated conditional at end of file")
    return root


def all_branches(node: BlockNode):
    """Depth-first iteration over every conditional branch below ``node``,
    yielding (branch, chain) where chain is the enclosing branch list from
    outermost to the branch itself (FileRoot excluded)."""
    def walk(block: BlockNode, chain: List[BlockNode]):
        for head in block.children:
            group = [head] + head.siblings
            for br in group:
                sub = chain + [br]
                yield br, sub, group
                yield from walk(br, sub)
    yield from walk(node, [])


def build_macro_table(scans: List[ScanResult]) -> MacroTable:
    """Merge every #define/#undef event from all scanned files, preserving
    in-file order."""
    table = MacroTable()
    for scan in sorted(scans, key=lambda s: s.path):
        for d in scan.directives:
            if d.kind == DirectiveKind.DEFINE and d.name:
                table.add(d.name, DefineEvent(d.file, d.line, d.value, "define"))
            elif d.kind == DirectiveKind.UNDEF and d.name:
                table.add(d.name, DefineEvent(d.file, d.line, None, "undef"))
    return table


def guard_exprs(scan: ScanResult) -> List[CondExpr]:
    """Every conditional guard in a file (If/Elif exprs, Ifdef/Ifndef tests)."""
    out = []
    for d in scan.directives:
        if d.kind in (DirectiveKind.IF, DirectiveKind.ELIF,
                      DirectiveKind.IFDEF, DirectiveKind.IFNDEF) and d.expr is not None:
            out.append(d.expr)
    return out
