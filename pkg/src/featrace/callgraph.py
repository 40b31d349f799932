"""Static function extraction and test-to-code reachability.

A brace-matching heuristic finds function definitions (ANSI and K&R); call
edges are identifiers followed by '(' inside a body.  Name resolution
prefers a same-file definition, otherwise every definition of that name in
the snapshot: over-approximating reach can only select more tests, never
miss a changed feature's tests.  Function pointers and macro-expanded calls
are invisible to this level of analysis.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .preproc import DEFAULT_CODE_EXTENSIONS, strip_comments_and_strings
from .snapshots import Snapshot

log = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class FunctionDef:
    name: str
    file: str
    from_line: int
    to_line: int
    approximate: bool = False


@dataclass(frozen=True)
class CallEdge:
    caller: FunctionDef
    callee_name: str
    call_site_line: int


@dataclass(frozen=True)
class TestCase:
    test_file: str
    name: str


@dataclass
class ReachSet:
    test: TestCase
    targets: List[Tuple[str, FunctionDef]]


# Keywords and pseudo-functions that must never look like calls or names.
C_KEYWORDS = {
    "auto", "break", "case", "char", "const", "continue", "default", "do",
    "double", "else", "enum", "extern", "float", "for", "goto", "if",
    "inline", "int", "long", "register", "restrict", "return", "short",
    "signed", "sizeof", "static", "struct", "switch", "typedef", "union",
    "unsigned", "void", "volatile", "while", "defined", "_Bool", "_Alignof",
    "_Static_assert", "new", "delete", "throw", "catch", "operator",
}

_TOKEN_RE = re.compile(r"[A-Za-z_]\w*|\d[\w.]*|\{|\}|\(|\)|\[|\]|;|,|\*|=|\S")

_ALLOWED_KNR = {",", ";", "*", "[", "]"}


@dataclass
class FileGraph:
    functions: List[FunctionDef]
    edges: List[CallEdge]
    bare_refs: List[Tuple[FunctionDef, str, int]]  # caller, name, line


def _tokenize_code(stripped: str) -> List[Tuple[str, int]]:
    """(token, line) stream with directive lines (and their continuation
    lines) removed so #define bodies and #if conditions never perturb brace
    depth; conditional directives are kept as marker tokens."""
    tokens: List[Tuple[str, int]] = []
    in_directive = False
    for lineno, line in enumerate(stripped.split("\n"), start=1):
        if in_directive:
            in_directive = line.rstrip().endswith("\\")
            continue
        ls = line.lstrip()
        if ls.startswith("#"):
            word = ls[1:].lstrip()
            m = re.match(r"[a-z]+", word)
            kind = m.group(0) if m else ""
            if kind in ("if", "ifdef", "ifndef"):
                tokens.append(("\x01if", lineno))
            elif kind in ("elif", "else"):
                tokens.append(("\x01elif", lineno))
            elif kind == "endif":
                tokens.append(("\x01endif", lineno))
            in_directive = line.rstrip().endswith("\\")
            continue
        for m in _TOKEN_RE.finditer(line):
            tokens.append((m.group(0), lineno))
    return tokens


def _is_ident(tok: str) -> bool:
    return bool(re.match(r"[A-Za-z_]\w*\Z", tok))


def extract_functions(path: str, text: str) -> List[FunctionDef]:
    """Function definitions with their line spans."""
    return analyze_file(path, text).functions


def analyze_file(path: str, text: str) -> FileGraph:
    """One pass over a file: function spans, call edges, bare identifier
    references.  ``text`` may be raw or already comment-stripped; stripping
    is idempotent."""
    stripped = strip_comments_and_strings(text)
    tokens = _tokenize_code(stripped)
    functions: List[FunctionDef] = []
    edges: List[CallEdge] = []
    bare: List[Tuple[FunctionDef, str, int]] = []

    depth = 0
    open_fn: Optional[dict] = None
    groups: List[dict] = []  # conditional-group stack for brace accounting
    i = 0
    n = len(tokens)

    def close_fn(at_line: int, approximate: bool = False) -> None:
        nonlocal open_fn
        fd = FunctionDef(open_fn["name"], path, open_fn["line"], at_line,
                         approximate=approximate or open_fn["approx"])
        functions.append(fd)
        for name, ln in open_fn["calls"]:
            edges.append(CallEdge(fd, name, ln))
        for name, ln in open_fn["bare"]:
            bare.append((fd, name, ln))
        open_fn = None

    while i < n:
        tok, line = tokens[i]
        if tok == "\x01if":
            groups.append({"base": depth, "deltas": []})
            i += 1
            continue
        if tok == "\x01elif":
            if groups:
                g = groups[-1]
                g["deltas"].append(depth - g["base"])
                depth = g["base"]
            i += 1
            continue
        if tok == "\x01endif":
            if groups:
                g = groups.pop()
                g["deltas"].append(depth - g["base"])
                if len(set(g["deltas"])) == 1:
                    depth = g["base"] + g["deltas"][0]
                else:
                    depth = g["base"] + max(g["deltas"])
                    if open_fn is not None:
                        open_fn["approx"] = True
                        log.warning("%s:%d: conditional branches disagree on braces; "
                                    "function span is approximate", path, line)
            i += 1
            continue
        if tok == "{":
            depth += 1
            i += 1
            continue
        if tok == "}":
            depth -= 1
            if depth < 0:
                depth = 0
            if open_fn is not None and depth == 0:
                close_fn(line)
            i += 1
            continue
        if open_fn is None and depth == 0 and tok == "(" and i > 0:
            prev, prev_line = tokens[i - 1]
            if _is_ident(prev) and prev not in C_KEYWORDS:
                consumed = _try_function_start(tokens, i, prev, prev_line)
                if consumed is not None:
                    open_idx, params = consumed
                    open_fn = {"name": prev, "line": prev_line, "params": params,
                               "calls": [], "bare": [], "approx": False}
                    depth += 1  # the '{'
                    i = open_idx + 1
                    continue
            i += 1
            continue
        if open_fn is not None and _is_ident(tok) and tok not in C_KEYWORDS:
            nxt = tokens[i + 1][0] if i + 1 < n else ""
            if nxt == "(":
                if tok not in open_fn["params"]:
                    open_fn["calls"].append((tok, line))
            else:
                if tok not in open_fn["params"]:
                    open_fn["bare"].append((tok, line))
        i += 1

    if open_fn is not None:
        # unbalanced braces: extend to the outermost consistent close
        last_line = tokens[-1][1] if tokens else open_fn["line"]
        log.warning("%s:%d: unclosed function %s; span approximate",
                    path, open_fn["line"], open_fn["name"])
        close_fn(last_line, approximate=True)
    return FileGraph(functions, edges, bare)


def _try_function_start(tokens, open_paren_idx: int, name: str,
                        name_line: int) -> Optional[Tuple[int, Set[str]]]:
    """From the '(' after a candidate name, check for ')' then an optional
    K&R declaration chain ending in ';' and finally '{'.  Returns the index
    of the '{' and the parameter-name set, or None if this is a prototype,
    a call, or anything else."""
    n = len(tokens)
    depth = 1
    i = open_paren_idx + 1
    param_tokens: List[str] = []
    while i < n and depth > 0:
        tok = tokens[i][0]
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
            if depth == 0:
                break
        elif tok.startswith("\x01"):
            return None  # conditional split inside a parameter list: too hairy
        if depth == 1:
            param_tokens.append(tok)
        i += 1
    if i >= n:
        return None
    close_idx = i
    i += 1
    chain: List[str] = []
    while i < n:
        tok = tokens[i][0]
        if tok == "{":
            if chain and chain[-1] != ";":
                return None  # e.g. "int f(void); struct s {" - not a definition
            return i, _param_names(param_tokens)
        if _is_ident(tok) or tok in _ALLOWED_KNR:
            chain.append(tok)
            i += 1
            continue
        return None
    return None


def _param_names(param_tokens: List[str]) -> Set[str]:
    names: Set[str] = set()
    segment: List[str] = []
    for tok in param_tokens + [","]:
        if tok == ",":
            idents = [t for t in segment if _is_ident(t) and t not in C_KEYWORDS]
            if idents:
                names.add(idents[-1])
            segment = []
        else:
            segment.append(tok)
    return names


# -- test discovery ----------------------------------------------------------


def discover_tests(snapshot: Snapshot, test_name: Optional[str] = None,
                   test_folder: Optional[str] = None,
                   extensions=DEFAULT_CODE_EXTENSIONS,
                   graphs: Optional[Dict[str, FileGraph]] = None) -> List[TestCase]:
    """Test cases per the configured selector: every function in every code
    file under ``test_folder``, plus every function of files whose basename
    matches the ``test_name`` pattern.  At least one selector is required."""
    if not test_name and not test_folder:
        raise ConfigError("config needs test_name and/or test_folder")
    pattern = re.compile(test_name) if test_name else None
    folder = test_folder.strip("/") + "/" if test_folder else None
    tests: List[TestCase] = []
    for path, text in snapshot.code_files(extensions).items():
        basename = path.rsplit("/", 1)[-1]
        in_folder = folder is not None and (path.startswith(folder) or
                                            path.rsplit("/", 1)[0] + "/" == folder)
        by_name = pattern is not None and pattern.search(basename)
        if not in_folder and not by_name:
            continue
        graph = graphs.get(path) if graphs else None
        functions = graph.functions if graph else extract_functions(path, text)
        tests.extend(TestCase(path, fd.name) for fd in functions)
    return sorted(set(tests), key=lambda t: (t.test_file, t.name))


# -- reachability ------------------------------------------------------------


def build_reach(tests: Sequence[TestCase], defs: Iterable[FunctionDef],
                edges: Iterable[CallEdge], drop_globals: bool = True,
                bare_refs: Iterable[Tuple[FunctionDef, str, int]] = (),
                unresolved: Optional[List[str]] = None) -> List[ReachSet]:
    """Transitive closure from each test function over name-resolved call
    edges.  With drop_globals (the default, and the only sensible setting
    in production) bare identifier references never create edges, so
    global variables cannot leak into the targets."""
    defs_by_name: Dict[str, List[FunctionDef]] = {}
    defs_by_file: Dict[str, Dict[str, FunctionDef]] = {}
    for fd in defs:
        defs_by_name.setdefault(fd.name, []).append(fd)
        defs_by_file.setdefault(fd.file, {})[fd.name] = fd
    for lst in defs_by_name.values():
        lst.sort(key=lambda f: (f.file, f.from_line))

    out_edges: Dict[FunctionDef, List[str]] = {}
    for e in edges:
        out_edges.setdefault(e.caller, []).append(e.callee_name)
    if not drop_globals:
        for caller, name, _line in bare_refs:
            if name in defs_by_name:
                out_edges.setdefault(caller, []).append(name)

    missing: Set[str] = set()

    def resolve(name: str, from_file: str) -> List[FunctionDef]:
        local = defs_by_file.get(from_file, {}).get(name)
        if local is not None:
            return [local]
        found = defs_by_name.get(name)
        if found:
            return found
        missing.add(name)
        return []

    reach: List[ReachSet] = []
    for test in tests:
        start = defs_by_file.get(test.test_file, {}).get(test.name)
        targets: Set[FunctionDef] = set()
        if start is not None:
            queue = [start]
            visited = {start}
            while queue:
                fn = queue.pop()
                for callee in out_edges.get(fn, ()):
                    for fd in resolve(callee, fn.file):
                        if fd not in visited:
                            visited.add(fd)
                            targets.add(fd)
                            queue.append(fd)
        ordered = sorted(targets, key=lambda f: (f.file, f.name, f.from_line))
        reach.append(ReachSet(test, [(fd.file, fd) for fd in ordered]))
    if missing and unresolved is not None:
        unresolved.extend(sorted(missing))
    return reach
