"""Line diffs between snapshot files.

Implements the classic Myers O(ND) shortest-edit-script algorithm over
lines (keepends, so trailing-newline differences are real differences),
turns edit scripts into minimal hunks, and reads/writes unified-diff
format.  Hunks carry their line content so a diff can be replayed onto
the old file, which is what the round-trip tests lean on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

ADDED = "added"
DELETED = "deleted"
MODIFIED = "modified"
FILE_ADDED = "file-added"
FILE_DELETED = "file-deleted"
BINARY_CHANGED = "binary-changed"


@dataclass
class DiffHunk:
    """One contiguous change.  Ranges are 1-based inclusive; an empty range
    is encoded as (pos, pos-1) where pos marks the anchor (unified-diff
    "after line pos-1" convention)."""

    file: str
    old_range: Tuple[int, int]
    new_range: Tuple[int, int]
    kind: str
    old_lines: List[str] = field(default_factory=list)
    new_lines: List[str] = field(default_factory=list)

    @property
    def old_empty(self) -> bool:
        return self.old_range[1] < self.old_range[0]

    @property
    def new_empty(self) -> bool:
        return self.new_range[1] < self.new_range[0]


def split_keepends(text: str) -> List[str]:
    return text.splitlines(keepends=True)


def myers_edit_script(a: Sequence[str], b: Sequence[str]) -> List[Tuple[str, int, int]]:
    """Shortest edit script as ("equal"|"delete"|"insert", a_index, b_index)
    steps, 0-based.  Standard greedy forward search with a trace for
    backtracking."""
    n, m = len(a), len(b)
    if n == 0 and m == 0:
        return []
    max_d = n + m
    v = {1: 0}
    trace = []
    for d in range(max_d + 1):
        v_snapshot = dict(v)
        trace.append(v_snapshot)
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v.get(k - 1, 0) < v.get(k + 1, 0)):
                x = v.get(k + 1, 0)
            else:
                x = v.get(k - 1, 0) + 1
            y = x - k
            while x < n and y < m and a[x] == b[y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                return _backtrack(a, b, trace, d)
    raise AssertionError("unreachable: Myers search exhausted")


def _backtrack(a: Sequence[str], b: Sequence[str],
               trace: List[dict], d_final: int) -> List[Tuple[str, int, int]]:
    script: List[Tuple[str, int, int]] = []
    x, y = len(a), len(b)
    for d in range(d_final, 0, -1):
        v = trace[d]
        k = x - y
        if k == -d or (k != d and v.get(k - 1, -1) < v.get(k + 1, -1)):
            prev_k = k + 1
        else:
            prev_k = k - 1
        prev_x = v.get(prev_k, 0)
        prev_y = prev_x - prev_k
        while x > prev_x and y > prev_y:
            x -= 1
            y -= 1
            script.append(("equal", x, y))
        if d > 0:
            if x == prev_x:
                y -= 1
                script.append(("insert", x, y))
            else:
                x -= 1
                script.append(("delete", x, y))
    while x > 0 and y > 0:
        x -= 1
        y -= 1
        script.append(("equal", x, y))
    script.reverse()
    return script


def diff_lines(file: str, old: List[str], new: List[str]) -> List[DiffHunk]:
    """Minimal hunks for one file; each maximal run of non-equal steps
    becomes one hunk."""
    script = myers_edit_script(old, new)
    hunks: List[DiffHunk] = []
    run: List[Tuple[str, int, int]] = []

    def flush() -> None:
        if not run:
            return
        dels = [(x, y) for op, x, y in run if op == "delete"]
        ins = [(x, y) for op, x, y in run if op == "insert"]
        if dels:
            old_range = (dels[0][0] + 1, dels[-1][0] + 1)
        else:
            anchor = run[0][1]  # old position the insertion sits after
            old_range = (anchor + 1, anchor)
        if ins:
            new_range = (ins[0][1] + 1, ins[-1][1] + 1)
        else:
            anchor = run[0][2]
            new_range = (anchor + 1, anchor)
        kind = MODIFIED if (dels and ins) else (DELETED if dels else ADDED)
        hunks.append(DiffHunk(
            file, old_range, new_range, kind,
            old_lines=[old[x] for x, _ in dels],
            new_lines=[new[y] for _, y in ins],
        ))
        run.clear()

    for step in script:
        if step[0] == "equal":
            flush()
        else:
            run.append(step)
    flush()
    return hunks


def apply_hunks(old_text: str, hunks: List[DiffHunk]) -> str:
    """Replay a file's hunks onto its old content."""
    old = split_keepends(old_text)
    ordered = sorted(hunks, key=lambda h: (h.old_range[0], h.old_range[1]))
    out: List[str] = []
    pos = 1  # next old line to copy
    for h in ordered:
        if h.old_empty:
            copy_until = h.old_range[0]  # insertion goes after old line pos-1
        else:
            copy_until = h.old_range[0]
        out.extend(old[pos - 1:copy_until - 1])
        pos = copy_until
        if not h.old_empty:
            pos = h.old_range[1] + 1
        out.extend(h.new_lines)
    out.extend(old[pos - 1:])
    return "".join(out)


# -- unified diff ------------------------------------------------------------

_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_FILE_OLD = re.compile(r"^--- (?:a/)?(.+?)(?:\t.*)?$")
_FILE_NEW = re.compile(r"^\+\+\+ (?:b/)?(.+?)(?:\t.*)?$")


def parse_unified_diff(text: str) -> List[DiffHunk]:
    """Parse a unified diff into per-change-run hunks with exact line
    numbers derived from the @@ headers."""
    hunks: List[DiffHunk] = []
    current_file: Optional[str] = None
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        m_new = _FILE_NEW.match(line)
        if m_new:
            path = m_new.group(1)
            if path != "/dev/null":
                current_file = path
            i += 1
            continue
        m_old = _FILE_OLD.match(line)
        if m_old:
            path = m_old.group(1)
            current_file = None if path == "/dev/null" else path
            i += 1
            continue
        m = _HUNK_HEADER.match(line)
        if m and current_file is not None:
            old_start = int(m.group(1))
            old_count = int(m.group(2)) if m.group(2) is not None else 1
            new_start = int(m.group(3))
            new_count = int(m.group(4)) if m.group(4) is not None else 1
            i += 1
            i = _parse_hunk_body(lines, i, current_file,
                                 old_start, old_count, new_start, new_count, hunks)
            continue
        i += 1
    return hunks


def _parse_hunk_body(lines: List[str], i: int, file: str,
                     old_start: int, old_count: int,
                     new_start: int, new_count: int,
                     hunks: List[DiffHunk]) -> int:
    # count-0 headers anchor after the stated line
    old_pos = old_start if old_count > 0 else old_start + 1
    new_pos = new_start if new_count > 0 else new_start + 1
    old_seen = 0
    new_seen = 0
    run_old: List[Tuple[int, str]] = []
    run_new: List[Tuple[int, str]] = []

    def flush() -> None:
        nonlocal run_old, run_new
        if not run_old and not run_new:
            return
        if run_old:
            old_range = (run_old[0][0], run_old[-1][0])
        else:
            old_range = (old_pos, old_pos - 1)
        if run_new:
            new_range = (run_new[0][0], run_new[-1][0])
        else:
            new_range = (new_pos, new_pos - 1)
        kind = MODIFIED if (run_old and run_new) else (DELETED if run_old else ADDED)
        hunks.append(DiffHunk(file, old_range, new_range, kind,
                              old_lines=[t for _, t in run_old],
                              new_lines=[t for _, t in run_new]))
        run_old = []
        run_new = []

    while i < len(lines) and (old_seen < old_count or new_seen < new_count):
        line = lines[i]
        if line.startswith("-"):
            run_old.append((old_pos, line[1:] + "\n"))
            old_pos += 1
            old_seen += 1
        elif line.startswith("+"):
            run_new.append((new_pos, line[1:] + "\n"))
            new_pos += 1
            new_seen += 1
        elif line.startswith("\\"):
            # "\ No newline at end of file": previous captured line has none
            target = run_new if run_new else run_old
            if target:
                pos, text_line = target[-1]
                target[-1] = (pos, text_line.rstrip("\n"))
        else:  # context line (starts with space or is empty)
            flush()
            old_pos += 1
            new_pos += 1
            old_seen += 1
            new_seen += 1
        i += 1
    flush()
    return i


def format_unified_diff(file: str, old_text: str, new_text: str) -> str:
    """Minimal unified diff (zero context) for one file, mostly for tests
    and the demo script."""
    old = split_keepends(old_text)
    new = split_keepends(new_text)
    hunks = diff_lines(file, old, new)
    if not hunks:
        return ""
    out = [f"--- a/{file}", f"+++ b/{file}"]
    for h in hunks:
        o_from, o_to = h.old_range
        n_from, n_to = h.new_range
        o_count = 0 if h.old_empty else o_to - o_from + 1
        n_count = 0 if h.new_empty else n_to - n_from + 1
        o_start = o_from - 1 if o_count == 0 else o_from
        n_start = n_from - 1 if n_count == 0 else n_from
        out.append(f"@@ -{o_start},{o_count} +{n_start},{n_count} @@")
        for text_line in h.old_lines:
            out.append("-" + text_line.rstrip("\n"))
            if not text_line.endswith("\n"):
                out.append("\\ No newline at end of file")
        for text_line in h.new_lines:
            out.append("+" + text_line.rstrip("\n"))
            if not text_line.endswith("\n"):
                out.append("\\ No newline at end of file")
    return "\n".join(out) + "\n"


def reverse_hunk(h: DiffHunk) -> DiffHunk:
    kind = h.kind
    if kind == ADDED:
        kind = DELETED
    elif kind == DELETED:
        kind = ADDED
    elif kind == FILE_ADDED:
        kind = FILE_DELETED
    elif kind == FILE_DELETED:
        kind = FILE_ADDED
    return DiffHunk(h.file, h.new_range, h.old_range, kind,
                    old_lines=list(h.new_lines), new_lines=list(h.old_lines))
