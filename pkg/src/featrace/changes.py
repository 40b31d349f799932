"""Lifting line-level diffs to the set of changed features.

A feature changes when it appears or disappears between snapshots, or when
a hunk touches one of its spans on either side of the diff.  Both sides are
consulted because a pure deletion has no new-side lines and a pure addition
has no old-side lines.  Changes in binary or non-code files, and code hunks
that land on lines no feature owns, belong to BASE.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

from . import diffs
from .diffs import (
    ADDED,
    BINARY_CHANGED,
    DELETED,
    FILE_ADDED,
    FILE_DELETED,
    DiffHunk,
    diff_lines,
    split_keepends,
)
from .features import BASE, FeatureSpan
from .preproc import DEFAULT_CODE_EXTENSIONS
from .snapshots import Snapshot


@dataclass
class ChangedFeatureSet:
    features: Set[str] = field(default_factory=set)
    provenance: Dict[str, List[Tuple[str, DiffHunk]]] = field(default_factory=dict)

    def add(self, feature: str, file: str, hunk: DiffHunk) -> None:
        self.features.add(feature)
        self.provenance.setdefault(feature, []).append((file, hunk))


def diff_snapshots(old: Snapshot, new: Snapshot) -> List[DiffHunk]:
    """Per-file minimal hunks between two snapshots.  Added/deleted files
    become whole-file hunks; binary differences become binary-changed."""
    hunks: List[DiffHunk] = []
    for path in sorted(old.paths() | new.paths()):
        in_old = path in old.files or path in old.binary_files
        in_new = path in new.files or path in new.binary_files
        old_binary = path in old.binary_files
        new_binary = path in new.binary_files
        if old_binary or new_binary:
            if not in_old or not in_new:
                kind = FILE_ADDED if not in_old else FILE_DELETED
                hunks.append(DiffHunk(path, (1, 0), (1, 0), kind))
            elif (old.binary_digests.get(path) != new.binary_digests.get(path)
                  or old_binary != new_binary):
                hunks.append(DiffHunk(path, (1, 0), (1, 0), BINARY_CHANGED))
            continue
        if in_old and not in_new:
            n = len(split_keepends(old.files[path]))
            hunks.append(DiffHunk(path, (1, n), (1, 0), FILE_DELETED,
                                  old_lines=split_keepends(old.files[path])))
        elif in_new and not in_old:
            n = len(split_keepends(new.files[path]))
            hunks.append(DiffHunk(path, (1, 0), (1, n), FILE_ADDED,
                                  new_lines=split_keepends(new.files[path])))
        elif in_old and in_new:
            if old.files[path] != new.files[path]:
                hunks.extend(diff_lines(path,
                                        split_keepends(old.files[path]),
                                        split_keepends(new.files[path])))
    return hunks


def _ranges_intersect(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
    if a[1] < a[0] or b[1] < b[0]:
        return False
    return max(a[0], b[0]) <= min(a[1], b[1])


def _spans_by_file(spans: Iterable[FeatureSpan]) -> Dict[str, List[FeatureSpan]]:
    grouped: Dict[str, List[FeatureSpan]] = {}
    for s in spans:
        grouped.setdefault(s.file, []).append(s)
    return grouped


def changed_features(hunks: List[DiffHunk],
                     old_spans: Iterable[FeatureSpan],
                     new_spans: Iterable[FeatureSpan],
                     old_features: Set[str],
                     new_features: Set[str],
                     code_extensions=DEFAULT_CODE_EXTENSIONS,
                     macro_files: Optional[Mapping[str, Set[str]]] = None) -> ChangedFeatureSet:
    """Changed features between two attributed snapshots.

    ``macro_files`` (feature name -> files mentioning it) only improves
    provenance for features whose membership flipped without any hunk
    touching their spans, e.g. a #define removed in a different file.
    """
    result = ChangedFeatureSet()
    old_by_file = _spans_by_file(old_spans)
    new_by_file = _spans_by_file(new_spans)
    exts = tuple(code_extensions)

    for hunk in hunks:
        if hunk.kind == BINARY_CHANGED or not hunk.file.lower().endswith(exts):
            result.add(BASE, hunk.file, hunk)
            continue
        touched = False
        for span in old_by_file.get(hunk.file, ()):
            if _ranges_intersect(hunk.old_range, (span.from_line, span.to_line)):
                result.add(span.feature, hunk.file, hunk)
                touched = True
        for span in new_by_file.get(hunk.file, ()):
            if _ranges_intersect(hunk.new_range, (span.from_line, span.to_line)):
                result.add(span.feature, hunk.file, hunk)
                touched = True
        if not touched:
            # a real change that no feature owns (blank-only lines, say)
            result.add(BASE, hunk.file, hunk)

    for feature in (set(new_features) - set(old_features)) | (set(old_features) - set(new_features)):
        if feature in result.features:
            continue
        evidence = _membership_evidence(feature, hunks, macro_files)
        if evidence:
            for file, hunk in evidence:
                result.add(feature, file, hunk)
    return result


def _membership_evidence(feature: str, hunks: List[DiffHunk],
                         macro_files: Optional[Mapping[str, Set[str]]]):
    if not hunks:
        return []
    if macro_files and feature in macro_files:
        related = [(h.file, h) for h in hunks if h.file in macro_files[feature]]
        if related:
            return related
    return [(hunks[0].file, hunks[0])]


def parse_patch_file(path) -> List[DiffHunk]:
    with open(path, "r", encoding="utf-8") as fh:
        return diffs.parse_unified_diff(fh.read())


def reconstruct_old_files(new: Snapshot, patch_hunks: List[DiffHunk]) -> Dict[str, str]:
    """Reverse-apply a parsed patch onto the new snapshot to recover the old
    file texts.  Only hunks that carry content can be reversed; files whose
    hunks have no content fall back to the new text."""
    old_files = dict(new.files)
    by_file: Dict[str, List[DiffHunk]] = {}
    for h in patch_hunks:
        by_file.setdefault(h.file, []).append(h)
    for path, file_hunks in by_file.items():
        base = new.files.get(path, "")
        if all(not h.old_lines and not h.new_lines for h in file_hunks):
            old_files[path] = base  # header-only patch, cannot reverse
            continue
        reversed_hunks = [diffs.reverse_hunk(h) for h in file_hunks]
        text = diffs.apply_hunks(base, reversed_hunks)
        if text:
            old_files[path] = text
        else:
            old_files.pop(path, None)  # the patch created this file
    return old_files
