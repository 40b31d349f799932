"""Snapshot loading: a snapshot is a labeled tree of files, text decoded
tolerantly, binaries detected and kept out of line analysis.  Snapshots can
come from plain directories or be exported from a git repository; nothing
downstream depends on git."""

from __future__ import annotations

import hashlib
import io
import posixpath
import subprocess
import tarfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Set

from .preproc import DEFAULT_CODE_EXTENSIONS, decode_source


@dataclass
class Snapshot:
    label: str
    files: Dict[str, str] = field(default_factory=dict)          # text files
    binary_files: Set[str] = field(default_factory=set)
    binary_digests: Dict[str, str] = field(default_factory=dict)

    def paths(self) -> Set[str]:
        return set(self.files) | self.binary_files

    def code_files(self, extensions=DEFAULT_CODE_EXTENSIONS) -> Dict[str, str]:
        exts = tuple(extensions)
        return {p: t for p, t in sorted(self.files.items())
                if p.lower().endswith(exts)}


def normalize_path(path: str) -> str:
    p = path.replace("\\", "/")
    p = posixpath.normpath(p)
    if p.startswith("./"):
        p = p[2:]
    return p.lstrip("/")


def _is_binary(data: bytes) -> bool:
    return b"\0" in data[:8192]


def empty_snapshot(label: str) -> Snapshot:
    return Snapshot(label)


def load_snapshot(root, label: Optional[str] = None) -> Snapshot:
    """Load every regular file under ``root``; paths are stored relative
    with forward slashes."""
    root = Path(root)
    snap = Snapshot(label or root.name)
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        rel = normalize_path(str(path.relative_to(root)))
        if rel.startswith(".git/"):
            continue
        data = path.read_bytes()
        _add_file(snap, rel, data)
    return snap


def snapshot_from_texts(label: str, files: Dict[str, str]) -> Snapshot:
    """In-memory snapshot, mostly for tests and the patch-input path."""
    snap = Snapshot(label)
    for path, text in files.items():
        snap.files[normalize_path(path)] = text
    return snap


def _add_file(snap: Snapshot, rel: str, data: bytes) -> None:
    if _is_binary(data):
        snap.binary_files.add(rel)
        snap.binary_digests[rel] = hashlib.sha256(data).hexdigest()
    else:
        snap.files[rel] = decode_source(data)


def load_git_snapshot(repo, rev: str) -> Snapshot:
    """Export one revision of a git repo as a snapshot via ``git archive``.
    A convenience only; analysis never touches the repository again."""
    archive = subprocess.run(
        ["git", "-C", str(repo), "archive", "--format=tar", rev],
        check=True, capture_output=True,
    ).stdout
    snap = Snapshot(rev)
    with tarfile.open(fileobj=io.BytesIO(archive)) as tar:
        for member in tar.getmembers():
            if not member.isfile():
                continue
            handle = tar.extractfile(member)
            if handle is None:
                continue
            rel = normalize_path(member.name)
            _add_file(snap, rel, handle.read())
    return snap
