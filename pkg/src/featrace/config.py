"""Run configuration: plain key:value lines.

Recognized keys (case-insensitive): repository_URL, system_path, test_name,
test_folder, prioritization, code_extensions.  At least one of test_name /
test_folder must be present.  repository_URL is accepted for compatibility
with existing config files but local snapshots are authoritative, so it is
never dereferenced.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .preproc import DEFAULT_CODE_EXTENSIONS


class ConfigError(Exception):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class MissingKey(ConfigError):
    pass


@dataclass
class Config:
    repository_url: Optional[str] = None
    system_path: Optional[str] = None
    test_name: Optional[str] = None
    test_folder: Optional[str] = None
    prioritization: bool = True
    code_extensions: Tuple[str, ...] = DEFAULT_CODE_EXTENSIONS
    warnings: List[str] = field(default_factory=list)


_KNOWN_KEYS = {"repository_url", "system_path", "test_name", "test_folder",
               "prioritization", "code_extensions"}


def parse_config(text: str, check_paths: bool = True) -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ConfigError(f"expected key: value, got {line!r}", lineno)
        key, _, value = line.partition(":")
        key = key.strip().lower()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            cfg.warnings.append(f"line {lineno}: unknown key {key!r} ignored")
            continue
        if key == "repository_url":
            cfg.repository_url = value or None
        elif key == "system_path":
            cfg.system_path = value or None
        elif key == "test_name":
            cfg.test_name = value or None
        elif key == "test_folder":
            cfg.test_folder = value or None
        elif key == "prioritization":
            if value not in ("0", "1"):
                raise ConfigError(f"prioritization must be 1 or 0, got {value!r}", lineno)
            cfg.prioritization = value == "1"
        elif key == "code_extensions":
            exts = tuple(e.strip() for e in value.split(",") if e.strip())
            bad = [e for e in exts if not e.startswith(".")]
            if bad:
                raise ConfigError(f"extensions must start with '.', got {bad}", lineno)
            if exts:
                cfg.code_extensions = exts
    if not cfg.test_name and not cfg.test_folder:
        raise MissingKey("config must set test_name and/or test_folder")
    if check_paths and cfg.system_path and not os.path.isdir(cfg.system_path):
        raise ConfigError(f"system_path {cfg.system_path!r} does not exist")
    return cfg


def load_config(path, check_paths: bool = True) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), check_paths=check_paths)
