"""Corpus manifest CSV: ``speaker_id,group,gender,phrase_id,path``."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

from ..errors import DuplicateEntry, MissingFile, ParseError

HEADER = ["speaker_id", "group", "gender", "phrase_id", "path"]
GROUPS = ("healthy", "als", "ataxic")
GENDERS = ("f", "m")


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    group: str
    gender: str
    phrase_id: int
    path: Path
    line: int = 0


@dataclass
class CorpusManifest:
    entries: List[ManifestEntry]
    source: Path = None

    def by_group(self, group: str) -> List[ManifestEntry]:
        return [e for e in self.entries if e.group == group]

    def speakers(self, group: str = None) -> List[str]:
        seen = dict.fromkeys(e.speaker_id for e in self.entries if group is None or e.group == group)
        return sorted(seen)

    def lookup(self) -> Dict[tuple, ManifestEntry]:
        return {(e.speaker_id, e.phrase_id): e for e in self.entries}


def validate_manifest(path, check_files: bool = True) -> CorpusManifest:
    """Parse and check a manifest; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest {path} not found")
    base = path.parent
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty manifest", 1)
    header = [h.strip().lower() for h in rows[0]]
    if header != HEADER:
        raise ParseError(f"header must be {','.join(HEADER)}, got {','.join(rows[0])}", 1)
    entries, seen, speaker_meta = [], {}, {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise ParseError(f"expected {len(HEADER)} fields, got {len(row)}", lineno)
        spk, group, gender, phrase, rel = (c.strip() for c in row)
        group, gender = group.lower(), gender.lower()
        if not spk:
            raise ParseError("empty speaker_id", lineno)
        if group not in GROUPS:
            raise ParseError(f"unknown group {group!r}", lineno)
        if gender not in GENDERS:
            raise ParseError(f"unknown gender {gender!r}", lineno)
        try:
            phrase_id = int(phrase)
        except ValueError:
            raise ParseError(f"phrase_id {phrase!r} is not an integer", lineno) from None
        if phrase_id < 1:
            raise ParseError("phrase_id must be >= 1", lineno)
        key = (spk, phrase_id)
        if key in seen:
            raise DuplicateEntry(f"duplicate ({spk}, {phrase_id}), first seen on line {seen[key]}", lineno)
        seen[key] = lineno
        if speaker_meta.setdefault(spk, (group, gender)) != (group, gender):
            raise ParseError(f"speaker {spk} changes group or gender", lineno)
        full = Path(rel) if Path(rel).is_absolute() else base / rel
        if check_files and not full.is_file():
            raise MissingFile(f"missing file {rel}", lineno)
        entries.append(ManifestEntry(spk, group, gender, phrase_id, full, lineno))
    return CorpusManifest(entries, path)
