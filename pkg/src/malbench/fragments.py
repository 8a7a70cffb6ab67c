"""Fragment manifest shared by the vectorizer and downstream readers.

A vectorized corpus is stored as numbered CSV fragments ``data0.csv``,
``data1.csv``, ... of bounded row count, plus a ``manifest.json`` listing
per-fragment row counts and a fingerprint of the header line so readers
can detect layout drift.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import InconsistentManifest, IoFailure, MissingFragment

MANIFEST_NAME = "manifest.json"


def fragment_name(fragment_id: int) -> str:
    return f"data{fragment_id}.csv"


def layout_fingerprint(header_line: str) -> str:
    return hashlib.sha256(header_line.encode("utf-8")).hexdigest()


@dataclass
class FragmentInfo:
    fragment_id: int
    rows: int


@dataclass
class FragmentManifest:
    out_dir: str
    fingerprint: str
    fragments: list[FragmentInfo] = field(default_factory=list)

    @property
    def total_rows(self) -> int:
        return sum(f.rows for f in self.fragments)

    def fragment_path(self, fragment_id: int) -> str:
        return os.path.join(self.out_dir, fragment_name(fragment_id))

    def save(self) -> str:
        path = os.path.join(self.out_dir, MANIFEST_NAME)
        payload = {
            "fingerprint": self.fingerprint,
            "fragments": [
                {"id": f.fragment_id, "rows": f.rows} for f in self.fragments
            ],
        }
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(f"cannot write manifest: {exc}") from exc
        return path


def load_manifest(out_dir: str) -> FragmentManifest:
    path = os.path.join(out_dir, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read manifest: {exc}") from exc
    manifest = FragmentManifest(
        out_dir=out_dir,
        fingerprint=payload["fingerprint"],
        fragments=[
            FragmentInfo(fragment_id=f["id"], rows=f["rows"])
            for f in payload["fragments"]
        ],
    )
    for info in manifest.fragments:
        if not os.path.exists(manifest.fragment_path(info.fragment_id)):
            raise MissingFragment(manifest.fragment_path(info.fragment_id))
    return manifest


def check_fragment_rows(manifest: FragmentManifest) -> None:
    """Verify manifest row counts against the actual fragment files."""
    for info in manifest.fragments:
        path = manifest.fragment_path(info.fragment_id)
        if not os.path.exists(path):
            raise MissingFragment(path)
        with open(path, "r", encoding="utf-8") as fh:
            n = sum(1 for _ in fh) - 1  # minus header
        if n != info.rows:
            raise InconsistentManifest(
                f"fragment {info.fragment_id}: manifest says {info.rows} rows, "
                f"file has {n}"
            )
