"""Streaming ingestion of EMBER-format JSONL corpora.

Records are validated strictly by default: the upstream corpus is assumed
complete, so a missing field means corruption and should surface early.
An opt-in lenient mode substitutes zeros/empties instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator

import pandas as pd

from .errors import (
    InconsistentManifest,
    IoFailure,
    MalformedJson,
    MissingFragment,
    SchemaViolation,
)
from .fragments import FragmentManifest

DEFAULT_CHUNK_SIZE = 50_000

STRINGS_FIELDS = (
    "numstrings", "avlength", "printables", "entropy",
    "paths", "urls", "registry", "MZ",
)
GENERAL_FIELDS = (
    "size", "vsize", "has_debug", "exports", "imports",
    "has_relocations", "has_resources", "has_signature", "has_tls", "symbols",
)
OPTIONAL_HEADER_NUMERICS = (
    "major_image_version", "minor_image_version",
    "major_linker_version", "minor_linker_version",
    "major_operating_system_version", "minor_operating_system_version",
    "major_subsystem_version", "minor_subsystem_version",
    "sizeof_code", "sizeof_headers", "sizeof_heap_commit",
)

AVCLASS_SENTINEL = "-"


@dataclass
class RawSampleRecord:
    """One parsed EMBER-format sample: raw static features plus metadata."""

    appeared: str
    label: int
    avclass: str | None
    histogram: list = field(repr=False, default_factory=list)
    byteentropy: list = field(repr=False, default_factory=list)
    strings: dict = field(repr=False, default_factory=dict)
    general: dict = field(repr=False, default_factory=dict)
    header: dict = field(repr=False, default_factory=dict)
    section: dict = field(repr=False, default_factory=dict)
    imports: dict = field(repr=False, default_factory=dict)
    exports: list = field(repr=False, default_factory=list)

    @property
    def appeared_timestamp(self) -> datetime:
        """Month string parsed to the first day of the month."""
        return datetime.strptime(self.appeared, "%Y-%m")

    def to_json(self) -> str:
        return json.dumps(
            {
                "appeared": self.appeared,
                "label": self.label,
                "avclass": self.avclass,
                "histogram": self.histogram,
                "byteentropy": self.byteentropy,
                "strings": self.strings,
                "general": self.general,
                "header": self.header,
                "section": self.section,
                "imports": self.imports,
                "exports": self.exports,
            }
        )


def _require(data, key, path, ordinal):
    if key not in data:
        raise SchemaViolation(f"{path}.{key}" if path else key,
                              "missing field", ordinal)
    return data[key]

def _check_numeric(value, path, ordinal, non_negative=True):
    if isinstance(value, bool):
        value = int(value)
    if not isinstance(value, (int, float)):
        raise SchemaViolation(path, f"expected number, got {type(value).__name__}",
                              ordinal)
    if non_negative and value < 0:
        raise SchemaViolation(path, f"negative value {value}", ordinal)
    return value

def _check_count_list(values, arity, path, ordinal):
    if not isinstance(values, list) or len(values) != arity:
        got = len(values) if isinstance(values, list) else type(values).__name__
        raise SchemaViolation(path, f"expected {arity} entries, got {got}",
                              ordinal)
    for i, v in enumerate(values):
        _check_numeric(v, f"{path}[{i}]", ordinal)
    return values

def _check_name_list(values, path, ordinal):
    if not isinstance(values, list):
        raise SchemaViolation(path, "expected list of names", ordinal)
    for i, v in enumerate(values):
        if not isinstance(v, str):
            raise SchemaViolation(f"{path}[{i}]", "expected string", ordinal)
    return values


def _empty_record_data() -> dict:
    return {
        "appeared": "1970-01",
        "label": 0,
        "avclass": None,
        "histogram": [0] * 256,
        "byteentropy": [0] * 256,
        "strings": {
            "numstrings": 0, "avlength": 0, "printabledist": [0] * 96,
            "printables": 0, "entropy": 0, "paths": 0, "urls": 0,
            "registry": 0, "MZ": 0,
        },
        "general": {k: 0 for k in GENERAL_FIELDS},
        "header": {
            "coff": {"timestamp": 0, "machine": "", "characteristics": []},
            "optional": {
                "subsystem": "", "dll_characteristics": [], "magic": "",
                **{k: 0 for k in OPTIONAL_HEADER_NUMERICS},
            },
        },
        "section": {"entry": "", "sections": []},
        "imports": {},
        "exports": [],
    }


def parse_record(line: str, ordinal: int | None = None,
                 lenient: bool = False) -> RawSampleRecord:
    """Parse and validate one JSONL line into a RawSampleRecord."""
    try:
        data = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedJson(str(exc), line_number=ordinal) from exc
    if not isinstance(data, dict):
        raise MalformedJson("top-level JSON value is not an object",
                            line_number=ordinal)

    if lenient:
        merged = _empty_record_data()
        for key, default in merged.items():
            value = data.get(key, default)
            if isinstance(default, dict) and isinstance(value, dict) and key != "imports":
                filled = dict(default)
                for sub, sub_default in default.items():
                    sub_value = value.get(sub, sub_default)
                    if isinstance(sub_default, dict) and isinstance(sub_value, dict):
                        inner = dict(sub_default)
                        inner.update(sub_value)
                        sub_value = inner
                    filled[sub] = sub_value
                value = filled
            merged[key] = value
        data = merged

    appeared = _require(data, "appeared", "", ordinal)
    if not isinstance(appeared, str):
        raise SchemaViolation("appeared", "expected string", ordinal)
    try:
        datetime.strptime(appeared, "%Y-%m")
    except ValueError:
        raise SchemaViolation("appeared",
                              f"not a YYYY-MM month: {appeared!r}", ordinal)

    label = _require(data, "label", "", ordinal)
    if label not in (-1, 0, 1) or isinstance(label, bool):
        raise SchemaViolation("label", f"expected -1/0/1, got {label!r}", ordinal)

    avclass = data.get("avclass")
    if avclass is not None and not isinstance(avclass, str):
        raise SchemaViolation("avclass", "expected string or null", ordinal)

    histogram = _check_count_list(_require(data, "histogram", "", ordinal),
                                  256, "histogram", ordinal)
    byteentropy = _check_count_list(_require(data, "byteentropy", "", ordinal),
                                    256, "byteentropy", ordinal)

    strings = _require(data, "strings", "", ordinal)
    if not isinstance(strings, dict):
        raise SchemaViolation("strings", "expected object", ordinal)
    for key in STRINGS_FIELDS:
        _check_numeric(_require(strings, key, "strings", ordinal),
                       f"strings.{key}", ordinal)
    _check_count_list(_require(strings, "printabledist", "strings", ordinal),
                      96, "strings.printabledist", ordinal)

    general = _require(data, "general", "", ordinal)
    if not isinstance(general, dict):
        raise SchemaViolation("general", "expected object", ordinal)
    for key in GENERAL_FIELDS:
        _check_numeric(_require(general, key, "general", ordinal),
                       f"general.{key}", ordinal)

    header = _require(data, "header", "", ordinal)
    if not isinstance(header, dict):
        raise SchemaViolation("header", "expected object", ordinal)
    coff = _require(header, "coff", "header", ordinal)
    _check_numeric(_require(coff, "timestamp", "header.coff", ordinal),
                   "header.coff.timestamp", ordinal, non_negative=False)
    machine = _require(coff, "machine", "header.coff", ordinal)
    if not isinstance(machine, str):
        raise SchemaViolation("header.coff.machine", "expected string", ordinal)
    _check_name_list(_require(coff, "characteristics", "header.coff", ordinal),
                     "header.coff.characteristics", ordinal)
    optional = _require(header, "optional", "header", ordinal)
    subsystem = _require(optional, "subsystem", "header.optional", ordinal)
    if not isinstance(subsystem, str):
        raise SchemaViolation("header.optional.subsystem", "expected string",
                              ordinal)
    _check_name_list(
        _require(optional, "dll_characteristics", "header.optional", ordinal),
        "header.optional.dll_characteristics", ordinal)
    magic = _require(optional, "magic", "header.optional", ordinal)
    if not isinstance(magic, str):
        raise SchemaViolation("header.optional.magic", "expected string", ordinal)
    for key in OPTIONAL_HEADER_NUMERICS:
        _check_numeric(_require(optional, key, "header.optional", ordinal),
                       f"header.optional.{key}", ordinal)

    section = _require(data, "section", "", ordinal)
    entry = _require(section, "entry", "section", ordinal)
    if not isinstance(entry, str):
        raise SchemaViolation("section.entry", "expected string", ordinal)
    sections = _require(section, "sections", "section", ordinal)
    if not isinstance(sections, list):
        raise SchemaViolation("section.sections", "expected list", ordinal)
    for i, sec in enumerate(sections):
        if not isinstance(sec, dict):
            raise SchemaViolation(f"section.sections[{i}]", "expected object",
                                  ordinal)
        name = _require(sec, "name", f"section.sections[{i}]", ordinal)
        if not isinstance(name, str):
            raise SchemaViolation(f"section.sections[{i}].name",
                                  "expected string", ordinal)
        for key in ("size", "entropy", "vsize"):
            _check_numeric(_require(sec, key, f"section.sections[{i}]", ordinal),
                           f"section.sections[{i}].{key}", ordinal)
        _check_name_list(_require(sec, "props", f"section.sections[{i}]", ordinal),
                         f"section.sections[{i}].props", ordinal)

    imports = _require(data, "imports", "", ordinal)
    if not isinstance(imports, dict):
        raise SchemaViolation("imports", "expected object", ordinal)
    for dll, funcs in imports.items():
        _check_name_list(funcs, f"imports[{dll!r}]", ordinal)

    exports = _check_name_list(_require(data, "exports", "", ordinal),
                               "exports", ordinal)

    return RawSampleRecord(
        appeared=appeared, label=label, avclass=avclass,
        histogram=histogram, byteentropy=byteentropy, strings=strings,
        general=general, header=header, section=section,
        imports=imports, exports=exports,
    )


def stream_records(path: str, chunk_size: int = DEFAULT_CHUNK_SIZE,
                   lenient: bool = False) -> Iterator[list[RawSampleRecord]]:
    """Yield chunks of <= chunk_size records in file order.

    Peak memory is proportional to chunk_size, never to file size.
    Parse errors carry the 1-based line number.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot open {path}: {exc}") from exc
    with fh:
        chunk: list[RawSampleRecord] = []
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            chunk.append(parse_record(line, ordinal=line_number, lenient=lenient))
            if len(chunk) == chunk_size:
                yield chunk
                chunk = []
        if chunk:
            yield chunk


METADATA_COLUMNS = ["appeared", "label", "avclass", "index", "fragment"]


def build_metadata_index(manifest: FragmentManifest) -> pd.DataFrame:
    """One metadata row per vectorized sample, ordered by (fragment, index)."""
    parts = []
    for info in manifest.fragments:
        path = manifest.fragment_path(info.fragment_id)
        try:
            meta = pd.read_csv(path, usecols=["appeared", "label", "avclass"],
                               dtype={"appeared": str, "label": int,
                                      "avclass": str})
        except FileNotFoundError as exc:
            raise MissingFragment(path) from exc
        if len(meta) != info.rows:
            raise InconsistentManifest(
                f"fragment {info.fragment_id}: manifest says {info.rows} rows, "
                f"file has {len(meta)}")
        meta["index"] = range(len(meta))
        meta["fragment"] = info.fragment_id
        parts.append(meta)
    if not parts:
        return pd.DataFrame(columns=METADATA_COLUMNS)
    index = pd.concat(parts, ignore_index=True)
    return index[METADATA_COLUMNS]


def save_metadata_index(index: pd.DataFrame, path: str) -> None:
    index.to_csv(path, index=False)


def load_metadata_index(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype={"appeared": str, "label": int,
                                        "avclass": str, "index": int,
                                        "fragment": int})
    except OSError as exc:
        raise IoFailure(f"cannot read metadata index: {exc}") from exc
