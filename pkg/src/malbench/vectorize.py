"""Fixed-layout 1385-dimension feature vectorization.

The layout is: a format-agnostic block (byte histogram, byte-entropy
histogram, printable-string statistics; 616 columns) followed by a parsed
block (general file properties, PE header one-hots, hashed sections,
hashed imports/exports; 769 columns). Unbounded name spaces (DLLs,
functions, exports, section names) are mapped to fixed bucket counts with
a deterministic 64-bit FNV-1a hash, so fragments are bit-reproducible
across runs, processes and platforms.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IoFailure, MalformedJson, SchemaViolation
from .fragments import (
    FragmentInfo,
    FragmentManifest,
    fragment_name,
    layout_fingerprint,
)
from .ingest import RawSampleRecord, stream_records

DEFAULT_FRAGMENT_SIZE = 50_000

HIST_SIZE = 256
PRINTDIST_SIZE = 96
HASH_TRICK_DLL = 128
HASH_TRICK_IMPORT = 256
HASH_TRICK_EXPORT = 128
HASH_TRICK_SECTIONS = 50

COFF_MACHINES = [
    "AMD64", "ARM", "ARMNT", "I386", "IA64", "MIPS16", "MIPSFPU",
    "POWERPC", "R4000", "SH3", "SH4", "THUMB",
]

COFF_CHARACTERISTICS = [
    "AGGRESSIVE_WS_TRIM", "BYTES_REVERSED_HI", "BYTES_REVERSED_LO",
    "CHARA_32BIT_MACHINE", "DEBUG_STRIPPED", "DLL", "EXECUTABLE_IMAGE",
    "LARGE_ADDRESS_AWARE", "LINE_NUMS_STRIPPED", "LOCAL_SYMS_STRIPPED",
    "NET_RUN_FROM_SWAP", "RELOCS_STRIPPED", "REMOVABLE_RUN_FROM_SWAP",
    "SYSTEM", "UP_SYSTEM_ONLY",
]

SUBSYSTEMS = [
    "EFI_APPLICATION", "EFI_BOOT_SERVICE_DRIVER", "EFI_RUNTIME_DRIVER",
    "NATIVE", "POSIX_CUI", "UNKNOWN", "WINDOWS_BOOT_APPLICATION",
    "WINDOWS_CE_GUI", "WINDOWS_CUI", "WINDOWS_GUI", "XBOX",
]

DLL_CHARACTERISTICS = [
    "APPCONTAINER", "DYNAMIC_BASE", "FORCE_INTEGRITY", "GUARD_CF",
    "HIGH_ENTROPY_VA", "NO_BIND", "NO_ISOLATION", "NO_SEH", "NX_COMPAT",
    "TERMINAL_SERVER_AWARE", "WDM_DRIVER",
]

MAGICS = ["PE32", "PE32_PLUS"]

SECTION_PROPS = [
    "ALIGN_1024BYTES", "ALIGN_128BYTES", "ALIGN_16BYTES", "ALIGN_1BYTES",
    "ALIGN_2048BYTES", "ALIGN_256BYTES", "ALIGN_2BYTES", "ALIGN_32BYTES",
    "ALIGN_4096BYTES", "ALIGN_4BYTES", "ALIGN_512BYTES", "ALIGN_64BYTES",
    "ALIGN_8192BYTES", "ALIGN_8BYTES", "CNT_CODE", "CNT_INITIALIZED_DATA",
    "CNT_UNINITIALIZED_DATA", "GPREL", "LNK_COMDAT", "LNK_INFO",
    "LNK_NRELOC_OVFL", "LNK_OTHER", "LNK_REMOVE", "MEM_16BIT",
    "MEM_DISCARDABLE", "MEM_EXECUTE", "MEM_LOCKED", "MEM_NOT_CACHED",
    "MEM_NOT_PAGED", "MEM_PRELOAD", "MEM_READ", "MEM_SHARED", "MEM_WRITE",
    "TYPE_NO_PAD",
]

GENERAL_ORDER = [
    "size", "vsize", "has_debug", "exports", "imports",
    "has_relocations", "has_resources", "has_signature", "has_tls", "symbols",
]

OPTIONAL_NUMERIC_ORDER = [
    "major_image_version", "minor_image_version",
    "major_linker_version", "minor_linker_version",
    "major_operating_system_version", "minor_operating_system_version",
    "major_subsystem_version", "minor_subsystem_version",
    "sizeof_code", "sizeof_headers", "sizeof_heap_commit",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


@lru_cache(maxsize=1 << 17)
def hash_bucket(s: str, m: int) -> int:
    """Deterministic 64-bit FNV-1a of the UTF-8 bytes, reduced mod m."""
    if m < 1:
        raise ValueError("bucket count must be >= 1")
    h = _FNV_OFFSET
    for b in s.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _U64
    return h % m


def _build_feature_names() -> list[str]:
    names = []
    names += [f"histogram_{i}" for i in range(HIST_SIZE)]
    names += [f"byteentropy_{i}" for i in range(HIST_SIZE)]
    names += ["strings_num", "strings_avlength"]
    names += [f"strings_printabledist_{i}" for i in range(PRINTDIST_SIZE)]
    names += ["strings_printables", "strings_entropy", "strings_paths",
              "strings_urls", "strings_registry", "strings_MZ"]
    names += [f"general_{k}" for k in GENERAL_ORDER]
    names += ["header_coff_timestamp"]
    names += [f"header_coff_machine_{m}" for m in COFF_MACHINES]
    names += [f"header_coff_{c}" for c in COFF_CHARACTERISTICS]
    names += [f"header_opt_subsystem_{s}" for s in SUBSYSTEMS]
    names += [f"header_opt_dll_characteristic_{c}" for c in DLL_CHARACTERISTICS]
    names += [f"header_opt_{m}" for m in MAGICS]
    names += [f"header_opt_{k}" for k in OPTIONAL_NUMERIC_ORDER]
    for i in range(HASH_TRICK_SECTIONS):
        names += [f"sections_h{i}_size", f"sections_h{i}_entropy",
                  f"sections_h{i}_vsize"]
    names += [f"sections_ENTRY_{p}" for p in SECTION_PROPS]
    names += [f"imports_dll_h{i}_imported" for i in range(HASH_TRICK_DLL)]
    names += [f"imports_fun_h{i}_imported" for i in range(HASH_TRICK_IMPORT)]
    names += [f"exports_h{i}" for i in range(HASH_TRICK_EXPORT)]
    return names


@dataclass(frozen=True)
class FeatureLayout:
    """Fixed, ordered feature-column layout shared by every fragment."""

    feature_names: tuple

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def column_names(self) -> tuple:
        return ("appeared",) + self.feature_names + ("label", "avclass")

    @property
    def header_line(self) -> str:
        return ",".join(self.column_names)

    @property
    def fingerprint(self) -> str:
        return layout_fingerprint(self.header_line)


LAYOUT = FeatureLayout(feature_names=tuple(_build_feature_names()))

FORMAT_AGNOSTIC_PREFIXES = ("histogram", "byteentropy", "strings")

FEATURE_SET_VARIANTS = ("format_agnostic", "parsed", "combined")


def feature_columns(variant: str) -> list[str]:
    """Ordered feature-column subset for a feature-set variant."""
    if variant == "combined":
        return list(LAYOUT.feature_names)
    if variant == "format_agnostic":
        return [n for n in LAYOUT.feature_names
                if n.startswith(FORMAT_AGNOSTIC_PREFIXES)]
    if variant == "parsed":
        return [n for n in LAYOUT.feature_names
                if not n.startswith(FORMAT_AGNOSTIC_PREFIXES)]
    raise ValueError(f"unknown feature set {variant!r}")


@dataclass
class FeatureVector:
    appeared: str
    values: np.ndarray
    label: int
    avclass: str


def _record_to_values(r: RawSampleRecord) -> list:
    """Feature values in layout order, as plain Python numbers."""
    vals = []
    vals += r.histogram
    vals += r.byteentropy

    strings = r.strings
    vals.append(strings["numstrings"])
    vals.append(strings["avlength"])
    vals += strings["printabledist"]
    vals.append(strings["printables"])
    vals.append(strings["entropy"])
    vals.append(strings["paths"])
    vals.append(strings["urls"])
    vals.append(strings["registry"])
    vals.append(strings["MZ"])

    general = r.general
    for key in GENERAL_ORDER:
        vals.append(general[key])

    coff = r.header["coff"]
    optional = r.header["optional"]
    vals.append(coff["timestamp"])
    machine = coff["machine"]
    for name in COFF_MACHINES:
        vals.append(1 if machine == name else 0)
    characteristics = coff["characteristics"]
    for name in COFF_CHARACTERISTICS:
        vals.append(1 if name in characteristics else 0)
    subsystem = optional["subsystem"]
    for name in SUBSYSTEMS:
        vals.append(1 if subsystem == name else 0)
    dll_chars = optional["dll_characteristics"]
    for name in DLL_CHARACTERISTICS:
        vals.append(1 if name in dll_chars else 0)
    magic = optional["magic"]
    for name in MAGICS:
        vals.append(1 if magic == name else 0)
    for key in OPTIONAL_NUMERIC_ORDER:
        vals.append(optional[key])

    # Every section is hashed into the bucket table; colliding names are
    # resolved last-writer-wins in section list order.
    entry_name = r.section["entry"]
    entry_section = None
    section_table = {}
    for sec in r.section["sections"]:
        if sec["name"] == entry_name:
            entry_section = sec
        section_table[hash_bucket(sec["name"], HASH_TRICK_SECTIONS)] = sec
    for i in range(HASH_TRICK_SECTIONS):
        sec = section_table.get(i)
        if sec is not None:
            vals += (sec["size"], sec["entropy"], sec["vsize"])
        else:
            vals += (0, 0, 0)
    entry_props = entry_section["props"] if entry_section is not None else ()
    for prop in SECTION_PROPS:
        vals.append(1 if prop in entry_props else 0)

    dll_flags = [0] * HASH_TRICK_DLL
    fun_flags = [0] * HASH_TRICK_IMPORT
    for dll, funcs in r.imports.items():
        dll_flags[hash_bucket(dll, HASH_TRICK_DLL)] = 1
        for func in funcs:
            fun_flags[hash_bucket(f"{dll}:{func}", HASH_TRICK_IMPORT)] = 1
    vals += dll_flags
    vals += fun_flags

    export_flags = [0] * HASH_TRICK_EXPORT
    for name in r.exports:
        export_flags[hash_bucket(name, HASH_TRICK_EXPORT)] = 1
    vals += export_flags

    return vals


def vectorize_record(r: RawSampleRecord,
                     layout: FeatureLayout = LAYOUT) -> FeatureVector:
    values = np.asarray(_record_to_values(r), dtype=np.float64)
    assert values.shape == (layout.n_features,)
    return FeatureVector(
        appeared=r.appeared,
        values=values,
        label=r.label,
        avclass=r.avclass if r.avclass else "-",
    )


def _csv_row(r: RawSampleRecord) -> str:
    vals = _record_to_values(r)
    avclass = r.avclass if r.avclass else "-"
    return f"{r.appeared},{','.join(map(str, vals))},{r.label},{avclass}"


class _FragmentWriter:
    """Rotates CSV fragment files at fragment_size rows."""

    def __init__(self, out_dir: str, fragment_size: int):
        self.out_dir = out_dir
        self.fragment_size = fragment_size
        self.fragments: list[FragmentInfo] = []
        self._fh = None
        self._rows = 0

    def _open_next(self):
        fragment_id = len(self.fragments)
        path = os.path.join(self.out_dir, fragment_name(fragment_id))
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(LAYOUT.header_line + "\n")
        self._rows = 0

    def write(self, row: str):
        if self._fh is None:
            self._open_next()
        self._fh.write(row + "\n")
        self._rows += 1
        if self._rows == self.fragment_size:
            self._close_current()

    def _close_current(self):
        self._fh.close()
        self.fragments.append(
            FragmentInfo(fragment_id=len(self.fragments), rows=self._rows))
        self._fh = None

    def finish(self):
        if self._fh is not None:
            self._close_current()


def vectorize_corpus(input_paths, out_dir: str,
                     fragment_size: int = DEFAULT_FRAGMENT_SIZE,
                     lenient: bool = False) -> FragmentManifest:
    """Vectorize JSONL inputs into numbered CSV fragments plus a manifest.

    Rows are written to disk one at a time, so peak memory is bounded by a
    single record rather than a fragment or the corpus.
    """
    if isinstance(input_paths, (str, os.PathLike)):
        input_paths = [input_paths]
    if fragment_size < 1:
        raise ValueError("fragment_size must be >= 1")
    os.makedirs(out_dir, exist_ok=True)

    writer = _FragmentWriter(out_dir, fragment_size)
    try:
        for path in input_paths:
            for chunk in stream_records(path, chunk_size=1000, lenient=lenient):
                for record in chunk:
                    writer.write(_csv_row(record))
    except MalformedJson as exc:
        raise MalformedJson(f"{path}:{exc.line_number}: {exc}",
                            line_number=exc.line_number) from exc
    except SchemaViolation as exc:
        raise SchemaViolation(
            exc.field_path, f"invalid record at {path}:{exc.record_ordinal}",
            record_ordinal=exc.record_ordinal) from exc
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    writer.finish()

    manifest = FragmentManifest(out_dir=out_dir,
                                fingerprint=LAYOUT.fingerprint,
                                fragments=writer.fragments)
    manifest.save()
    return manifest
