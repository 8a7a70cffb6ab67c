"""Synthetic EMBER-format corpus generation.

Produces schema-valid JSONL with controllable class separability so the
whole pipeline can be exercised at desk scale without the real corpus.
The separability knob shifts a designated subset of numeric features
(byte histograms, string statistics, a few general fields) for malware;
hashed-name features get a class skew that also scales with the knob, so
at zero separability the two classes are identically distributed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IoFailure

DEFAULT_FAMILIES = ["ramnit", "zeus", "emotet", "adposhel", "ursnif"]

_DLL_VOCAB = ["KERNEL32.dll", "USER32.dll", "ADVAPI32.dll", "SHELL32.dll",
              "GDI32.dll", "WS2_32.dll", "CRYPT32.dll", "WININET.dll"]
_FUNC_VOCAB = ["CreateFileA", "ReadFile", "WriteFile", "GetProcAddress",
               "LoadLibraryA", "RegOpenKeyExA", "connect", "send", "recv",
               "CryptEncrypt", "InternetOpenA", "VirtualAlloc"]
_EXPORT_VOCAB = ["DllMain", "Start", "Run", "Init", "Update", "GetVersion"]
_SECTION_NAMES = [".text", ".data", ".rdata", ".rsrc", ".reloc"]
_MACHINES = ["I386", "AMD64", "ARM"]
_SUBSYSTEMS = ["WINDOWS_GUI", "WINDOWS_CUI", "NATIVE"]
_COFF_CHARS = ["EXECUTABLE_IMAGE", "CHARA_32BIT_MACHINE", "DLL",
               "RELOCS_STRIPPED", "LINE_NUMS_STRIPPED"]
_DLL_CHARS = ["DYNAMIC_BASE", "NX_COMPAT", "TERMINAL_SERVER_AWARE", "NO_SEH"]
_SECTION_PROPS = ["CNT_CODE", "MEM_EXECUTE", "MEM_READ", "MEM_WRITE",
                  "CNT_INITIALIZED_DATA", "MEM_DISCARDABLE"]

# Number of histogram / byte-entropy dimensions carrying the class shift.
_SHIFTED_DIMS = 64
_HIST_LAM = 50.0
_BENT_LAM = 30.0

DEFAULT_SHARD_SIZE = 10_000


@dataclass
class SynthConfig:
    n_samples: int
    malware_fraction: float = 0.5
    families: list = field(default_factory=lambda: list(DEFAULT_FAMILIES))
    family_weights: list | None = None
    separability: float = 1.0
    start_month: str = "2018-01"
    end_month: str = "2019-01"
    unlabeled_fraction: float = 0.0
    seed: int = 1337

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 < self.malware_fraction < 1.0:
            raise ValueError("malware_fraction must be in (0,1)")
        if self.separability < 0:
            raise ValueError("separability must be >= 0")
        if self.family_weights is None:
            self.family_weights = [1.0 / len(self.families)] * len(self.families)
        if len(self.family_weights) != len(self.families):
            raise ValueError("family_weights length mismatch")
        if abs(sum(self.family_weights) - 1.0) > 1e-9:
            raise ValueError("family_weights must sum to 1")
        if not (self.start_month <= "2018-07" and self.end_month >= "2018-08"):
            raise ValueError("date range must span the default split date "
                             "(2018-07-31) on both sides")

    def months(self) -> list[str]:
        y0, m0 = (int(x) for x in self.start_month.split("-"))
        y1, m1 = (int(x) for x in self.end_month.split("-"))
        out = []
        y, m = y0, m0
        while (y, m) <= (y1, m1):
            out.append(f"{y:04d}-{m:02d}")
            m += 1
            if m == 13:
                y, m = y + 1, 1
        return out

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "malware_fraction": self.malware_fraction,
            "families": self.families,
            "family_weights": self.family_weights,
            "separability": self.separability,
            "start_month": self.start_month,
            "end_month": self.end_month,
            "unlabeled_fraction": self.unlabeled_fraction,
            "seed": self.seed,
        }


def _choose_names(rng, vocab, k, hot_boost):
    """Sample k distinct names; hot_boost skews toward the vocab tail."""
    weights = np.ones(len(vocab))
    half = len(vocab) // 2
    weights[half:] += hot_boost
    weights /= weights.sum()
    k = min(k, len(vocab))
    picks = rng.choice(len(vocab), size=k, replace=False, p=weights)
    return [vocab[i] for i in sorted(picks)]


def _generate_shard(cfg: SynthConfig, rng: np.random.Generator,
                    n: int) -> list[str]:
    months = cfg.months()
    delta = cfg.separability

    u = rng.random(n)
    labels = np.where(u < cfg.unlabeled_fraction, -1,
                      np.where(u < cfg.unlabeled_fraction
                               + cfg.malware_fraction
                               * (1 - cfg.unlabeled_fraction), 1, 0))
    month_idx = rng.integers(0, len(months), size=n)
    family_idx = rng.choice(len(cfg.families), size=n, p=cfg.family_weights)

    is_malware = labels == 1
    hist_lam = np.full((n, 256), _HIST_LAM)
    hist_lam[is_malware, :_SHIFTED_DIMS] += delta * 0.1 * math.sqrt(_HIST_LAM)
    bent_lam = np.full((n, 256), _BENT_LAM)
    bent_lam[is_malware, :_SHIFTED_DIMS] += delta * 0.1 * math.sqrt(_BENT_LAM)
    histograms = rng.poisson(hist_lam)
    byteentropies = rng.poisson(bent_lam)
    printdists = rng.poisson(20.0, size=(n, 96))

    numstrings = rng.poisson(500.0, size=n)
    avlength = np.round(rng.gamma(4.0, 2.0, size=n), 4)
    str_entropy = np.round(
        np.clip(rng.normal(4.0 + 0.05 * delta * is_malware, 0.5, size=n),
                0.0, None), 4)
    sizes = rng.integers(20_000, 2_000_000, size=n)
    size_shift = (1.0 + 0.02 * delta * is_malware)
    sizes = (sizes * size_shift).astype(np.int64)

    # Name skew scales with separability so delta=0 keeps the classes
    # identically distributed.
    hot = min(1.0, delta) * 2.0

    lines = []
    for i in range(n):
        malware = bool(is_malware[i])
        n_dlls = int(rng.integers(2, 6))
        imports = {}
        for dll in _choose_names(rng, _DLL_VOCAB, n_dlls,
                                 hot if malware else 0.0):
            n_funcs = int(rng.integers(1, 5))
            imports[dll] = _choose_names(rng, _FUNC_VOCAB, n_funcs,
                                         hot if malware else 0.0)
        n_exports = int(rng.integers(0, 3))
        exports = _choose_names(rng, _EXPORT_VOCAB, n_exports,
                                hot if malware else 0.0) if n_exports else []

        n_sections = int(rng.integers(2, len(_SECTION_NAMES) + 1))
        section_names = _SECTION_NAMES[:n_sections]
        sections = []
        for name in section_names:
            sections.append({
                "name": name,
                "size": int(rng.integers(512, 500_000)),
                "entropy": round(float(rng.uniform(1.0, 8.0)), 4),
                "vsize": int(rng.integers(512, 500_000)),
                "props": [p for p in _SECTION_PROPS if rng.random() < 0.4],
            })

        n_coff = int(rng.integers(1, len(_COFF_CHARS) + 1))
        magic = "PE32" if rng.random() < 0.7 else "PE32_PLUS"
        record = {
            "appeared": months[month_idx[i]],
            "label": int(labels[i]),
            "avclass": cfg.families[family_idx[i]] if malware else None,
            "histogram": [int(x) for x in histograms[i]],
            "byteentropy": [int(x) for x in byteentropies[i]],
            "strings": {
                "numstrings": int(numstrings[i]),
                "avlength": float(avlength[i]),
                "printabledist": [int(x) for x in printdists[i]],
                "printables": int(numstrings[i] * max(avlength[i], 1.0)),
                "entropy": float(str_entropy[i]),
                "paths": int(rng.poisson(3.0)),
                "urls": int(rng.poisson(2.0)),
                "registry": int(rng.poisson(1.0)),
                "MZ": int(rng.poisson(1.0)),
            },
            "general": {
                "size": int(sizes[i]),
                "vsize": int(sizes[i] * rng.uniform(1.0, 1.5)),
                "has_debug": int(rng.random() < 0.3),
                "exports": len(exports),
                "imports": sum(len(v) for v in imports.values()),
                "has_relocations": int(rng.random() < 0.6),
                "has_resources": int(rng.random() < 0.7),
                "has_signature": int(rng.random() < 0.2),
                "has_tls": int(rng.random() < 0.2),
                "symbols": int(rng.poisson(2.0)),
            },
            "header": {
                "coff": {
                    "timestamp": int(rng.integers(1_000_000_000, 1_600_000_000)),
                    "machine": _MACHINES[int(rng.integers(0, len(_MACHINES)))],
                    "characteristics": _COFF_CHARS[:n_coff],
                },
                "optional": {
                    "subsystem": _SUBSYSTEMS[int(rng.integers(0, len(_SUBSYSTEMS)))],
                    "dll_characteristics": [c for c in _DLL_CHARS
                                            if rng.random() < 0.4],
                    "magic": magic,
                    "major_image_version": int(rng.integers(0, 10)),
                    "minor_image_version": int(rng.integers(0, 10)),
                    "major_linker_version": int(rng.integers(2, 15)),
                    "minor_linker_version": int(rng.integers(0, 30)),
                    "major_operating_system_version": int(rng.integers(4, 11)),
                    "minor_operating_system_version": int(rng.integers(0, 4)),
                    "major_subsystem_version": int(rng.integers(4, 11)),
                    "minor_subsystem_version": int(rng.integers(0, 4)),
                    "sizeof_code": int(rng.integers(512, 1_000_000)),
                    "sizeof_headers": int(rng.integers(512, 4096)),
                    "sizeof_heap_commit": int(rng.integers(0, 8192)),
                },
            },
            "section": {"entry": ".text", "sections": sections},
            "imports": imports,
            "exports": exports,
        }
        lines.append(json.dumps(record))
    return lines


def generate_corpus(cfg: SynthConfig, out_path: str,
                    shard_size: int = DEFAULT_SHARD_SIZE) -> str:
    """Write a synthetic JSONL corpus; deterministic per cfg.seed.

    Generation is sharded with per-shard derived seeds, so shards could be
    produced in parallel; output order is fixed by shard index.
    """
    n_shards = (cfg.n_samples + shard_size - 1) // shard_size
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_shards)
    try:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            for shard in range(n_shards):
                n = min(shard_size, cfg.n_samples - shard * shard_size)
                rng = np.random.default_rng(seeds[shard])
                for line in _generate_shard(cfg, rng, n):
                    fh.write(line + "\n")
        meta_path = out_path + ".meta.json"
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write corpus: {exc}") from exc
    return out_path
