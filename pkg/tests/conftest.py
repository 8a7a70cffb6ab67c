"""Shared fixtures: a small synthetic corpus vectorized once per session."""

import json

import pytest

from malbench import ingest, sample, synth, vectorize


def make_record_data(**overrides):
    """A minimal schema-valid record as a plain dict."""
    data = {
        "appeared": "2018-03",
        "label": 1,
        "avclass": "ramnit",
        "histogram": [0] * 256,
        "byteentropy": [0] * 256,
        "strings": {
            "numstrings": 10, "avlength": 5.5, "printabledist": [1] * 96,
            "printables": 55, "entropy": 4.2, "paths": 1, "urls": 0,
            "registry": 0, "MZ": 1,
        },
        "general": {
            "size": 1000, "vsize": 1200, "has_debug": 0, "exports": 0,
            "imports": 3, "has_relocations": 1, "has_resources": 1,
            "has_signature": 0, "has_tls": 0, "symbols": 0,
        },
        "header": {
            "coff": {"timestamp": 1_500_000_000, "machine": "I386",
                     "characteristics": ["EXECUTABLE_IMAGE"]},
            "optional": {
                "subsystem": "WINDOWS_GUI",
                "dll_characteristics": ["DYNAMIC_BASE"],
                "magic": "PE32",
                "major_image_version": 1, "minor_image_version": 0,
                "major_linker_version": 9, "minor_linker_version": 0,
                "major_operating_system_version": 6,
                "minor_operating_system_version": 1,
                "major_subsystem_version": 6, "minor_subsystem_version": 1,
                "sizeof_code": 4096, "sizeof_headers": 1024,
                "sizeof_heap_commit": 4096,
            },
        },
        "section": {
            "entry": ".text",
            "sections": [{"name": ".text", "size": 4096, "entropy": 6.1,
                          "vsize": 4096,
                          "props": ["CNT_CODE", "MEM_EXECUTE", "MEM_READ"]}],
        },
        "imports": {"KERNEL32.dll": ["CreateFileA", "ReadFile"],
                    "USER32.dll": ["MessageBoxA"]},
        "exports": [],
    }
    data.update(overrides)
    return data


def make_record_line(**overrides) -> str:
    return json.dumps(make_record_data(**overrides))


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    cfg = synth.SynthConfig(n_samples=2500, separability=2.0, seed=42)
    synth.generate_corpus(cfg, str(path))
    return str(path)


@pytest.fixture(scope="session")
def manifest(corpus_path, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("fragments")
    return vectorize.vectorize_corpus([corpus_path], str(out_dir),
                                      fragment_size=1000)


@pytest.fixture(scope="session")
def metadata_index(manifest):
    return ingest.build_metadata_index(manifest)


@pytest.fixture(scope="session")
def pools(metadata_index):
    return sample.partition_pools(metadata_index, sample.SplitConfig())
