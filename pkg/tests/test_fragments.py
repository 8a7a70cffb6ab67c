import pytest

from malbench import fragments
from malbench.errors import InconsistentManifest, IoFailure, MissingFragment
from malbench.fragments import (
    FragmentInfo,
    FragmentManifest,
    check_fragment_rows,
    load_manifest,
)


def _write_fragment(dirpath, fragment_id, rows):
    path = dirpath / fragments.fragment_name(fragment_id)
    path.write_text("h\n" + "".join(f"{i}\n" for i in range(rows)))


def test_manifest_roundtrip(tmp_path):
    _write_fragment(tmp_path, 0, 3)
    _write_fragment(tmp_path, 1, 2)
    man = FragmentManifest(out_dir=str(tmp_path), fingerprint="abc",
                           fragments=[FragmentInfo(0, 3), FragmentInfo(1, 2)])
    man.save()
    loaded = load_manifest(str(tmp_path))
    assert loaded.fingerprint == "abc"
    assert [(f.fragment_id, f.rows) for f in loaded.fragments] == [(0, 3), (1, 2)]
    assert loaded.total_rows == 5
    assert loaded.fragment_path(1).endswith("data1.csv")


def test_load_manifest_missing_dir(tmp_path):
    with pytest.raises(IoFailure):
        load_manifest(str(tmp_path / "nope"))


def test_load_manifest_missing_fragment(tmp_path):
    man = FragmentManifest(out_dir=str(tmp_path), fingerprint="abc",
                           fragments=[FragmentInfo(0, 3)])
    man.save()
    with pytest.raises(MissingFragment):
        load_manifest(str(tmp_path))


def test_check_fragment_rows(tmp_path):
    _write_fragment(tmp_path, 0, 4)
    man = FragmentManifest(out_dir=str(tmp_path), fingerprint="x",
                           fragments=[FragmentInfo(0, 4)])
    check_fragment_rows(man)  # consistent: no error
    man.fragments[0] = FragmentInfo(0, 5)
    with pytest.raises(InconsistentManifest):
        check_fragment_rows(man)


def test_layout_fingerprint_stable():
    a = fragments.layout_fingerprint("c1,c2")
    assert a == fragments.layout_fingerprint("c1,c2")
    assert a != fragments.layout_fingerprint("c1,c3")
    assert len(a) == 64
