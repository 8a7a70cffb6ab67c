import json

import pytest

from malbench import ingest
from malbench.errors import MalformedJson, SchemaViolation

from conftest import make_record_data, make_record_line


def test_parse_record_roundtrip():
    line = make_record_line()
    rec = ingest.parse_record(line)
    assert rec.appeared == "2018-03"
    assert rec.label == 1
    assert rec.avclass == "ramnit"
    assert json.loads(rec.to_json()) == json.loads(line)


def test_appeared_timestamp():
    rec = ingest.parse_record(make_record_line(appeared="2019-11"))
    ts = rec.appeared_timestamp
    assert (ts.year, ts.month, ts.day) == (2019, 11, 1)


def test_malformed_json_carries_line_number():
    with pytest.raises(MalformedJson) as exc:
        ingest.parse_record("{not json", ordinal=7)
    assert exc.value.line_number == 7


@pytest.mark.parametrize("bad", [
    {"appeared": "March 2018"},
    {"appeared": 2018},
    {"label": 2},
    {"label": True},
    {"histogram": [0] * 255},
    {"byteentropy": [0] * 257},
    {"histogram": [0] * 255 + [-1]},
    {"avclass": 5},
    {"exports": [1, 2]},
])
def test_schema_violations(bad):
    with pytest.raises(SchemaViolation):
        ingest.parse_record(make_record_line(**bad))


def test_missing_field_strict_vs_lenient():
    data = make_record_data()
    del data["imports"]
    line = json.dumps(data)
    with pytest.raises(SchemaViolation):
        ingest.parse_record(line)
    rec = ingest.parse_record(line, lenient=True)
    assert rec.imports == {}


def test_lenient_fills_nested_defaults():
    rec = ingest.parse_record('{"appeared": "2018-01", "label": 0}',
                              lenient=True)
    assert rec.histogram == [0] * 256
    assert rec.header["coff"]["machine"] == ""
    assert rec.strings["printabledist"] == [0] * 96


def test_stream_records_chunking(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(make_record_line() for _ in range(25)) + "\n")
    chunks = list(ingest.stream_records(str(path), chunk_size=10))
    assert [len(c) for c in chunks] == [10, 10, 5]


def test_stream_records_skips_blank_lines(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(make_record_line() + "\n\n" + make_record_line() + "\n")
    (chunk,) = list(ingest.stream_records(str(path)))
    assert len(chunk) == 2


def test_stream_records_error_line_number(tmp_path):
    path = tmp_path / "c.jsonl"
    lines = [make_record_line() for _ in range(10)]
    lines[6] = "{broken"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MalformedJson) as exc:
        list(ingest.stream_records(str(path), chunk_size=3))
    assert exc.value.line_number == 7


def test_metadata_index_shape(manifest, metadata_index):
    assert list(metadata_index.columns) == [
        "appeared", "label", "avclass", "index", "fragment"]
    assert len(metadata_index) == manifest.total_rows
    # per-fragment indexes restart at zero
    for fragment_id, group in metadata_index.groupby("fragment"):
        assert list(group["index"]) == list(range(len(group)))


def test_metadata_index_avclass_sentinel(metadata_index):
    benign = metadata_index[metadata_index["label"] == 0]
    assert (benign["avclass"] == ingest.AVCLASS_SENTINEL).all()


def test_metadata_index_deterministic(manifest):
    a = ingest.build_metadata_index(manifest)
    b = ingest.build_metadata_index(manifest)
    assert a.equals(b)


def test_metadata_index_save_load(metadata_index, tmp_path):
    path = tmp_path / "index.csv"
    ingest.save_metadata_index(metadata_index, str(path))
    loaded = ingest.load_metadata_index(str(path))
    assert loaded.equals(metadata_index)
