import json

import numpy as np
import pytest

from malbench import ingest, learn, sample, synth, vectorize
from malbench.synth import SynthConfig


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(n_samples=0)
    with pytest.raises(ValueError):
        SynthConfig(n_samples=10, malware_fraction=0.0)
    with pytest.raises(ValueError):
        SynthConfig(n_samples=10, separability=-1.0)
    with pytest.raises(ValueError):
        SynthConfig(n_samples=10, start_month="2018-09")  # misses the split
    with pytest.raises(ValueError):
        SynthConfig(n_samples=10, families=["a", "b"], family_weights=[1.0])


def test_months_enumeration():
    cfg = SynthConfig(n_samples=1, start_month="2017-11", end_month="2018-08")
    months = cfg.months()
    assert months[0] == "2017-11"
    assert months[-1] == "2018-08"
    assert len(months) == 10


def test_generated_records_all_parse(tmp_path):
    path = str(tmp_path / "c.jsonl")
    synth.generate_corpus(SynthConfig(n_samples=300, seed=1,
                                      unlabeled_fraction=0.1), path)
    n = 0
    for chunk in ingest.stream_records(path, chunk_size=100):
        n += len(chunk)  # strict parsing validates every record
    assert n == 300


def test_generate_deterministic(tmp_path):
    cfg = SynthConfig(n_samples=200, seed=5)
    a, b = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
    synth.generate_corpus(cfg, a, shard_size=64)
    synth.generate_corpus(cfg, b, shard_size=64)
    assert open(a, "rb").read() == open(b, "rb").read()


def test_generate_seed_divergence(tmp_path):
    a, b = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
    synth.generate_corpus(SynthConfig(n_samples=50, seed=1), a)
    synth.generate_corpus(SynthConfig(n_samples=50, seed=2), b)
    assert open(a, "rb").read() != open(b, "rb").read()


def test_meta_sidecar(tmp_path):
    path = str(tmp_path / "c.jsonl")
    cfg = SynthConfig(n_samples=20, separability=3.0, seed=9)
    synth.generate_corpus(cfg, path)
    meta = json.load(open(path + ".meta.json"))
    assert meta == cfg.to_dict()


def test_label_and_family_marginals(tmp_path):
    path = str(tmp_path / "c.jsonl")
    synth.generate_corpus(SynthConfig(n_samples=2000, malware_fraction=0.3,
                                      unlabeled_fraction=0.1, seed=3), path)
    labels = [json.loads(line)["label"] for line in open(path)]
    n = len(labels)
    assert abs(labels.count(-1) / n - 0.1) < 0.03
    assert abs(labels.count(1) / n - 0.27) < 0.03
    families = {json.loads(line)["avclass"] for line in open(path)}
    assert None in families  # benign carry no family
    assert len(families - {None}) == len(synth.DEFAULT_FAMILIES)


def _train_test_accuracy(tmp_path, separability, n=4000, seed=0):
    path = str(tmp_path / f"c{separability}.jsonl")
    synth.generate_corpus(
        SynthConfig(n_samples=n, separability=separability, seed=seed), path)
    man = vectorize.vectorize_corpus([path],
                                     str(tmp_path / f"f{separability}"),
                                     fragment_size=2000)
    index = ingest.build_metadata_index(man)
    pools = sample.partition_pools(index, sample.SplitConfig())
    tr = sample.draw_dataset(pools, sample.DatasetSpec(
        role="train", n_malware=300, benign_ratio=1,
        feature_set="combined", seed=1337))
    te = sample.draw_dataset(pools, sample.DatasetSpec(
        role="test", n_malware=300, benign_ratio=1,
        feature_set="combined", seed=1337))
    Xtr, ytr, _ = sample.materialize(tr, man)
    Xte, yte, _ = sample.materialize(te, man)
    model = learn.train("SVM", Xtr, ytr, 1337)
    return float(np.mean(model.predict(Xte) == yte))


def test_zero_separability_is_chance_level(tmp_path):
    acc = _train_test_accuracy(tmp_path, 0.0)
    assert abs(acc - 0.5) < 0.06


def test_high_separability_is_learnable(tmp_path):
    acc = _train_test_accuracy(tmp_path, 8.0)
    assert acc >= 0.99
