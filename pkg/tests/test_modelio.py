from importlib.resources import files

import numpy as np
import pytest

from adobing.bing import LinearModel, default_base_model
from adobing.modelio import (
    ModelFileError,
    dumps_model,
    load_model,
    load_model_with_provenance,
    loads_model,
    model_hash,
    save_model,
)


def test_roundtrip_is_exact(tmp_path):
    m = LinearModel(np.random.default_rng(0).normal(size=64))
    save_model(tmp_path / "m.json", m, {"C": 0.01})
    back, prov = load_model_with_provenance(tmp_path / "m.json")
    assert back == m and prov == {"C": 0.01}


def test_dump_is_stable():
    m = LinearModel(np.arange(64) / 7.0)
    assert dumps_model(m) == dumps_model(LinearModel(np.arange(64) / 7.0))


def test_hash_distinguishes_models():
    a = LinearModel(np.zeros(64))
    b = LinearModel(np.r_[1e-12, np.zeros(63)])
    assert model_hash(a) != model_hash(b)
    assert model_hash(a).startswith("sha256:")


@pytest.mark.parametrize("text", [
    "not json",
    '{"format_version": 1}',
    '{"format_version": 2, "weights": []}',
    '{"format_version": 1, "weights": [1, 2]}',
])
def test_bad_documents(text):
    with pytest.raises(ModelFileError):
        loads_model(text)


def test_shipped_base_model_loads():
    m = default_base_model()
    assert m.w.shape == (64,) and np.any(m.w != 0)
    assert load_model(files("adobing") / "data" / "generic_base.json") == m
