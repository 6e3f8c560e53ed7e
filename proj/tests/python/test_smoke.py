import math
import os
from pathlib import Path

import numpy as np
import pytest

import iwn

DATA = Path(os.environ.get("IWN_TEST_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture(scope="module")
def pair():
    return iwn.load_image(str(DATA / "host.png")), iwn.load_image(str(DATA / "mark.png"))


def test_load_shape_and_range(pair):
    x, w = pair
    assert x.shape == (128, 128, 3)
    assert 0.0 <= x.min() and x.max() <= 1.0


def test_dct_round_trip():
    rng = np.random.default_rng(0)
    plane = rng.random((32, 24))
    assert np.max(np.abs(iwn.idct2(iwn.dct2(plane)) - plane)) < 1e-12
    # Orthonormal: energy is preserved.
    assert math.isclose(np.sum(iwn.dct2(plane) ** 2), np.sum(plane**2), rel_tol=1e-12)


def test_embed_extract_inverse():
    rng = np.random.default_rng(1)
    x = rng.random((16, 16, 3)) * 0.9
    w = rng.random((16, 16, 3))
    x_w, clipped = iwn.embed(x, w, 0.1)
    assert clipped == 0.0
    assert np.max(np.abs(iwn.extract(x_w, x, 0.1) - w)) < 1e-9


def test_metrics(pair):
    x, _ = pair
    assert iwn.psnr(x, x) == math.inf
    assert iwn.ssim(x, x) == 1.0
    noisy = iwn.apply_attack(x, "gaussian_noise", seed=3)
    assert 0.0 < iwn.ssim(x, noisy) < 1.0


def test_attacks_deterministic(pair):
    x, _ = pair
    for kind in iwn.attack_names():
        a = iwn.apply_attack(x, kind, seed=5)
        assert a.shape == x.shape
        assert np.array_equal(a, iwn.apply_attack(x, kind, seed=5))


def test_errors_carry_kind():
    with pytest.raises(iwn.IwnError) as info:
        iwn.extract(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)), 0.0)
    assert info.value.kind == "ZeroStrength"
    with pytest.raises(iwn.IwnError):
        iwn.apply_attack(np.zeros((4, 4, 3)), "blur")


def test_model_round_trip(tmp_path, pair):
    x, _ = pair
    assert iwn.count_parameters("origin") == iwn.Model.build("origin").parameter_count
    m = iwn.Model.build("small", seed=2)
    y = m.forward(x)
    assert y.shape == x.shape and 0.0 <= y.min() and y.max() <= 1.0
    assert np.array_equal(m.project(x, 0), x)
    m.save(str(tmp_path / "m.iwn"))
    assert np.array_equal(iwn.Model.load(str(tmp_path / "m.iwn")).forward(x), y)


def test_short_training_and_evaluation(pair):
    x, w = pair
    m = iwn.train(x, w, variant="small", epochs=1, duplication=2, seed=4)
    assert m.step == 2
    assert len(m.loss_history) == 2
    rows = iwn.evaluate(m, x, w, projections=[1], seeds=[0])
    assert len(rows) == 5
    assert {r["attack"] for r in rows} == set(iwn.attack_names())
