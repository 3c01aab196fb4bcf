import pytest

from transms.dataset import DatasetManifest, paper_scale_plan, plan_dataset
from transms.scanner import ScannerConfig


def test_cartesian_count():
    cfg = ScannerConfig(grid=(8, 8))
    m = plan_dataset(cfg, [0.4, 0.6, 0.8], [20.0, 25.0], n_train=4, n_val=1, n_test=1)
    assert len(m.entries) == 6
    assert len(m.split("train")) == 4


def test_split_sizes_must_cover_pool():
    cfg = ScannerConfig(grid=(8, 8))
    with pytest.raises(ValueError):
        plan_dataset(cfg, [0.4, 0.6], [20.0], n_train=3, n_val=0, n_test=0)


def test_paper_scale_split_sizes():
    m = paper_scale_plan()
    assert len(m.split("train")) == 66
    assert len(m.split("val")) == 30
    assert len(m.split("test")) == 34
    # train+test pool of 100, all extremal-parameter matrices are test
    gmax = max(e.sf_gradient_t_per_m for e in m.entries if e.split != "val")
    dmax = max(e.mnp_diameter_nm for e in m.entries if e.split != "val")
    for e in m.entries:
        if e.split == "val":
            continue
        if e.sf_gradient_t_per_m == gmax or e.mnp_diameter_nm == dmax:
            assert e.split == "test"


def test_same_seed_gives_identical_manifest():
    cfg = ScannerConfig(grid=(8, 8))
    a = plan_dataset(cfg, [0.4, 0.5, 0.6], [20.0, 24.0], 3, 2, 1, seed=7)
    b = plan_dataset(cfg, [0.4, 0.5, 0.6], [20.0, 24.0], 3, 2, 1, seed=7)
    assert a.to_json() == b.to_json()
    assert paper_scale_plan(seed=3).to_json() == paper_scale_plan(seed=3).to_json()


def test_manifest_round_trip():
    cfg = ScannerConfig(grid=(8, 8))
    a = plan_dataset(cfg, [0.4, 0.6], [20.0], 1, 0, 1, seed=1)
    b = DatasetManifest.from_json(a.to_json())
    assert b.to_json() == a.to_json()
