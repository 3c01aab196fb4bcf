"""Dataset generation over (gradient, diameter) sweeps with manifest bookkeeping."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .scanner import ScannerConfig, config_variant

__all__ = ["DatasetEntry", "DatasetManifest", "plan_dataset", "paper_scale_plan"]


@dataclass
class DatasetEntry:
    entry_id: str
    sf_gradient_t_per_m: float
    mnp_diameter_nm: float
    split: str  # train | val | test
    path: str = ""


@dataclass
class DatasetManifest:
    entries: list[DatasetEntry] = field(default_factory=list)
    seed: int = 0
    base_config: dict = field(default_factory=dict)

    def split(self, name: str) -> list[DatasetEntry]:
        return [e for e in self.entries if e.split == name]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "base_config": self.base_config,
                "entries": [asdict(e) for e in self.entries],
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        return cls(
            entries=[DatasetEntry(**e) for e in doc["entries"]],
            seed=doc["seed"],
            base_config=doc.get("base_config", {}),
        )


def plan_dataset(
    base_config: ScannerConfig,
    gradients: list[float],
    diameters: list[float],
    n_train: int,
    n_val: int,
    n_test: int,
    seed: int = 0,
) -> DatasetManifest:
    """One system matrix per (gradient, diameter) pair, deterministically
    split into disjoint train/val/test sets.

    The full cartesian pool must hold exactly ``n_train + n_val + n_test``
    entries; assignment shuffles the pool with the given seed.
    """
    if not gradients or not diameters:
        raise ValueError("gradient and diameter lists must be nonempty")
    pool = [(g, d) for g in gradients for d in diameters]
    total = n_train + n_val + n_test
    if total != len(pool):
        raise ValueError(f"split sizes sum to {total} but the sweep yields {len(pool)} matrices")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pool))
    labels = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    entries = []
    for rank, idx in enumerate(order):
        g, d = pool[idx]
        entries.append(
            DatasetEntry(
                entry_id=f"sm_g{g:.3f}_d{d:.3f}",
                sf_gradient_t_per_m=g,
                mnp_diameter_nm=d,
                split=labels[rank],
            )
        )
    entries.sort(key=lambda e: e.entry_id)
    _check_disjoint(entries)
    from dataclasses import asdict as cfg_asdict

    return DatasetManifest(entries=entries, seed=seed, base_config=cfg_asdict(base_config))


def _check_disjoint(entries: list[DatasetEntry]):
    ids = [e.entry_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("overlapping splits: duplicate entry ids")


def paper_scale_plan(base_config: ScannerConfig | None = None, seed: int = 0) -> DatasetManifest:
    """Full-scale sweep: a 10x10 (gradient, diameter) pool of 100 matrices
    split 66 train / 34 test (the 19 with extremal gradient or diameter are
    reserved for testing plus 15 random extras), and a separate 3x10
    validation sweep of 30 matrices.
    """
    if base_config is None:
        base_config = ScannerConfig()
    gradients = [round(0.40 + 0.07 * k, 4) for k in range(10)]  # 0.40 .. 1.03
    diameters = [round(14.10 + 2.145 * k, 4) for k in range(10)]  # 14.10 .. 33.405
    pool = [(g, d) for g in gradients for d in diameters]

    g_max, d_max = max(gradients), max(diameters)
    forced_test = [(g, d) for (g, d) in pool if g == g_max or d == d_max]
    assert len(forced_test) == 19
    remaining = [p for p in pool if p not in forced_test]
    rng = np.random.default_rng(seed)
    extra_idx = rng.choice(len(remaining), size=15, replace=False)
    extra_test = {remaining[i] for i in extra_idx}

    entries = []
    for g, d in pool:
        split = "test" if ((g, d) in forced_test or (g, d) in extra_test) else "train"
        entries.append(DatasetEntry(f"sm_g{g:.3f}_d{d:.3f}", g, d, split))

    val_gradients = [0.70, 0.865, 1.03]
    val_diameters = [round(15.17 + 2.145 * k, 4) for k in range(10)]
    for g in val_gradients:
        for d in val_diameters:
            entries.append(DatasetEntry(f"sm_g{g:.3f}_d{d:.3f}_val", g, d, "val"))

    entries.sort(key=lambda e: e.entry_id)
    _check_disjoint(entries)
    from dataclasses import asdict as cfg_asdict

    return DatasetManifest(entries=entries, seed=seed, base_config=cfg_asdict(base_config))


def entry_config(base_config: ScannerConfig, entry: DatasetEntry) -> ScannerConfig:
    return config_variant(
        base_config,
        sf_gradient_t_per_m=entry.sf_gradient_t_per_m,
        mnp_diameter_nm=entry.mnp_diameter_nm,
    )
