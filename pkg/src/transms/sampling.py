"""Sampling operators between HR and measured system matrices.

Box-car downsampling uses the orthonormal-row convention: every LR pixel is
1/S times the sum of its S x S HR block, making D D^T = I exactly, which the
closed-form data-consistency projection relies on. Physically measured LR
rows (plain block sums) are rescaled by 1/S on ingest; their noise std stays
at the HR level, which is where the SNR-efficiency of large-sample
calibration comes from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scanner import SystemMatrix

__all__ = [
    "BoxcarOperator",
    "SamplingMask",
    "boxcar_downsample",
    "ingest_prospective",
    "add_calibration_noise",
    "whiten",
    "select_rows_by_snr",
    "apply_mask",
    "augment_flips",
]


@dataclass(frozen=True)
class BoxcarOperator:
    """Orthonormal S x S block-averaging operator on a (W, H) HR grid."""

    sr_factor: int
    hr_grid: tuple[int, int]  # (W, H)

    def __post_init__(self):
        s = self.sr_factor
        w, h = self.hr_grid
        if s < 1 or (s & (s - 1)) != 0:
            raise ValueError(f"SR factor {s} must be a power of 2")
        if w % s or h % s:
            raise ValueError(f"HR grid {w}x{h} not divisible by S={s}")

    @property
    def lr_grid(self) -> tuple[int, int]:
        return (self.hr_grid[0] // self.sr_factor, self.hr_grid[1] // self.sr_factor)

    @property
    def row_scale(self) -> float:
        return 1.0 / self.sr_factor

    def apply(self, hr: np.ndarray) -> np.ndarray:
        """D @ hr for (..., H, W) images: block sums scaled by 1/S."""
        s = self.sr_factor
        w, h = self.hr_grid
        lead = hr.shape[:-2]
        blocks = hr.reshape(*lead, h // s, s, w // s, s)
        return blocks.sum(axis=(-3, -1)) * self.row_scale

    def adjoint(self, lr: np.ndarray) -> np.ndarray:
        """D^T @ lr: replicate each LR pixel over its block, scaled by 1/S."""
        s = self.sr_factor
        out = np.repeat(np.repeat(lr, s, axis=-2), s, axis=-1)
        return out * self.row_scale

    def matrix(self) -> np.ndarray:
        """Dense D with shape (W*H/S^2, W*H); rows are orthonormal."""
        w, h = self.hr_grid
        s = self.sr_factor
        wl, hl = self.lr_grid
        d = np.zeros((wl * hl, w * h))
        for i in range(hl):
            for j in range(wl):
                row = i * wl + j
                for a in range(s):
                    for b in range(s):
                        col = (i * s + a) * w + (j * s + b)
                        d[row, col] = self.row_scale
        return d


def boxcar_downsample(sm: SystemMatrix, sr_factor: int) -> SystemMatrix:
    """Retrospective LR system matrix: apply D to every row image.

    With orthonormal D, averaging white noise over an S x S block scaled by
    1/S keeps the per-entry noise std unchanged, so sigma metadata is copied.
    """
    op = BoxcarOperator(sr_factor, sm.grid)
    w, h = sm.grid
    imgs = sm.data.reshape(sm.n_rows, h, w)
    lr = op.apply(imgs).reshape(sm.n_rows, -1)
    return SystemMatrix(
        data=lr,
        grid=op.lr_grid,
        harmonic=sm.harmonic.copy(),
        angle_deg=sm.angle_deg.copy(),
        sigma=sm.sigma.copy(),
        snr=_snr_estimate(lr, sm.sigma),
        whitened=sm.whitened,
    )


def ingest_prospective(sm_lr_sum: SystemMatrix, sr_factor: int) -> SystemMatrix:
    """Convert a measured large-sample LR matrix (block-sum convention) to
    the orthonormal convention by scaling entries and sigma by 1/S.

    Noise is independent of the MNP sample size, so a sum-convention LR row
    carries HR-level sigma; the 1/S rescale is what realizes the S-fold
    per-entry SNR gain over a single-voxel measurement.
    """
    out = sm_lr_sum.copy()
    out.data /= sr_factor
    out.sigma = out.sigma / sr_factor
    out.snr = _snr_estimate(out.data, out.sigma)
    return out


def _snr_estimate(data: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Row SNR at known noise std: ||a_i||_2 / (sqrt(N) sigma_i)."""
    n = data.shape[1]
    norms = np.linalg.norm(data, axis=1)
    with np.errstate(divide="ignore"):
        snr = np.where(sigma > 0, norms / (np.sqrt(n) * np.maximum(sigma, 1e-300)), 0.0)
    return snr


def add_calibration_noise(
    sm: SystemMatrix,
    target_snr_db: float | None = None,
    sigma: np.ndarray | float | None = None,
    seed: int = 0,
) -> SystemMatrix:
    """Add independent complex Gaussian noise per entry.

    Either a target per-row SNR in dB (sigma_i derived from each row's rms
    amplitude, hence colored across rows) or explicit per-row stds. Sigma is
    recorded in the metadata; sigma_i = 0 leaves a row untouched.
    """
    if (target_snr_db is None) == (sigma is None):
        raise ValueError("specify exactly one of target_snr_db or sigma")
    m, n = sm.data.shape
    if target_snr_db is not None:
        rms = np.linalg.norm(sm.data, axis=1) / np.sqrt(n)
        sig = rms / 10.0 ** (target_snr_db / 20.0)
    else:
        sig = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (m,)).copy()
        if np.any(sig < 0):
            raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    out = sm.copy()
    out.data = out.data + sig[:, None] * noise / np.sqrt(2.0)
    out.sigma = sig
    out.snr = _snr_estimate(sm.data, sig)  # SNR of the underlying clean rows
    return out


def whiten(sm: SystemMatrix, y: np.ndarray | None = None):
    """Scale row i (and y_i) by 1/sigma_i; sigma metadata resets to 1.

    Idempotent: a whitened matrix passes through unchanged.
    """
    if sm.whitened:
        return (sm.copy(), None if y is None else y.copy())
    if np.any(sm.sigma <= 0):
        raise ValueError("whiten requires sigma set for every row")
    out = sm.copy()
    inv = 1.0 / out.sigma
    out.data = out.data * inv[:, None]
    out.sigma = np.ones(sm.n_rows)
    out.whitened = True
    yw = None
    if y is not None:
        if y.shape[0] != sm.n_rows:
            raise ValueError("signal length does not match row count")
        yw = y * inv
    return out, yw


def select_rows_by_snr(sm: SystemMatrix, threshold: float = 5.0) -> SystemMatrix:
    """Keep rows with SNR_i = ||a_i|| / (sqrt(N) sigma_i) above threshold.

    Rows with sigma = 0 (noiseless) are always kept; an empty selection is
    allowed but flagged with a warning.
    """
    import warnings

    snr = _snr_estimate(sm.data, sm.sigma)
    keep = (sm.sigma == 0) | (snr > threshold)
    if not np.any(keep):
        warnings.warn("SNR selection removed every row", stacklevel=2)
    idx = np.flatnonzero(keep)
    return SystemMatrix(
        data=sm.data[idx],
        grid=sm.grid,
        harmonic=sm.harmonic[idx],
        angle_deg=sm.angle_deg[idx],
        sigma=sm.sigma[idx],
        snr=snr[idx],
        whitened=sm.whitened,
    )


@dataclass(frozen=True)
class SamplingMask:
    """Kept-index set over an HR grid, strided or uniformly random."""

    kind: str  # "strided" | "random"
    grid: tuple[int, int]  # (W, H)
    indices: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        n = self.grid[0] * self.grid[1]
        idx = np.asarray(self.indices)
        if idx.size == 0:
            raise ValueError("mask keeps no samples")
        if len(set(self.indices)) != idx.size or idx.min() < 0 or idx.max() >= n:
            raise ValueError("mask indices must be unique and within the grid")

    @classmethod
    def strided(cls, grid, step: int) -> "SamplingMask":
        w, h = grid
        idx = [iy * w + ix for iy in range(0, h, step) for ix in range(0, w, step)]
        return cls("strided", grid, tuple(idx))

    @classmethod
    def random(cls, grid, fraction: float, seed: int = 0) -> "SamplingMask":
        w, h = grid
        n = w * h
        count = max(1, int(round(fraction * n)))
        rng = np.random.default_rng(seed)
        idx = rng.choice(n, size=count, replace=False)
        return cls("random", grid, tuple(sorted(int(i) for i in idx)), seed)

    def dense(self) -> np.ndarray:
        m = np.zeros(self.grid[0] * self.grid[1], dtype=bool)
        m[list(self.indices)] = True
        return m


def apply_mask(sm: SystemMatrix, mask: SamplingMask):
    """Measured entries of every row under the mask; returns (values, mask).

    ``values`` has shape (M, len(mask.indices)) in mask index order.
    """
    if mask.grid != sm.grid:
        raise ValueError(f"mask grid {mask.grid} does not match SM grid {sm.grid}")
    return sm.data[:, list(mask.indices)], mask


def augment_flips(sm: SystemMatrix) -> SystemMatrix:
    """Horizontal, vertical and double flips of every row image (4x rows).

    Ordering: all originals, then H-flips, V-flips, HV-flips. Duplicates from
    symmetric rows are kept.
    """
    w, h = sm.grid
    imgs = sm.data.reshape(sm.n_rows, h, w)
    variants = [
        imgs,
        imgs[:, :, ::-1],
        imgs[:, ::-1, :],
        imgs[:, ::-1, ::-1],
    ]
    data = np.concatenate([v.reshape(sm.n_rows, -1) for v in variants], axis=0)
    return SystemMatrix(
        data=data,
        grid=sm.grid,
        harmonic=np.tile(sm.harmonic, 4),
        angle_deg=np.tile(sm.angle_deg, 4),
        sigma=np.tile(sm.sigma, 4),
        snr=np.tile(sm.snr, 4),
        whitened=sm.whitened,
    )
