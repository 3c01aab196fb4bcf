"""Non-learned HR system-matrix recovery plus the shared data-consistency
projection.

The data-consistency step solves

    min ||a - a_tilde||^2  s.t.  ||D a - b||_2 <= sqrt(m) * sigma

in closed form (orthonormal D collapses the normal equations to a scaled
adjoint correction):

    b_resid = b - D a_tilde
    a_hat   = a_tilde                                       if ||b_resid|| <= eps
            = a_tilde + (1 - eps/||b_resid||) D^T b_resid   otherwise

so that ||D a_hat - b|| = min(||b_resid||, eps) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sampling import BoxcarOperator, SamplingMask

__all__ = [
    "DcProblem",
    "dc_project",
    "dc_apply",
    "project_ball",
    "bicubic_upsample",
    "strided_bicubic",
    "CsProblem",
    "cs_recover",
]


# -- data-consistency projection ---------------------------------------------


@dataclass
class DcProblem:
    """One HR row candidate against its LR measurement."""

    lr_row: np.ndarray  # complex (H_lr, W_lr) or flat (m,)
    op: BoxcarOperator
    sigma: float
    candidate: np.ndarray  # complex (H, W) or flat (W*H,)
    mode: str = "joint"  # joint: one ball over the complex row; split: per part

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.mode not in ("joint", "split"):
            raise ValueError(f"unknown dc mode {self.mode!r}")


def dc_apply(candidate: np.ndarray, lr: np.ndarray, op: BoxcarOperator, eps: float) -> np.ndarray:
    """Closed-form ball-constrained projection through an orthonormal D.

    Works elementwise on real or complex (H, W) images; ``eps`` is the full
    radius of the constraint ball.
    """
    resid = lr - op.apply(candidate)
    nrm = np.linalg.norm(resid)
    if nrm <= eps:
        return candidate.copy()
    return candidate + (1.0 - eps / nrm) * op.adjoint(resid)


def dc_project(p: DcProblem) -> np.ndarray:
    """Project a candidate HR row onto the measurement-consistent set.

    Joint mode puts a single ball of radius sqrt(m)*sigma over the complex
    row (sigma is the complex per-entry noise std). Split mode projects real
    and imaginary parts separately with radius sqrt(m)*sigma/sqrt(2) each,
    matching the even split of complex noise power.
    """
    wl, hl = p.op.lr_grid
    w, h = p.op.hr_grid
    lr = np.asarray(p.lr_row).reshape(hl, wl)
    cand = np.asarray(p.candidate)
    flat_in = cand.ndim == 1
    cand = cand.reshape(h, w)
    m = wl * hl
    if p.mode == "joint":
        out = dc_apply(cand, lr, p.op, np.sqrt(m) * p.sigma)
    else:
        eps_part = np.sqrt(m) * p.sigma / np.sqrt(2.0)
        out = dc_apply(cand.real, lr.real, p.op, eps_part) + 1j * dc_apply(
            cand.imag, lr.imag, p.op, eps_part
        )
    return out.reshape(-1) if flat_in else out


def project_ball(v: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of v onto the ball ||x - center|| <= radius."""
    d = v - center
    nrm = np.linalg.norm(d)
    if nrm <= radius:
        return v.copy()
    return center + d * (radius / nrm)


# -- bicubic interpolation -----------------------------------------------------


def _keys_kernel(s: np.ndarray, a: float = -0.5) -> np.ndarray:
    s = np.abs(s)
    out = np.zeros_like(s)
    near = s <= 1.0
    far = (s > 1.0) & (s < 2.0)
    out[near] = (a + 2.0) * s[near] ** 3 - (a + 3.0) * s[near] ** 2 + 1.0
    out[far] = a * s[far] ** 3 - 5.0 * a * s[far] ** 2 + 8.0 * a * s[far] - 4.0 * a
    return out


def _axis_weights(n_in: int, n_out: int, offset: float, scale: float):
    """Tap indices (clamped) and Keys weights mapping output position h to
    input coordinate u = (h + offset) / scale."""
    u = (np.arange(n_out) + offset) / scale
    base = np.floor(u).astype(int)
    taps = base[:, None] + np.arange(-1, 3)[None, :]
    weights = _keys_kernel(u[:, None] - taps)
    taps = np.clip(taps, 0, n_in - 1)  # edge clamping; weights still sum to 1
    return taps, weights


def _interp_2d(img: np.ndarray, s: int, offset: float) -> np.ndarray:
    h, w = img.shape
    ty, wy = _axis_weights(h, h * s, offset, s)
    tx, wx = _axis_weights(w, w * s, offset, s)
    rows = (img[ty, :] * wy[:, :, None]).sum(axis=1)  # (h*s, w)
    out = (rows[:, tx] * wx[None, :, :]).sum(axis=2)  # (h*s, w*s)
    return out


def bicubic_upsample(lr_img: np.ndarray, sr_factor: int) -> np.ndarray:
    """Upsample a box-car LR row image by S per axis with a Keys cubic
    (a = -0.5), clamped at edges.

    The LR input is assumed to be in the orthonormal convention, so values
    are rescaled by 1/S first to undo the box-car gain; real and imaginary
    parts are interpolated independently.
    """
    lr_img = np.asarray(lr_img)
    if min(lr_img.shape) < 2:
        raise ValueError("bicubic needs at least 2 samples per axis")
    # LR pixel i center sits at HR coordinate i*S + (S-1)/2
    offset = -(sr_factor - 1) / 2.0
    scaled = lr_img / sr_factor
    if np.iscomplexobj(lr_img):
        return _interp_2d(scaled.real, sr_factor, offset) + 1j * _interp_2d(scaled.imag, sr_factor, offset)
    return _interp_2d(scaled, sr_factor, offset)


def strided_bicubic(samples_img: np.ndarray, sr_factor: int) -> np.ndarray:
    """Upsample strided HR samples (taken at every S-th pixel, no box-car
    gain) back to the full grid."""
    samples_img = np.asarray(samples_img)
    if min(samples_img.shape) < 2:
        raise ValueError("bicubic needs at least 2 samples per axis")
    if np.iscomplexobj(samples_img):
        return _interp_2d(samples_img.real, sr_factor, 0.0) + 1j * _interp_2d(samples_img.imag, sr_factor, 0.0)
    return _interp_2d(samples_img, sr_factor, 0.0)


# -- compressed-sensing recovery ------------------------------------------------


@dataclass
class CsProblem:
    """Recover one HR row from masked samples, sparse in the 2D DFT domain."""

    measured: np.ndarray  # complex values at mask positions
    mask: SamplingMask
    eps: float = 0.0
    mu: float = 1.0
    max_iter: int = 1000
    pad: int = 4  # FOV extension per side during the solve

    def __post_init__(self):
        if self.eps < 0 or self.mu <= 0:
            raise ValueError("eps must be >= 0 and mu > 0")
        if len(self.measured) != len(self.mask.indices):
            raise ValueError("measured values do not match mask size")


@dataclass
class CsResult:
    row: np.ndarray  # complex (H, W) recovered image
    objective: list = field(default_factory=list)  # ||F a||_1 per iteration
    final_residual: float = 0.0
    converged: bool = True


def _soft_complex(v: np.ndarray, t: float) -> np.ndarray:
    mag = np.abs(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(mag > t, 1.0 - t / np.maximum(mag, 1e-300), 0.0)
    return v * scale


def cs_recover(p: CsProblem) -> CsResult:
    """ADMM for  min ||F a||_1  s.t.  ||M a - b||_2 <= eps.

    Splitting z = F a (unitary 2D DFT) and w = M a; the a-update is a
    diagonal solve because F^H F = I and M^T M is a 0/1 mask. The FOV is
    zero-padded by ``pad`` pixels per side during the solve and cropped
    afterwards; each row is max-normalized for numerical stability and
    restored on return. Non-convergence is reported via the residual
    diagnostics, not raised.
    """
    w, h = p.mask.grid
    pad = p.pad
    hp, wp = h + 2 * pad, w + 2 * pad

    scale = np.max(np.abs(p.measured))
    if scale == 0:
        return CsResult(np.zeros((h, w), dtype=np.complex128))
    b = np.asarray(p.measured, dtype=np.complex128) / scale
    eps = p.eps / scale

    iy, ix = np.divmod(np.asarray(p.mask.indices), w)
    miy, mix = iy + pad, ix + pad
    sel = np.zeros((hp, wp))
    sel[miy, mix] = 1.0

    def fwd(a):
        return np.fft.fft2(a, norm="ortho")

    def inv(z):
        return np.fft.ifft2(z, norm="ortho")

    a = np.zeros((hp, wp), dtype=np.complex128)
    a[miy, mix] = b
    z = fwd(a)
    wv = a[miy, mix].copy()
    uz = np.zeros_like(z)
    uw = np.zeros_like(wv)

    objective = []
    for _ in range(p.max_iter):
        rhs = inv(z - uz)
        rhs[miy, mix] += wv - uw
        a = rhs / (1.0 + sel)
        fa = fwd(a)
        z = _soft_complex(fa + uz, 1.0 / p.mu)
        ma = a[miy, mix]
        wv = project_ball(ma + uw, b, eps)
        uz = uz + fa - z
        uw = uw + ma - wv
        objective.append(float(np.abs(fa).sum()) * scale)

    resid = float(np.linalg.norm(a[miy, mix] - b)) * scale
    out = a[pad : pad + h, pad : pad + w] * scale
    return CsResult(
        row=out,
        objective=objective,
        final_residual=resid,
        converged=resid <= max(p.eps, 1e-6 * scale) * 1.5 + 1e-12,
    )
