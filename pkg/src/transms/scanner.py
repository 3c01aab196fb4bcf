"""2D rotating field-free-line MPI scanner simulator.

A static selection field with gradient G perpendicular to the FFL gives a
z-field that varies linearly across the line and vanishes along it; a
sinusoidal drive adds a uniform z component, sweeping the line over the
field of view. Ideal magnetic nanoparticles respond through the Langevin
magnetization, and a receive coil with homogeneous z sensitivity picks up
the induced voltage

    s(t) = -sum_r c(r) * m_p * d/dt L(beta * B_z(r, t)),

with beta = m_p / (k_B T) and particle moment m_p = M_sat * pi * d^3 / 6.
Time signals over one drive period are Fourier transformed and the bins at
the configured harmonics become system-matrix rows, stacked over
(FFL angle x harmonic).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

MU0 = 4.0e-7 * np.pi
K_BOLTZMANN = 1.380649e-23

__all__ = [
    "ScannerConfig",
    "SystemMatrix",
    "langevin",
    "langevin_deriv",
    "simulate_sm",
    "simulate_signal",
    "simulate_time_signal",
    "row_to_image",
    "image_to_row",
]


def langevin(xi):
    """Langevin function coth(xi) - 1/xi.

    The series xi/3 - xi^3/45 is used for |xi| < 1e-4 to avoid cancellation;
    values saturate to sign(xi) for large arguments.
    """
    xi = np.asarray(xi, dtype=np.float64)
    small = np.abs(xi) < 1e-4
    large = np.abs(xi) > 350.0  # sinh overflows; coth is +/-1 to machine precision
    mid = ~(small | large)
    safe = np.where(mid, xi, 1.0)
    out = np.empty_like(xi)
    out[small] = xi[small] / 3.0 - xi[small] ** 3 / 45.0
    out[mid] = 1.0 / np.tanh(safe[mid]) - 1.0 / safe[mid]
    out[large] = np.sign(xi[large]) - 1.0 / xi[large]
    return out if out.ndim else float(out)


def langevin_deriv(xi):
    """d/dxi of the Langevin function: 1/xi^2 - csch(xi)^2.

    The direct form cancels two O(1/xi^2) terms, so a Taylor series is used
    below |xi| = 0.02 where the cancellation would cost > ~5e-13.
    """
    xi = np.asarray(xi, dtype=np.float64)
    small = np.abs(xi) < 0.02
    large = np.abs(xi) > 350.0
    mid = ~(small | large)
    safe = np.where(mid, xi, 1.0)
    out = np.empty_like(xi)
    x2 = xi[small] ** 2
    out[small] = 1.0 / 3.0 - x2 / 15.0 + 2.0 * x2**2 / 189.0 - x2**3 / 675.0
    out[mid] = 1.0 / safe[mid] ** 2 - 1.0 / np.sinh(safe[mid]) ** 2
    out[large] = 1.0 / xi[large] ** 2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ScannerConfig:
    """FFL scanner and nanoparticle parameters for the simulated dataset."""

    fov_mm: tuple[float, float] = (32.0, 32.0)  # (x, y)
    grid: tuple[int, int] = (32, 32)  # (W, H) high-resolution voxels
    mnp_diameter_nm: float = 20.0
    saturation_magnetization_t: float = 0.55  # tesla / mu0
    temperature_k: float = 300.0
    sf_gradient_t_per_m: float = 0.55  # perpendicular to the FFL
    df_frequency_hz: float = 23.2e3
    df_amplitude_mt: float | None = None  # None: auto-scaled to sweep the FOV
    sampling_rate_hz: float = 5.0e6
    ffl_angles_deg: tuple[float, ...] = tuple(float(a) for a in range(0, 180, 3))
    harmonics: tuple[int, int] = (2, 9)  # inclusive range
    bins_per_harmonic: int = 1
    supersampling: int = 4  # sub-positions per voxel axis
    rng_seed: int = 0

    def __post_init__(self):
        w, h = self.grid
        if w < 2 or h < 2:
            raise ValueError("grid extents must be >= 2")
        if self.sf_gradient_t_per_m <= 0:
            raise ValueError("selection-field gradient must be positive")
        if self.df_amplitude_mt is not None and self.df_amplitude_mt <= 0:
            raise ValueError("drive amplitude must be positive")
        if self.harmonics[0] > self.harmonics[1] or self.harmonics[0] < 1:
            raise ValueError("harmonics range is empty or invalid")
        if self.bins_per_harmonic < 1:
            raise ValueError("bins_per_harmonic must be >= 1")
        if not self.ffl_angles_deg:
            raise ValueError("at least one FFL angle required")

    @property
    def voxel_mm(self) -> tuple[float, float]:
        return (self.fov_mm[0] / self.grid[0], self.fov_mm[1] / self.grid[1])

    @property
    def drive_amplitude_t(self) -> float:
        """Drive amplitude in tesla; when unset, G * max(FOV)/2 so the FFL
        sweep covers the full field of view."""
        if self.df_amplitude_mt is not None:
            return self.df_amplitude_mt * 1e-3
        half_fov_m = max(self.fov_mm) * 1e-3 / 2.0
        return self.sf_gradient_t_per_m * half_fov_m

    @property
    def samples_per_period(self) -> int:
        n = int(round(self.sampling_rate_hz / self.df_frequency_hz))
        need = 2 * (self.harmonics[1] + 1)
        if n < need:
            raise ValueError(f"sampling rate too low: {n} samples/period, need >= {need}")
        return n

    @property
    def particle_moment(self) -> float:
        """Magnetic moment of one particle, A*m^2."""
        d = self.mnp_diameter_nm * 1e-9
        m_sat = self.saturation_magnetization_t / MU0  # A/m
        return m_sat * np.pi * d**3 / 6.0

    @property
    def langevin_beta(self) -> float:
        """Langevin argument per tesla of applied field."""
        return self.particle_moment / (K_BOLTZMANN * self.temperature_k)

    def harmonic_list(self) -> list[int]:
        return list(range(self.harmonics[0], self.harmonics[1] + 1))

    def rows_per_angle(self) -> int:
        return len(self.harmonic_list()) * self.bins_per_harmonic


@dataclass
class SystemMatrix:
    """Complex M x N calibration matrix; each row is a map on a (W, H) grid.

    Per-row metadata: harmonic index, FFL angle, noise std sigma (0 = unset)
    and an SNR estimate (0 = unset). ``data[m]`` reshapes to (H, W) row-major.
    """

    data: np.ndarray  # complex128, (M, N)
    grid: tuple[int, int]  # (W, H)
    harmonic: np.ndarray  # (M,) int
    angle_deg: np.ndarray  # (M,) float
    sigma: np.ndarray  # (M,) float
    snr: np.ndarray  # (M,) float
    whitened: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        m, n = self.data.shape
        w, h = self.grid
        if n != w * h:
            raise ValueError(f"N={n} does not match grid {w}x{h}")
        for name in ("harmonic", "angle_deg", "sigma", "snr"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (m,):
                raise ValueError(f"metadata '{name}' length {arr.shape} != M={m}")
            setattr(self, name, arr)
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be nonnegative (0 = unset)")

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "SystemMatrix":
        return SystemMatrix(
            self.data.copy(),
            self.grid,
            self.harmonic.copy(),
            self.angle_deg.copy(),
            self.sigma.copy(),
            self.snr.copy(),
            self.whitened,
        )

    def row_image(self, i: int) -> np.ndarray:
        """Row i as a complex (H, W) image."""
        w, h = self.grid
        return self.data[i].reshape(h, w)


def row_to_image(row: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Complex length-W*H row -> real (2, H, W) array of (real, imag) channels."""
    w, h = grid
    img = row.reshape(h, w)
    return np.stack([img.real, img.imag]).astype(np.float64)


def image_to_row(img: np.ndarray) -> np.ndarray:
    """Inverse of :func:`row_to_image`."""
    return (img[0] + 1j * img[1]).reshape(-1)


def _voxel_centers(config: ScannerConfig):
    w, h = config.grid
    fx, fy = config.fov_mm[0] * 1e-3, config.fov_mm[1] * 1e-3
    dx, dy = fx / w, fy / h
    xs = (np.arange(w) + 0.5) * dx - fx / 2.0
    ys = (np.arange(h) + 0.5) * dy - fy / 2.0
    return xs, ys, dx, dy


def _sub_offsets(n_sub: int, d: float):
    return ((np.arange(n_sub) + 0.5) / n_sub - 0.5) * d


def _angle_voxel_signals(config: ScannerConfig, angle_deg: float) -> np.ndarray:
    """Time signal of every unit-concentration HR voxel at one FFL angle.

    Returns a real array (N, T) with N = W*H voxels (row-major over the
    (H, W) grid) and T samples over one drive period.
    """
    xs, ys, dx, dy = _voxel_centers(config)
    w, h = config.grid
    theta = np.deg2rad(angle_deg)
    # gradient direction: perpendicular to the FFL direction (cos t, sin t)
    nx, ny = -np.sin(theta), np.cos(theta)

    ss = config.supersampling
    ox = _sub_offsets(ss, dx)
    oy = _sub_offsets(ss, dy)
    # per-voxel supersampled projections onto the gradient axis: (N, ss*ss)
    xg, yg = np.meshgrid(xs, ys)  # (H, W), row-major over voxels
    base = (nx * xg + ny * yg).reshape(-1, 1)
    sub = (nx * ox[None, :] + ny * oy[:, None]).reshape(1, -1)
    u = base + sub  # (N, ss^2)

    t = np.arange(config.samples_per_period) / config.samples_per_period
    omega = 2.0 * np.pi  # per period, in normalized time
    drive = config.drive_amplitude_t * np.cos(omega * t)
    ddrive = -config.drive_amplitude_t * omega * np.sin(omega * t)  # dB/d(t/T)

    beta = config.langevin_beta
    g = config.sf_gradient_t_per_m
    # B_z at (sub-position, time); Langevin slope gives dM/dB
    bz = g * u[:, :, None] + drive[None, None, :]
    slope = langevin_deriv(beta * bz)
    mean_slope = slope.mean(axis=1)  # integrate over the voxel footprint
    # s = -m_p * beta * L'(beta B) * dB/dt, with f0-normalized time
    return -config.particle_moment * beta * mean_slope * ddrive[None, :]


def _harmonic_bins(config: ScannerConfig) -> list[int]:
    bins = []
    nb = config.bins_per_harmonic
    for k in config.harmonic_list():
        for off in range(nb):
            bins.append(k - (nb - 1) // 2 + off)
    return bins


def _spectrum_rows(config: ScannerConfig, signal_t: np.ndarray) -> np.ndarray:
    """FFT of (…, T) time signals, returning the kept harmonic bins."""
    t = config.samples_per_period
    spec = np.fft.rfft(signal_t, axis=-1) / t
    return spec[..., _harmonic_bins(config)]


def simulate_sm(config: ScannerConfig, sample_size_mm: tuple[float, float] | None = None) -> SystemMatrix:
    """Measure a system matrix by traversing a uniformly filled MNP sample.

    The sample must span an integer number of HR voxels per axis; a sample
    spanning s voxels produces the exact sum of the constituent single-voxel
    responses (the model is linear in concentration), on a grid coarsened by
    the same factor. Default sample size is one voxel.
    """
    dx, dy = config.voxel_mm
    if sample_size_mm is None:
        sample_size_mm = (dx, dy)
    sx = sample_size_mm[0] / dx
    sy = sample_size_mm[1] / dy
    if abs(sx - round(sx)) > 1e-9 or abs(sy - round(sy)) > 1e-9:
        raise ValueError(f"sample size {sample_size_mm} mm is not an integer multiple of the voxel size ({dx:.3f}, {dy:.3f}) mm")
    sx, sy = int(round(sx)), int(round(sy))
    w, h = config.grid
    if w % sx or h % sy:
        raise ValueError(f"grid {w}x{h} not divisible by sample span {sx}x{sy}")

    rows = []
    harmonics = []
    angles = []
    bins = _harmonic_bins(config)
    hlist = config.harmonic_list()
    nb = config.bins_per_harmonic
    for ang in config.ffl_angles_deg:
        sig = _angle_voxel_signals(config, ang)  # (N_hr, T)
        spec = _spectrum_rows(config, sig)  # (N_hr, n_bins)
        if sx > 1 or sy > 1:
            # sum the member single-voxel responses of each sample footprint
            block = spec.reshape(h // sy, sy, w // sx, sx, len(bins))
            spec = block.sum(axis=(1, 3)).reshape(-1, len(bins))
        rows.append(spec.T)  # (n_bins, N)
        for k in hlist:
            harmonics.extend([k] * nb)
            angles.extend([ang] * nb)

    data = np.concatenate(rows, axis=0)
    m = data.shape[0]
    return SystemMatrix(
        data=data,
        grid=(w // sx, h // sy),
        harmonic=np.array(harmonics, dtype=np.int64),
        angle_deg=np.array(angles, dtype=np.float64),
        sigma=np.zeros(m),
        snr=np.zeros(m),
    )


def simulate_time_signal(config: ScannerConfig, concentration: np.ndarray, angle_deg: float) -> np.ndarray:
    """Raw one-period receive signal for a concentration map at one angle."""
    c = np.asarray(concentration, dtype=np.float64).reshape(-1)
    if c.size != config.grid[0] * config.grid[1]:
        raise ValueError("concentration map does not match the scanner grid")
    sig = _angle_voxel_signals(config, angle_deg)
    return c @ sig


def simulate_signal(
    config: ScannerConfig,
    concentration: np.ndarray,
    sm: SystemMatrix | None = None,
    snr_db: float | None = None,
    seed: int | None = None,
):
    """Frequency-domain measurement y of a concentration map.

    With ``sm`` given, computes ``y = A x`` directly; otherwise simulates the
    time-domain signal (an independent path, linear in concentration) and
    extracts the harmonic bins. Optional complex Gaussian noise is added per
    row to hit ``snr_db``; returns ``(y, sigma)`` with per-row noise stds
    (zeros when noiseless).
    """
    x = np.asarray(concentration, dtype=np.float64).reshape(-1)
    if sm is not None:
        if x.size != sm.n_cols:
            raise ValueError("concentration map does not match the system-matrix grid")
        y = sm.data @ x
    else:
        if x.size != config.grid[0] * config.grid[1]:
            raise ValueError("concentration map does not match the scanner grid")
        parts = []
        for ang in config.ffl_angles_deg:
            st = simulate_time_signal(config, x, ang)
            parts.append(_spectrum_rows(config, st))
        y = np.concatenate(parts)

    sigma = np.zeros(y.size)
    if snr_db is not None:
        rng = np.random.default_rng(seed)
        # per-component noise std from the target SNR; rows here are scalars,
        # so the rms amplitude is |y_i|
        sigma = np.abs(y) / 10.0 ** (snr_db / 20.0)
        noise = rng.normal(size=y.size) + 1j * rng.normal(size=y.size)
        y = y + sigma * noise / np.sqrt(2.0)
    return y, sigma


def config_variant(config: ScannerConfig, **kwargs) -> ScannerConfig:
    """A copy of ``config`` with fields replaced (dataset sweeps)."""
    return replace(config, **kwargs)
