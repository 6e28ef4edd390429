"""System model: geometry, fading, IRS phases, SINR and secrecy rates.

All powers are linear watts; rates are in nats. Channels follow the
cascaded model h_i = g_i Diag(exp(j(theta + pse))) H_AR with no direct link.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

LOG2E = float(np.log2(np.e))
CONTINUOUS = "continuous"

Bits = Union[int, str, None]


def normalize_bits(b: Bits) -> Optional[int]:
    """Map ``"continuous"``/None/inf to None, integers to themselves."""
    if b is None or (isinstance(b, str) and b.lower() == CONTINUOUS):
        return None
    if isinstance(b, float) and np.isinf(b):
        return None
    b = int(b)
    if b < 1:
        raise ValueError(f"quantization bits must be >= 1, got {b}")
    return b


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Network parameters for one scenario.

    Positions are (x, y, z) in meters. ``users`` and ``eve`` may be left as
    None, in which case :func:`generate_channels` draws them from the
    default geometry.
    """

    M: int = 6
    K: int = 3
    N: int = 16
    b: Bits = 3
    P_T: float = 0.1
    noise_density: float = -174.0
    bandwidth: float = 1e6
    G_A: float = 5.0
    G_IRS: float = 5.0
    rician_K: float = 3.0
    alice: tuple = (15.0, 0.0, 15.0)
    irs: tuple = (0.0, 25.0, 40.0)
    users: Optional[tuple] = None
    eve: Optional[tuple] = None
    user_area: tuple = (-60.0, 0.0, 0.0, 60.0)
    eve_area: tuple = (0.0, 60.0, 0.0, 60.0)
    min_eve_separation: float = 1.0
    delta_k: float = 0.0
    delta_e: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("M", "K", "N"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        normalize_bits(self.b)
        if self.P_T <= 0:
            raise ValueError("P_T must be positive")
        if self.rician_K < 0:
            raise ValueError("rician_K must be >= 0")
        for name in ("delta_k", "delta_e"):
            d = getattr(self, name)
            if not 0.0 <= d < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")

    @property
    def bits(self) -> Optional[int]:
        return normalize_bits(self.b)

    @property
    def noise_power(self) -> float:
        """Noise power in W over the configured bandwidth."""
        return dbm_to_watt(self.noise_density + 10.0 * np.log10(self.bandwidth))

    def with_(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


@dataclass
class ChannelSet:
    """One network realization.

    ``g`` holds the true IRS->user rows (K x N), ``g_hat`` the estimates
    available to the transmitter, ``xi`` the uncertainty radii. Eve has the
    same trio with suffix ``_e``.
    """

    H_AR: np.ndarray
    g: np.ndarray
    g_e: np.ndarray
    g_hat: np.ndarray
    g_hat_e: np.ndarray
    xi: np.ndarray
    xi_e: float
    sigma: np.ndarray
    sigma_e: float
    positions: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.g.shape[0]

    @property
    def N(self) -> int:
        return self.H_AR.shape[0]

    @property
    def M(self) -> int:
        return self.H_AR.shape[1]

    @property
    def perfect(self) -> bool:
        return bool(np.all(self.xi == 0) and self.xi_e == 0)

    def estimated(self) -> "ChannelSet":
        """View where the estimates are treated as the truth."""
        return replace(self, g=self.g_hat.copy(), g_e=self.g_hat_e.copy())


@dataclass
class PhaseConfig:
    """IRS phase vector on the b-bit grid plus a phase-shift-error draw."""

    theta: np.ndarray
    b: Optional[int] = None
    pse: Optional[np.ndarray] = None

    def __post_init__(self):
        self.b = normalize_bits(self.b)
        self.theta = np.mod(np.asarray(self.theta, dtype=float), 2 * np.pi)
        if self.pse is None or self.b is None:
            self.pse = np.zeros_like(self.theta)
        else:
            self.pse = np.asarray(self.pse, dtype=float)

    @classmethod
    def from_angles(cls, theta, b: Bits, pse=None) -> "PhaseConfig":
        return cls(quantize_phase(theta, b), b, pse)

    @property
    def effective(self) -> np.ndarray:
        return self.theta + self.pse

    @property
    def vector(self) -> np.ndarray:
        return np.exp(1j * self.effective)

    def without_pse(self) -> "PhaseConfig":
        return PhaseConfig(self.theta.copy(), self.b, None)


@dataclass
class BeamformingSet:
    """Per-user beams as rows of ``w`` (K x M) plus the artificial-noise part."""

    w: np.ndarray
    an_power: float = 0.0
    an_basis: Optional[np.ndarray] = None

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    def copy(self) -> "BeamformingSet":
        basis = None if self.an_basis is None else self.an_basis.copy()
        return BeamformingSet(self.w.copy(), self.an_power, basis)


# --------------------------------------------------------------------------
# large-scale and spatial models


def path_loss_alice_irs(d: float, G_A: float = 5.0, G_IRS: float = 5.0) -> float:
    """Alice->IRS path loss in dB."""
    d = float(d)
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    return G_A + G_IRS - 35.9 - 22.0 * np.log10(d)


def path_loss_irs_link(d: float, G_IRS: float = 5.0) -> float:
    """IRS->receiver path loss in dB."""
    d = float(d)
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    return G_IRS - 33.05 - 30.0 * np.log10(d)


def spatial_correlation(elev: float, azim: float, N: int) -> np.ndarray:
    """IRS element correlation ``R[q, p] = exp(j pi (q - p) sin(elev) sin(azim))``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    q = np.arange(N)
    return np.exp(1j * np.pi * np.subtract.outer(q, q) * np.sin(elev) * np.sin(azim))


def hermitian_sqrt(R: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(R)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def _angles(src, dst):
    v = np.asarray(dst, float) - np.asarray(src, float)
    r = np.linalg.norm(v)
    elev = np.arccos(np.clip(v[2] / r, -1.0, 1.0))
    azim = np.arctan2(v[1], v[0])
    return r, elev, azim


def _upa_dims(N: int):
    nx = int(np.floor(np.sqrt(N)))
    while N % nx:
        nx -= 1
    return nx, N // nx


def planar_steering(elev: float, azim: float, N: int) -> np.ndarray:
    """Half-wavelength UPA response (row vector of length N)."""
    nx, ny = _upa_dims(N)
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    phase = np.pi * np.sin(elev) * (ix * np.cos(azim) + iy * np.sin(azim))
    return np.exp(1j * phase).reshape(-1)


def alice_irs_los(N: int, M: int, rng: np.random.Generator) -> np.ndarray:
    theta_n, vartheta_n = rng.uniform(0, 2 * np.pi, size=2)
    theta_bar, vartheta_bar = np.pi - theta_n, np.pi + vartheta_n
    a = np.arange(N)[:, None]
    b = np.arange(M)[None, :]
    return np.exp(1j * np.pi * (b * np.sin(theta_bar) * np.sin(vartheta_bar)
                                + a * np.sin(theta_n) * np.sin(vartheta_n)))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rician(los: np.ndarray, K: float, rng: np.random.Generator) -> np.ndarray:
    nlos = _cn(rng, los.shape)
    if np.isinf(K):
        return los.astype(complex)
    return np.sqrt(K / (K + 1.0)) * los + np.sqrt(1.0 / (K + 1.0)) * nlos


def sample_ball(xi: float, N: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform draw(s) from the complex Euclidean ball of radius ``xi`` in C^N."""
    shape = (N,) if size is None else (size, N)
    z = _cn(rng, shape)
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    u = rng.uniform(size=None if size is None else (size, 1))
    return xi * u ** (1.0 / (2 * N)) * z


def sample_sphere(xi: float, N: int, rng: np.random.Generator, size: int) -> np.ndarray:
    z = _cn(rng, (size, N))
    return xi * z / np.linalg.norm(z, axis=-1, keepdims=True)


def apply_csi_error(g_hat: np.ndarray, delta_g: np.ndarray, xi: float,
                    rtol: float = 1e-12) -> np.ndarray:
    """True channel ``g_hat + delta_g``; the error must lie in the xi-ball."""
    norm = np.linalg.norm(delta_g)
    if norm > xi * (1 + rtol) + 1e-300:
        raise ValueError(f"CSI error norm {norm:.3e} exceeds radius {xi:.3e}")
    return np.asarray(g_hat) + np.asarray(delta_g)


def _draw_positions(config: SystemConfig, rng: np.random.Generator):
    x0, x1, y0, y1 = config.user_area
    if config.users is None:
        users = np.column_stack([rng.uniform(x0, x1, config.K),
                                 rng.uniform(y0, y1, config.K),
                                 np.zeros(config.K)])
    else:
        users = np.asarray(config.users, float).reshape(config.K, 3)
    if config.eve is None:
        ex0, ex1, ey0, ey1 = config.eve_area
        for _ in range(10_000):
            eve = np.array([rng.uniform(ex0, ex1), rng.uniform(ey0, ey1), 0.0])
            inside = x0 <= eve[0] <= x1 and y0 <= eve[1] <= y1
            far = np.min(np.linalg.norm(users - eve, axis=1)) >= config.min_eve_separation
            if not inside and far:
                break
        else:
            raise RuntimeError("could not place Eve outside the user area")
    else:
        eve = np.asarray(config.eve, float)
    return users, eve


def _irs_row(config, irs, pos, rng):
    d, elev, azim = _angles(irs, pos)
    beta = db_to_linear(path_loss_irs_link(d, config.G_IRS))
    los = planar_steering(elev, azim, config.N)
    small = rician(los, config.rician_K, rng)
    R_half = hermitian_sqrt(spatial_correlation(elev, azim, config.N))
    return np.sqrt(beta) * small @ R_half


def generate_channels(config: SystemConfig, rng: Optional[np.random.Generator] = None
                      ) -> ChannelSet:
    """Draw one realization; deterministic given ``config.seed`` when rng is None."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    users, eve = _draw_positions(config, rng)
    alice = np.asarray(config.alice, float)
    irs = np.asarray(config.irs, float)

    d_ar = np.linalg.norm(irs - alice)
    beta_ar = db_to_linear(path_loss_alice_irs(d_ar, config.G_A, config.G_IRS))
    H = np.sqrt(beta_ar) * rician(alice_irs_los(config.N, config.M, rng), config.rician_K, rng)

    g_hat = np.array([_irs_row(config, irs, u, rng) for u in users])
    g_hat_e = _irs_row(config, irs, eve, rng)

    xi = config.delta_k * np.linalg.norm(g_hat, axis=1)
    xi_e = float(config.delta_e * np.linalg.norm(g_hat_e))
    g = np.array([apply_csi_error(g_hat[k], sample_ball(xi[k], config.N, rng), xi[k])
                  for k in range(config.K)])
    g_e = apply_csi_error(g_hat_e, sample_ball(xi_e, config.N, rng), xi_e)

    sigma = config.noise_power
    return ChannelSet(
        H_AR=H, g=g, g_e=g_e, g_hat=g_hat, g_hat_e=g_hat_e,
        xi=xi, xi_e=xi_e,
        sigma=np.full(config.K, sigma), sigma_e=sigma,
        positions={"alice": alice, "irs": irs, "users": users, "eve": eve},
    )


# --------------------------------------------------------------------------
# phases


def quantize_phase(theta, b: Bits) -> np.ndarray:
    """Nearest point of the 2^b grid on [0, 2pi); ties go to the lower index."""
    theta = np.asarray(theta, dtype=float)
    bits = normalize_bits(b)
    if bits is None:
        return theta.copy()
    if not np.all(np.isfinite(theta)):
        raise ValueError("phases must be finite")
    levels = 2 ** bits
    step = 2 * np.pi / levels
    idx = np.ceil(np.mod(theta, 2 * np.pi) / step - 0.5)
    return np.mod(idx, levels) * step


def phase_grid(b: int) -> np.ndarray:
    return 2 * np.pi * np.arange(2 ** b) / 2 ** b


def wrap_angle(x):
    """Signed angular difference folded into [-pi, pi)."""
    return np.mod(np.asarray(x) + np.pi, 2 * np.pi) - np.pi


def sample_pse(b: Bits, N: int, rng: np.random.Generator) -> np.ndarray:
    """Phase-shift errors, iid uniform on [-pi/2^b, pi/2^b)."""
    bits = normalize_bits(b)
    if bits is None:
        raise ValueError("phase-shift error needs a finite bit count")
    half = np.pi / 2 ** bits
    return rng.uniform(-half, half, size=N)


# --------------------------------------------------------------------------
# link metrics


def cascaded_channel(g: np.ndarray, phase, H_AR: np.ndarray) -> np.ndarray:
    """``g Diag(exp(j theta_eff)) H_AR``; ``g`` may be a single row or a stack."""
    v = phase.vector if isinstance(phase, PhaseConfig) else np.exp(1j * np.asarray(phase))
    return (np.asarray(g) * v) @ H_AR


def cascaded_channel_sum(g: np.ndarray, phase, H_AR: np.ndarray) -> np.ndarray:
    """Same quantity written as a sum over single-element selectors."""
    v = phase.vector if isinstance(phase, PhaseConfig) else np.exp(1j * np.asarray(phase))
    N = H_AR.shape[0]
    h = np.zeros(H_AR.shape[1], dtype=complex)
    for n in range(N):
        Xi = np.zeros((N, N))
        Xi[n, n] = 1.0
        h = h + v[n] * (g @ Xi @ H_AR)
    return h


def sinr(bf, h_i: np.ndarray, k: int, sigma_i: float, an_term: float = 0.0) -> float:
    """SINR of stream k seen through row channel ``h_i``."""
    w = bf.w if isinstance(bf, BeamformingSet) else np.asarray(bf)
    if not 0 <= k < w.shape[0]:
        raise IndexError(f"user index {k} out of range")
    gains = np.abs(w @ h_i) ** 2
    interference = gains.sum() - gains[k]
    return float(gains[k] / (interference + sigma_i + an_term))


def _gains(w: np.ndarray, h: np.ndarray) -> np.ndarray:
    # |h_i w_j|^2 for a stack of channels h (R x M) -> (R x K)
    return np.abs(h @ w.T) ** 2


def link_sinrs(w: np.ndarray, h: np.ndarray, sigma, an: Optional[np.ndarray] = None):
    """Per-receiver SINRs; row r of ``h`` decodes stream r."""
    G = _gains(w, h)
    sig = np.diag(G) if G.shape[0] == G.shape[1] else None
    if sig is None:
        raise ValueError("need one receiver per stream")
    extra = 0.0 if an is None else an
    return sig / (G.sum(axis=1) - sig + sigma + extra)


def eve_sinrs(w: np.ndarray, h_e: np.ndarray, sigma_e: float, an_term: float = 0.0):
    """Eve's SINR for each stream k (K,)."""
    gains = np.abs(w @ h_e) ** 2
    return gains / (gains.sum() - gains + sigma_e + an_term)


def rates(bf, phase: PhaseConfig, channels: ChannelSet, estimated: bool = False,
          an_term_eve: Optional[float] = None):
    """(user rates, Eve rates) in nats for every stream."""
    w = bf.w if isinstance(bf, BeamformingSet) else np.asarray(bf)
    g = channels.g_hat if estimated else channels.g
    g_e = channels.g_hat_e if estimated else channels.g_e
    h = cascaded_channel(g, phase, channels.H_AR)
    h_e = cascaded_channel(g_e, phase, channels.H_AR)
    if an_term_eve is None:
        an_term_eve = 0.0
        if isinstance(bf, BeamformingSet) and bf.an_basis is not None and bf.an_power > 0:
            V = bf.an_basis
            an_term_eve = bf.an_power / V.shape[1] * float(np.sum(np.abs(h_e @ V) ** 2))
    c_user = np.log1p(link_sinrs(w, h, channels.sigma))
    c_eve = np.log1p(eve_sinrs(w, h_e, channels.sigma_e, an_term_eve))
    return c_user, c_eve


def secrecy_rates(bf, phase, channels, clamp: bool = True, **kwargs) -> np.ndarray:
    c_user, c_eve = rates(bf, phase, channels, **kwargs)
    sr = c_user - c_eve
    return np.maximum(sr, 0.0) if clamp else sr


def secrecy_rate(bf, phase, channels, k: int, clamp: bool = True, **kwargs) -> float:
    """``[ln(1+SINR_k) - ln(1+SINR_e,k)]^+`` in nats."""
    return float(secrecy_rates(bf, phase, channels, clamp=clamp, **kwargs)[k])


def min_secrecy_rate(bf, phase, channels, **kwargs) -> float:
    return float(np.min(secrecy_rates(bf, phase, channels, **kwargs)))


def sum_secrecy_rate(bf, phase, channels, **kwargs) -> float:
    return float(np.sum(secrecy_rates(bf, phase, channels, **kwargs)))


def to_bps(nats):
    return np.asarray(nats) * LOG2E


def mrt_beams(h: np.ndarray, P_T: float) -> np.ndarray:
    """Matched-filter beams with equal power split (rows of the result)."""
    K = h.shape[0]
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return np.sqrt(P_T / K) * h.conj() / norms


def random_grid_phase(N: int, b: Bits, rng: np.random.Generator) -> PhaseConfig:
    """Uniform phases rounded to the grid (uniform over grid points).

    One uniform draw serves every bit count, so runs that differ only in ``b``
    start from matching points.
    """
    bits = normalize_bits(b)
    return PhaseConfig(quantize_phase(rng.uniform(0, 2 * np.pi, N), bits), bits)
