"""Multipath channel synthesis: steering vectors for the fixed active array
and for arbitrary coupler placements, and the stacked per-user channel.

Stacking follows [h_A; h_C] with the coupler block grouped antenna-major,
coupler-minor.  Channel gains are normalized to unit average power
(g0 = 1); SNR is controlled entirely through P_max and the noise variance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayLayout, CouplerPlacement

GAIN_NORMALIZATION = 1.0  # average total path power per user


@dataclass
class MultipathSpec:
    """Ground-truth multipath description: per-user departure angles
    (radians, azimuth) and complex path gains, plus the user noise variance."""

    angles: np.ndarray  # (K, L) radians in [-pi/2, pi/2]
    gains: np.ndarray  # (K, L) complex
    noise_var: float = 1.0

    def __post_init__(self):
        self.angles = np.atleast_2d(np.asarray(self.angles, dtype=float))
        self.gains = np.atleast_2d(np.asarray(self.gains, dtype=complex))
        if self.angles.shape != self.gains.shape:
            raise ValueError("angles and gains must have matching (K, L) shapes")
        if self.angles.shape[1] < 1:
            raise ValueError("need at least one path per user")
        if np.any(np.abs(self.angles) > np.pi / 2):
            raise ValueError("angles must lie in [-pi/2, pi/2]")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")

    @property
    def K(self) -> int:
        return self.angles.shape[0]

    @property
    def L(self) -> int:
        return self.angles.shape[1]

    def to_json(self, path) -> None:
        doc = {
            "angles": self.angles.tolist(),
            "gains_re": np.real(self.gains).tolist(),
            "gains_im": np.imag(self.gains).tolist(),
            "noise_var": self.noise_var,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)

    @classmethod
    def from_json(cls, path) -> "MultipathSpec":
        with open(path) as fh:
            doc = json.load(fh)
        gains = np.array(doc["gains_re"]) + 1j * np.array(doc["gains_im"])
        return cls(np.array(doc["angles"]), gains, doc["noise_var"])


@dataclass
class ChannelRealization:
    """Stacked channel of one user at one placement: h = [h_A; h_C]."""

    h: np.ndarray  # (M(N+1),) complex
    M: int
    N: int
    user: int
    placement: CouplerPlacement = field(repr=False, default=None)

    @property
    def h_active(self) -> np.ndarray:
        return self.h[: self.M]

    @property
    def h_coupler(self) -> np.ndarray:
        return self.h[self.M :]

    def h_coupler_block(self, m: int) -> np.ndarray:
        return self.h[self.M + m * self.N : self.M + (m + 1) * self.N]


def steering_active(phi, layout: ArrayLayout) -> np.ndarray:
    """Active-array steering vector; entry m is exp(-j k (m-1) d_y sin phi).
    ``phi`` may be a scalar (returns (M,)) or an array (returns (..., M))."""
    phi = np.asarray(phi, dtype=float)
    k0 = 2.0 * np.pi / layout.lam
    m_idx = np.arange(layout.M)
    phase = -1j * k0 * layout.spacing_m * np.sin(phi)[..., None] * m_idx
    return np.exp(phase)


def steering_coupler(phi, placement: CouplerPlacement, layout: ArrayLayout) -> np.ndarray:
    """Coupler steering vector stacked antenna-major, coupler-minor; entries
    exp(-j k kappa(phi) . p_{n,m}) with kappa = [cos phi, sin phi]."""
    phi = np.asarray(phi, dtype=float)
    k0 = 2.0 * np.pi / layout.lam
    flat = placement.positions.reshape(-1, 2)  # (M*N, 2)
    proj = np.cos(phi)[..., None] * flat[:, 0] + np.sin(phi)[..., None] * flat[:, 1]
    return np.exp(-1j * k0 * proj)


def steering_coupler_block(phi, p_m: np.ndarray, lam: float) -> np.ndarray:
    """Per-antenna variant for positions p_m of shape (N, 2); ``phi`` scalar
    or array, output (..., N)."""
    phi = np.asarray(phi, dtype=float)
    k0 = 2.0 * np.pi / lam
    proj = np.cos(phi)[..., None] * p_m[:, 0] + np.sin(phi)[..., None] * p_m[:, 1]
    return np.exp(-1j * k0 * proj)


def user_channel(
    spec: MultipathSpec, k: int, placement: CouplerPlacement, layout: ArrayLayout
) -> ChannelRealization:
    """Multipath channel of user k: sum over paths of gain times the stacked
    steering vector [a_y(phi); a_C(phi, p)]."""
    angles = spec.angles[k]
    gains = spec.gains[k]
    a_y = steering_active(angles, layout)  # (L, M)
    h_a = gains @ a_y
    if layout.N > 0:
        a_c = steering_coupler(angles, placement, layout)  # (L, M*N)
        h_c = gains @ a_c
    else:
        h_c = np.zeros(0, dtype=complex)
    return ChannelRealization(
        h=np.concatenate([h_a, h_c]),
        M=layout.M,
        N=layout.N,
        user=k,
        placement=placement,
    )


def active_channel_matrix(spec: MultipathSpec, layout: ArrayLayout) -> np.ndarray:
    """(K, M) matrix of active-element channels for all users."""
    a_y = steering_active(spec.angles, layout)  # (K, L, M)
    return np.einsum("kl,klm->km", spec.gains, a_y)


def coupler_channel_block(spec: MultipathSpec, p_m: np.ndarray, lam: float) -> np.ndarray:
    """(K, N) coupler channels of one antenna for all users."""
    if p_m.shape[0] == 0:
        return np.zeros((spec.K, 0), dtype=complex)
    a_c = steering_coupler_block(spec.angles, p_m, lam)  # (K, L, N)
    return np.einsum("kl,kln->kn", spec.gains, a_c)


def sample_channels(
    seed, K: int, L: int, layout: ArrayLayout, noise_var: float = 1.0
) -> MultipathSpec:
    """Draw a random multipath spec: angles i.i.d. uniform on [-pi/2, pi/2],
    gains i.i.d. circularly-symmetric Gaussian with variance g0/L."""
    if K < 1 or L < 1:
        raise ValueError("K and L must be >= 1")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-np.pi / 2, np.pi / 2, size=(K, L))
    scale = np.sqrt(GAIN_NORMALIZATION / (2.0 * L))
    gains = scale * (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L)))
    return MultipathSpec(angles=angles, gains=gains, noise_var=noise_var)
