"""Thin-dipole self/mutual impedance and assembly of the per-antenna
impedance blocks.

All elements (active and coupler) are modeled as identical thin straight
dipoles oriented normal to the x-y placement plane, so every pair sits in the
parallel side-by-side configuration and the classical induced-EMF closed form
applies:

    R21 =  eta/(4 pi) * (2 Ci(u0) - Ci(u1) - Ci(u2))
    X21 = -eta/(4 pi) * (2 Si(u0) - Si(u1) - Si(u2))

with u0 = k d, u1/u2 = k (sqrt(d^2 + l^2) +/- l), eta = 120 pi, valid for the
half-wave resonant length used here (cos(k l / 2) = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import sici

from .errors import DomainError, TooClose
from .geometry import ArrayLayout

ETA_FREE_SPACE = 120.0 * np.pi
# Standard half-wave thin-dipole self impedance (wire radius not modeled).
HALF_WAVE_SELF_IMPEDANCE = 73.13 + 42.54j
DEFAULT_LOAD_IMPEDANCE = 0.05 + 50.0j


def sine_cosine_integrals(x):
    """Si(x) and Ci(x) for x >= 0 (Ci requires x > 0).

    Backed by scipy's sici kernel; absolute error stays below 1e-10 against
    the defining integrals over the working range.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("sine_cosine_integrals requires x >= 0")
    if np.any(arr == 0):
        raise DomainError("Ci(0) diverges (log singularity)")
    si, ci = sici(arr)
    if np.isscalar(x) or arr.ndim == 0:
        return float(si), float(ci)
    return si, ci


@dataclass(frozen=True)
class DipoleModel:
    """Electrical model shared by active elements and couplers.

    ``min_separation`` guards the Ci log-singularity at zero spacing; by
    construction it equals the layout's d_min so the feasibility constraint
    doubles as the singularity guard.
    """

    wavelength: float
    length: float
    self_impedance: complex = HALF_WAVE_SELF_IMPEDANCE
    load_impedance: complex = DEFAULT_LOAD_IMPEDANCE
    min_separation: float = 0.0

    @classmethod
    def for_layout(cls, layout: ArrayLayout, **overrides) -> "DipoleModel":
        kw = dict(
            wavelength=layout.lam,
            length=0.5 * layout.lam,
            min_separation=layout.min_sep_m,
        )
        kw.update(overrides)
        return cls(**kw)

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength


def mutual_impedance(d, model: DipoleModel):
    """Mutual impedance (ohms) of two parallel side-by-side dipoles at
    center spacing ``d`` meters.  Accepts scalars or arrays; raises TooClose
    below the singularity guard."""
    arr = np.asarray(d, dtype=float)
    if np.any(arr < model.min_separation):
        raise TooClose(
            f"separation below guard {model.min_separation:.4e} m; "
            f"min requested {arr.min():.4e} m"
        )
    k = model.wavenumber
    l = model.length
    u0 = k * arr
    root = np.sqrt(arr**2 + l**2)
    u1 = k * (root + l)
    u2 = k * (root - l)
    si0, ci0 = sici(u0)
    si1, ci1 = sici(u1)
    si2, ci2 = sici(u2)
    coef = ETA_FREE_SPACE / (4.0 * np.pi)
    r21 = coef * (2.0 * ci0 - ci1 - ci2)
    x21 = -coef * (2.0 * si0 - si1 - si2)
    z = r21 + 1j * x21
    if np.isscalar(d) or arr.ndim == 0:
        return complex(z)
    return z


@dataclass
class ImpedanceBlock:
    """Impedance description of one antenna: active self impedance, the
    active-to-coupler vector z_bar, the coupler-to-coupler matrix Z_hat, and
    the diagonal load matrix X."""

    z_self: complex
    z_bar: np.ndarray  # (N,) complex
    Z_hat: np.ndarray  # (N, N) complex
    X: np.ndarray  # (N, N) complex diagonal

    @property
    def N(self) -> int:
        return self.z_bar.shape[0]

    def full_matrix(self) -> np.ndarray:
        """Assembled (N+1)x(N+1) block; symmetric entries are written from a
        single evaluation so Z == Z.T holds bit-exactly."""
        N = self.N
        Z = np.empty((N + 1, N + 1), dtype=complex)
        Z[0, 0] = self.z_self
        Z[0, 1:] = self.z_bar
        Z[1:, 0] = self.z_bar
        Z[1:, 1:] = self.Z_hat
        return Z


def build_block(p_m: np.ndarray, q_m: np.ndarray, model: DipoleModel) -> ImpedanceBlock:
    """Impedance block for one antenna from coupler positions ``p_m`` (N, 2)
    and the active-element position ``q_m`` (2,)."""
    p_m = np.asarray(p_m, dtype=float).reshape(-1, 2)
    q_m = np.asarray(q_m, dtype=float).reshape(2)
    N = p_m.shape[0]
    if N == 0:
        return ImpedanceBlock(
            z_self=model.self_impedance,
            z_bar=np.zeros(0, dtype=complex),
            Z_hat=np.zeros((0, 0), dtype=complex),
            X=np.zeros((0, 0), dtype=complex),
        )
    d_bar = np.hypot(p_m[:, 0] - q_m[0], p_m[:, 1] - q_m[1])
    z_bar = np.asarray(mutual_impedance(d_bar, model), dtype=complex).reshape(N)
    Z_hat = np.full((N, N), model.self_impedance, dtype=complex)
    if N > 1:
        iu, ju = np.triu_indices(N, k=1)
        d_pair = np.hypot(p_m[iu, 0] - p_m[ju, 0], p_m[iu, 1] - p_m[ju, 1])
        z_pair = np.asarray(mutual_impedance(d_pair, model), dtype=complex)
        Z_hat[iu, ju] = z_pair
        Z_hat[ju, iu] = z_pair
    X = np.diag(np.full(N, model.load_impedance, dtype=complex))
    return ImpedanceBlock(model.self_impedance, z_bar, Z_hat, X)


def build_blocks(placement, layout: ArrayLayout, model: DipoleModel) -> list[ImpedanceBlock]:
    """Impedance blocks for all antennas of a placement."""
    return [
        build_block(placement.positions[m], layout.active_position(m), model)
        for m in range(layout.M)
    ]


def write_impedance_table(path, distances, model: DipoleModel) -> None:
    """Export (d, Re Z, Im Z) rows as CSV for validation plots."""
    z = mutual_impedance(np.asarray(distances, dtype=float), model)
    table = np.column_stack([distances, np.real(z), np.imag(z)])
    np.savetxt(path, table, delimiter=",", header="d_m,re_ohm,im_ohm", comments="")
