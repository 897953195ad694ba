"""Mechanical beamforming weights, effective channels, the diagonal power
matrix, the MMSE digital precoder, SINR/sum-rate evaluation, and the
baseline precoders (active-only and fully active).

Convention used project-wide: row k of the effective channel matrix G is the
row vector that multiplies the precoder in the received signal,
``y_k = G[k, :] @ U @ s + n_k`` with ``G[k, m] = h_A[k, m] - w_m^T h_C[k, m]``.
Rates and SINRs only involve moduli, so this fixes the conjugation ambiguity
without affecting any reported metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    MultipathSpec,
    active_channel_matrix,
    coupler_channel_block,
    user_channel,
)
from .errors import NonPositivePower, NonPSD, SingularGram, SingularSystem
from .geometry import ArrayLayout, CouplerPlacement, uniform_placement
from .impedance import DipoleModel, ImpedanceBlock, build_blocks

COND_LIMIT = 1e12


@dataclass
class MechanicalWeights:
    """Per-antenna coupler excitation weights w_m (solution of
    (Z_hat + X) w = z_bar); the extended vector is [1; -w_m]."""

    w: np.ndarray  # (M, N) complex
    cond: np.ndarray  # (M,) condition numbers of the solved systems

    @property
    def M(self) -> int:
        return self.w.shape[0]

    @property
    def N(self) -> int:
        return self.w.shape[1]

    def w_tilde(self, m: int) -> np.ndarray:
        return np.concatenate([[1.0 + 0.0j], -self.w[m]])


def mech_weights(block: ImpedanceBlock) -> tuple[np.ndarray, float]:
    """Solve one antenna's coupling system; returns (w, condition number)."""
    if block.N == 0:
        return np.zeros(0, dtype=complex), 1.0
    A = block.Z_hat + block.X
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystem(f"coupling system condition {cond:.3e} exceeds {COND_LIMIT:.0e}")
    w = np.linalg.solve(A, block.z_bar)
    return w, cond


def all_mech_weights(blocks: list[ImpedanceBlock]) -> MechanicalWeights:
    M = len(blocks)
    N = blocks[0].N if M else 0
    w = np.zeros((M, N), dtype=complex)
    cond = np.zeros(M)
    for m, blk in enumerate(blocks):
        w[m], cond[m] = mech_weights(blk)
    return MechanicalWeights(w=w, cond=cond)


def effective_column(
    spec: MultipathSpec, p_m: np.ndarray, w_m: np.ndarray, m: int,
    h_active: np.ndarray, lam: float,
) -> np.ndarray:
    """Column m of G for all users: h_A[:, m] - (h_C block) @ w_m."""
    h_cm = coupler_channel_block(spec, p_m, lam)  # (K, N)
    if w_m.size:
        return h_active[:, m] - h_cm @ w_m
    return h_active[:, m].copy()


def effective_channel(
    spec: MultipathSpec,
    placement: CouplerPlacement,
    weights: MechanicalWeights,
    layout: ArrayLayout,
) -> np.ndarray:
    """Effective K x M channel after absorbing coupler re-radiation."""
    h_active = active_channel_matrix(spec, layout)
    G = np.zeros((spec.K, layout.M), dtype=complex)
    for m in range(layout.M):
        G[:, m] = effective_column(
            spec, placement.positions[m], weights.w[m], m, h_active, layout.lam
        )
    return G


def power_coefficient(block: ImpedanceBlock, w_m: np.ndarray) -> float:
    """b_m = w_tilde^H Re{Z_m} w_tilde for one antenna."""
    w_t = np.concatenate([[1.0 + 0.0j], -w_m])
    val = float(np.real(w_t.conj() @ np.real(block.full_matrix()) @ w_t))
    if val <= 0.0:
        raise NonPositivePower(f"power coefficient b_m = {val:.3e} is not positive")
    return val


def power_matrix(blocks: list[ImpedanceBlock], weights: MechanicalWeights) -> np.ndarray:
    """Diagonal of B(p): per-antenna radiated-power coefficients."""
    return np.array([power_coefficient(blk, weights.w[m]) for m, blk in enumerate(blocks)])


@dataclass
class PrecodingState:
    """Result of MMSE precoding on an effective channel."""

    G: np.ndarray  # (K, M) effective channel rows
    B: np.ndarray  # (M,) power coefficients
    U: np.ndarray  # (M, K) digital precoder (port currents)
    F: np.ndarray  # (M, K) whitened precoder, ||F||_F^2 = P_max
    beta: float
    alpha: float
    sinr: np.ndarray  # (K,)
    sum_rate: float
    P_max: float
    sigma2: float
    gram_cond: float = field(default=np.nan)

    def to_dict(self) -> dict:
        return {
            "sum_rate": self.sum_rate,
            "sinr": self.sinr.tolist(),
            "b": self.B.tolist(),
            "beta": self.beta,
            "alpha": self.alpha,
            "P_max": self.P_max,
            "sigma2": self.sigma2,
            "gram_cond": self.gram_cond,
        }


def mmse_precoder(
    G: np.ndarray, B: np.ndarray, P_max: float, sigma2: float
) -> PrecodingState:
    """Regularized-inverse precoder on the whitened channel, power-loaded to
    meet the transmit budget with equality."""
    if P_max <= 0:
        raise ValueError("P_max must be positive")
    B = np.asarray(B, dtype=float)
    if np.any(B <= 0):
        raise NonPositivePower("power matrix must be strictly positive")
    K = G.shape[0]
    alpha = K * sigma2 / P_max
    G_bar = G / np.sqrt(B)[None, :]
    gram = G_bar @ G_bar.conj().T + alpha * np.eye(K)
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularGram(f"regularized Gram condition {cond:.3e}")
    F_hat = G_bar.conj().T @ np.linalg.solve(gram, np.eye(K, dtype=complex))
    norm = np.linalg.norm(F_hat)
    if norm == 0.0:
        # zero channel: the regularized LS solution is F = 0 and no power
        # loading can meet the budget; degrade to the silent precoder
        beta = 0.0
    else:
        beta = np.sqrt(P_max) / norm
    F = beta * F_hat
    U = F / np.sqrt(B)[:, None]
    sinr, rate = sinr_and_rate(G, U, sigma2)
    return PrecodingState(
        G=G, B=B, U=U, F=F, beta=float(beta), alpha=float(alpha),
        sinr=sinr, sum_rate=rate, P_max=P_max, sigma2=sigma2, gram_cond=cond,
    )


def sinr_and_rate(G: np.ndarray, U: np.ndarray, sigma2) -> tuple[np.ndarray, float]:
    """Per-user SINR and sum rate for effective rows G and precoder U."""
    K = G.shape[0]
    sig = G @ U  # (K, K): sig[k, j] couples stream j into user k
    power = np.abs(sig) ** 2
    desired = np.diag(power)
    interference = power.sum(axis=1) - desired
    noise = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    gamma = desired / (interference + noise)
    rate = float(np.sum(np.log2(1.0 + gamma)))
    return gamma, rate


def transmit_power(U: np.ndarray, B: np.ndarray) -> float:
    """tr(U^H diag(B) U)."""
    return float(np.real(np.sum(B[:, None] * np.abs(U) ** 2)))


def active_only_state(
    spec: MultipathSpec, layout: ArrayLayout, model: DipoleModel,
    P_max: float, sigma2: float,
) -> PrecodingState:
    """Baseline: M active elements, no couplers.  The effective channel is the
    plain active-array channel and every port radiates with b = Re{z_self}."""
    G = active_channel_matrix(spec, layout)
    B = np.full(layout.M, np.real(model.self_impedance))
    return mmse_precoder(G, B, P_max, sigma2)


def fc_state(
    spec: MultipathSpec,
    placement: CouplerPlacement,
    layout: ArrayLayout,
    model: DipoleModel,
    P_max: float,
    sigma2: float,
) -> PrecodingState:
    """Full flexible-coupler pipeline at a fixed placement: impedance blocks,
    mechanical weights, effective channel, power matrix, MMSE precoder."""
    blocks = build_blocks(placement, layout, model)
    weights = all_mech_weights(blocks)
    G = effective_channel(spec, placement, weights, layout)
    B = power_matrix(blocks, weights)
    return mmse_precoder(G, B, P_max, sigma2)


def _real_sqrt_and_inv(Re_Z: np.ndarray, norm: float) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(Re_Z)
    if np.any(vals < -1e-8 * norm):
        raise NonPSD(f"Re(Z) eigenvalue {vals.min():.3e} below -1e-8 * ||Z||")
    vals = np.clip(vals, 1e-12 * norm, None)
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
    inv_root = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T
    return root, inv_root


def fully_active_state(
    spec: MultipathSpec,
    layout: ArrayLayout,
    model: DipoleModel,
    P_max: float,
    sigma2: float,
    placement: CouplerPlacement | None = None,
) -> PrecodingState:
    """Baseline with all M(N+1) ports active at the uniform fixed positions.

    Ports are ordered per antenna [active; couplers] to match the
    block-diagonal Z; power is tr(U^H Re{Z} U) and whitening uses the
    symmetric eigen square root of each Re{Z_m} block.
    """
    if placement is None:
        placement = uniform_placement(layout)
    blocks = build_blocks(placement, layout, model)
    M, N = layout.M, layout.N
    ports = M * (N + 1)
    # per-antenna port channel rows, matching the blkdiag port ordering
    H = np.zeros((spec.K, ports), dtype=complex)
    for k in range(spec.K):
        ch = user_channel(spec, k, placement, layout)
        for m in range(M):
            H[k, m * (N + 1)] = ch.h_active[m]
            H[k, m * (N + 1) + 1 : (m + 1) * (N + 1)] = ch.h_coupler_block(m)
    # blockwise whitening
    G_bar = np.zeros_like(H)
    inv_roots = []
    for m, blk in enumerate(blocks):
        Re_Z = np.real(blk.full_matrix())
        norm = float(np.linalg.norm(Re_Z, 2))
        _, inv_root = _real_sqrt_and_inv(Re_Z, norm)
        inv_roots.append(inv_root)
        sl = slice(m * (N + 1), (m + 1) * (N + 1))
        G_bar[:, sl] = H[:, sl] @ inv_root
    K = spec.K
    alpha = K * sigma2 / P_max
    gram = G_bar @ G_bar.conj().T + alpha * np.eye(K)
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularGram(f"regularized Gram condition {cond:.3e}")
    F_hat = G_bar.conj().T @ np.linalg.solve(gram, np.eye(K, dtype=complex))
    beta = np.sqrt(P_max) / np.linalg.norm(F_hat)
    F = beta * F_hat
    U = np.zeros_like(F)
    for m in range(M):
        sl = slice(m * (N + 1), (m + 1) * (N + 1))
        U[sl] = inv_roots[m] @ F[sl]
    sinr, rate = sinr_and_rate(H, U, sigma2)
    # power here is tr(U^H Re{Z} U) = ||F||_F^2, not diagonal; B is a placeholder
    return PrecodingState(
        G=H, B=np.ones(ports), U=U, F=F, beta=float(beta), alpha=float(alpha),
        sinr=sinr, sum_rate=rate, P_max=P_max, sigma2=sigma2, gram_cond=cond,
    )


def fully_active_rate(spec, layout, model, P_max, sigma2, placement=None) -> float:
    return fully_active_state(spec, layout, model, P_max, sigma2, placement).sum_rate
