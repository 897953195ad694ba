"""Structured pilot protocol and channel estimation for the coupler array.

The training window is split into V blocks of tau slots; coupler positions
are frozen within a block and re-randomized across blocks, which diversifies
the position-dependent effective channels and makes the angular sparse model
identifiable.  Estimation recovers, per user, the grid support of the
departure angles and the complex path gains, from which the effective channel
can be reconstructed at any coupler placement.

Two schemes are implemented: a centralized one (stack all pilot-correlated
observations at the central unit, OMP with exactly L selections, LS gains)
and a distributed one (per-antenna matched-filter proxies with
noise-calibrated thresholding, central score fusion for the support, then
per-antenna Gram/correlation sufficient statistics whose sums reproduce the
global LS normal equations).  An exhaustive per-candidate measurement
baseline is included for comparison.

Stacking order everywhere is block-major, antenna-minor: entry (v*M + m) of a
stacked vector belongs to block v, antenna m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import MultipathSpec
from .errors import (
    RankDeficientSupport,
    SingularAggregate,
    TauTooShort,
    ZeroChannel,
)
from .geometry import (
    ArrayLayout,
    CouplerPlacement,
    random_feasible_placement,
)
from .impedance import DipoleModel, build_block, build_blocks
from .precoding import all_mech_weights, effective_channel, mech_weights

DEFAULT_GRID_SIZE = 256
DEFAULT_THRESHOLD = 4.0  # ~6 dB above the effective noise floor
DEFAULT_EPS_NORM = 1e-12


# ---------------------------------------------------------------------------
# pilots and the training session


def make_pilots(K: int, tau: int, seed) -> np.ndarray:
    """K x tau pilot matrix with S S^H = tau I, built from K distinct rows of
    the tau-point harmonic family with random row phases."""
    if tau < K:
        raise TauTooShort(f"tau={tau} must be at least K={K}")
    rng = np.random.default_rng(seed)
    rows = rng.choice(tau, size=K, replace=False)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=K)
    t = np.arange(tau)
    S = np.exp(1j * (2.0 * np.pi * np.outer(rows, t) / tau + phases[:, None]))
    return S


@dataclass
class PilotSession:
    """One training window: pilots, block count, per-block placements, and
    the per-antenna noise level."""

    S: np.ndarray  # (K, tau)
    tau: int
    V: int
    placements: list[CouplerPlacement]
    sigma2: float
    seed: int

    @property
    def K(self) -> int:
        return self.S.shape[0]

    @property
    def sigma_eff2(self) -> float:
        """Post-correlation noise variance sigma^2 / tau."""
        return self.sigma2 / self.tau


def make_session(
    layout: ArrayLayout,
    K: int,
    tau: int,
    V: int,
    sigma2: float,
    seed: int,
    placement_spread: float | None = None,
) -> PilotSession:
    """Draw pilots and V random feasible placements (rejection sampling).

    With ``placement_spread`` (wavelengths) the couplers are drawn in the
    annulus [1.01 d_min, spread] around each active element instead of
    uniformly over the box.  Mutual coupling decays fast with distance, so
    concentrating the training placements in the strong-coupling zone makes
    the angular dictionary far better conditioned; the recovered angles and
    gains are global, so reconstruction anywhere in the region is unaffected.
    """
    S = make_pilots(K, tau, seed)
    rng = np.random.default_rng([seed, 1])
    if placement_spread is None:
        placements = [random_feasible_placement(layout, rng) for _ in range(V)]
    else:
        placements = [_annulus_placement(layout, rng, placement_spread)
                      for _ in range(V)]
    return PilotSession(S=S, tau=tau, V=V, placements=placements,
                        sigma2=sigma2, seed=seed)


def _annulus_placement(layout: ArrayLayout, rng: np.random.Generator,
                       spread_wl: float, max_tries: int = 50000) -> CouplerPlacement:
    r_lo = 1.01 * layout.min_sep_m
    r_hi = max(spread_wl * layout.lam, r_lo)
    pos = np.zeros((layout.M, layout.N, 2))
    for m in range(layout.M):
        q = layout.active_position(m)
        lo, hi = layout.region_bounds(m)
        for _ in range(max_tries):
            r = rng.uniform(r_lo, r_hi, layout.N)
            a = rng.uniform(0.0, 2.0 * np.pi, layout.N)
            pts = q[None, :] + np.column_stack([r * np.cos(a), r * np.sin(a)])
            full = np.vstack([q[None, :], pts])
            dists = np.linalg.norm(full[:, None, :] - full[None, :, :], axis=-1)
            iu = np.triu_indices(layout.N + 1, k=1)
            if (layout.N == 0 or (np.all(dists[iu] >= layout.min_sep_m)
                                  and np.all(pts >= lo) and np.all(pts <= hi))):
                pos[m] = pts
                break
        else:
            raise RuntimeError(
                f"could not draw an annulus placement for antenna {m}")
    return CouplerPlacement(pos)


def simulate_rx(
    session: PilotSession,
    spec: MultipathSpec,
    v: int,
    layout: ArrayLayout,
    model: DipoleModel,
) -> np.ndarray:
    """Received pilot block v at all antennas, shape (M, tau): row m is the
    post-coupling scalar channel times the pilots plus white noise."""
    placement = session.placements[v]
    blocks = build_blocks(placement, layout, model)
    weights = all_mech_weights(blocks)
    G = effective_channel(spec, placement, weights, layout)  # (K, M)
    rng = np.random.default_rng([session.seed, 2, v])
    noise = np.sqrt(session.sigma2 / 2.0) * (
        rng.standard_normal((layout.M, session.tau))
        + 1j * rng.standard_normal((layout.M, session.tau))
    )
    return G.T @ session.S + noise


def run_pilot_phase(
    session: PilotSession, spec: MultipathSpec, layout: ArrayLayout, model: DipoleModel
) -> list[np.ndarray]:
    """All V received blocks."""
    return [simulate_rx(session, spec, v, layout, model) for v in range(session.V)]


def pilot_correlate(y_m, S: np.ndarray, tau: int) -> np.ndarray:
    """Per-antenna pilot correlation: (1/tau) y S^H.  ``y_m`` is one length-tau
    row (returns (K,)) or a stacked (M, tau) block (returns (M, K))."""
    return np.asarray(y_m) @ S.conj().T / tau


# ---------------------------------------------------------------------------
# angular grid and dictionaries


@dataclass(frozen=True)
class AngularGrid:
    """Uniform azimuth grid on [-pi/2, pi/2]."""

    G: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if self.G < 2:
            raise ValueError("grid needs at least 2 points")

    @property
    def angles(self) -> np.ndarray:
        return np.linspace(-np.pi / 2, np.pi / 2, self.G)

    def nearest_index(self, phi) -> np.ndarray:
        step = np.pi / (self.G - 1)
        idx = np.rint((np.asarray(phi) + np.pi / 2) / step).astype(int)
        return np.clip(idx, 0, self.G - 1)


def response_row(
    phi, p_m: np.ndarray, w_m: np.ndarray, m: int, layout: ArrayLayout
) -> np.ndarray:
    """Effective per-antenna angular response b_m(phi; p_m) for angle(s) phi:
    the active steering entry minus the coupler re-radiation seen through the
    mechanical weights."""
    phi = np.asarray(phi, dtype=float)
    k0 = 2.0 * np.pi / layout.lam
    ay_m = np.exp(-1j * k0 * layout.spacing_m * np.sin(phi) * m)
    if w_m.size == 0:
        return ay_m + 0j
    proj = np.cos(phi)[..., None] * p_m[:, 0] + np.sin(phi)[..., None] * p_m[:, 1]
    a_c = np.exp(-1j * k0 * proj)  # (..., N)
    return ay_m - a_c @ w_m


def local_dictionary(
    session: PilotSession,
    m: int,
    grid: AngularGrid,
    layout: ArrayLayout,
    model: DipoleModel,
) -> np.ndarray:
    """Local dictionary of antenna m, shape (V, G): row v is the angular
    response at block-v coupler positions (mechanical weights recomputed from
    the antenna's own schedule)."""
    A_m = np.zeros((session.V, grid.G), dtype=complex)
    q_m = layout.active_position(m)
    for v in range(session.V):
        p_m = session.placements[v].positions[m]
        block = build_block(p_m, q_m, model)
        w_m, _ = mech_weights(block)
        A_m[v] = response_row(grid.angles, p_m, w_m, m, layout)
    return A_m


@dataclass
class Dictionary:
    """Stacked dictionary: ``cube[v, m, g]`` holds b_m(phi_g; p_m^[v]); the
    flat (M V, G) matrix is the block-major reshape and per-antenna locals
    are views, so the regrouping identity is exact by construction."""

    cube: np.ndarray  # (V, M, G)
    grid: AngularGrid

    @property
    def A(self) -> np.ndarray:
        V, M, G = self.cube.shape
        return self.cube.reshape(V * M, G)

    def local(self, m: int) -> np.ndarray:
        return self.cube[:, m, :]


def build_dictionary(
    session: PilotSession,
    grid: AngularGrid,
    layout: ArrayLayout,
    model: DipoleModel,
) -> Dictionary:
    """Full dictionary over all blocks and antennas."""
    cube = np.zeros((session.V, layout.M, grid.G), dtype=complex)
    for m in range(layout.M):
        cube[:, m, :] = local_dictionary(session, m, grid, layout, model)
    return Dictionary(cube=cube, grid=grid)


def stack_observations(corr_blocks: list[np.ndarray], k: int) -> np.ndarray:
    """Stacked observation of user k over blocks: (M V,), block-major."""
    return np.concatenate([corr[:, k] for corr in corr_blocks])


# ---------------------------------------------------------------------------
# sparse recovery primitives


def _ls_on_columns(y: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR least squares on selected columns; raises when the triangular
    factor signals numerically dependent columns."""
    Q, R = np.linalg.qr(cols)
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() < 1e-10 * max(diag.max(), 1e-300):
        raise RankDeficientSupport(
            f"selected columns are numerically dependent (min |R_ii| = {diag.min():.3e})"
        )
    x = np.linalg.solve(R, Q.conj().T @ y)
    return x, y - cols @ x


def omp(y: np.ndarray, A: np.ndarray, L: int) -> tuple[list[int], list[float]]:
    """Orthogonal matching pursuit with exactly L selections and per-round LS
    refit.  Ties in the correlation maximum break toward the lowest index.
    Returns (support in selection order, residual norms incl. the initial)."""
    if L > A.shape[1]:
        raise ValueError("L exceeds the dictionary size")
    residual = y.astype(complex).copy()
    support: list[int] = []
    history = [float(np.linalg.norm(residual))]
    for _ in range(L):
        corr = np.abs(A.conj().T @ residual)
        corr[support] = -1.0  # already selected
        j = int(np.argmax(corr))
        support.append(j)
        x, residual = _ls_on_columns(y, A[:, support])
        history.append(float(np.linalg.norm(residual)))
    return support, history


def ls_gains(y: np.ndarray, A: np.ndarray, support) -> np.ndarray:
    """Least-squares gains on a fixed support."""
    support = list(support)
    if not support:
        return np.zeros(0, dtype=complex)
    x, _ = _ls_on_columns(y, A[:, support])
    return x


# ---------------------------------------------------------------------------
# results and reconstruction


@dataclass
class EstimationResult:
    """Sparse estimate for all users: grid supports, mapped angles, gains,
    plus the communication ledger of the producing scheme."""

    scheme: str
    supports: np.ndarray  # (K, L) int
    angles: np.ndarray  # (K, L) float
    gains: np.ndarray  # (K, L) complex
    grid: AngularGrid
    ledger: dict = field(default_factory=dict)
    residual_history: list = field(default_factory=list)

    def predict(self, placement: CouplerPlacement, layout: ArrayLayout,
                model: DipoleModel) -> np.ndarray:
        """Reconstructed effective channels (M, K) at an arbitrary placement,
        using freshly solved mechanical weights at the query positions."""
        K, L = self.angles.shape
        out = np.zeros((layout.M, K), dtype=complex)
        for m in range(layout.M):
            p_m = placement.positions[m]
            block = build_block(p_m, layout.active_position(m), model)
            w_m, _ = mech_weights(block)
            b = response_row(self.angles.reshape(-1), p_m, w_m, m, layout)
            out[m] = np.sum(self.gains * b.reshape(K, L), axis=1)
        return out


def reconstruct(result, placement: CouplerPlacement, layout: ArrayLayout,
                model: DipoleModel) -> np.ndarray:
    """Effective channels (M, K) predicted by an estimation result."""
    return result.predict(placement, layout, model)


def true_effective(spec: MultipathSpec, placement: CouplerPlacement,
                   layout: ArrayLayout, model: DipoleModel) -> np.ndarray:
    """Ground-truth effective channels (M, K) at a placement."""
    blocks = build_blocks(placement, layout, model)
    weights = all_mech_weights(blocks)
    return effective_channel(spec, placement, weights, layout).T


def nmse(
    result,
    spec: MultipathSpec,
    test_placements: list[CouplerPlacement],
    layout: ArrayLayout,
    model: DipoleModel,
) -> float:
    """Mean over users and query placements of ||g_hat - g||^2 / ||g||^2,
    norms taken across antennas."""
    if not test_placements:
        raise ValueError("need at least one test placement")
    ratios = []
    for placement in test_placements:
        g_hat = result.predict(placement, layout, model)
        g = true_effective(spec, placement, layout, model)
        denom = np.sum(np.abs(g) ** 2, axis=0)
        if np.any(denom < 1e-300):
            raise ZeroChannel("true effective channel vanished at a test placement")
        err = np.sum(np.abs(g_hat - g) ** 2, axis=0)
        ratios.append(err / denom)
    return float(np.mean(ratios))


def support_hit_rate(result, spec: MultipathSpec, grid: AngularGrid) -> float:
    """Fraction of true paths whose nearest grid bin was selected."""
    hits = 0
    total = 0
    for k in range(spec.K):
        true_bins = set(grid.nearest_index(spec.angles[k]).tolist())
        est = set(int(j) for j in result.supports[k])
        hits += len(true_bins & est)
        total += len(true_bins)
    return hits / total if total else 0.0


# ---------------------------------------------------------------------------
# centralized scheme


def centralized_estimate(
    session: PilotSession,
    observations: list[np.ndarray],
    L: int,
    grid: AngularGrid,
    layout: ArrayLayout,
    model: DipoleModel,
) -> EstimationResult:
    """Stack pilot-correlated observations over antennas and blocks at the
    central unit, then per user run OMP (exactly L selections) and LS gains."""
    corr_blocks = [pilot_correlate(Y, session.S, session.tau) for Y in observations]
    dictionary = build_dictionary(session, grid, layout, model)
    A = dictionary.A
    K = session.K
    supports = np.zeros((K, L), dtype=int)
    angles = np.zeros((K, L))
    gains = np.zeros((K, L), dtype=complex)
    residuals = []
    for k in range(K):
        y_k = stack_observations(corr_blocks, k)
        support, history = omp(y_k, A, L)
        supports[k] = support
        angles[k] = grid.angles[supports[k]]
        gains[k] = ls_gains(y_k, A, support)
        residuals.append(history)
    ledger = {
        "pilot_uplink_complex": layout.M * session.V * session.tau,
        "pilot_uplink_scalars": 2 * layout.M * session.V * session.tau,
    }
    return EstimationResult(
        scheme="centralized", supports=supports, angles=angles, gains=gains,
        grid=grid, ledger=ledger, residual_history=residuals,
    )


# ---------------------------------------------------------------------------
# distributed scheme


def local_proxy(
    A_m: np.ndarray, y_mk: np.ndarray, sigma_eff2: float, eta: float,
    eps_n: float = DEFAULT_EPS_NORM,
) -> tuple[np.ndarray, np.ndarray]:
    """Matched-filter proxy of one antenna for one user.

    Returns (rho over the full grid, indices passing the noise-calibrated
    threshold rho >= eta * sigma_eff2, sorted ascending)."""
    c = A_m.conj().T @ y_mk
    norms = np.sum(np.abs(A_m) ** 2, axis=0)
    rho = np.abs(c) ** 2 / (norms + eps_n)
    kept = np.where(rho >= eta * sigma_eff2)[0]
    return rho, kept


def fuse_and_select(uploads, L: int, G: int) -> tuple[np.ndarray, bool]:
    """Aggregate per-antenna (indices, rho values) into grid scores and take
    the top-L indices (descending score, ties toward the lowest index).
    The second return value is False when fewer than L grid points carried
    any score, signalling the caller to run the unthresholded fallback."""
    scores = np.zeros(G)
    for idx, rho in uploads:
        if len(idx):
            scores[idx] += rho
    order = np.lexsort((np.arange(G), -scores))
    support = order[:L].astype(int)
    return support, int(np.count_nonzero(scores > 0.0)) >= L


class LocalEstimator:
    """Per-antenna half of the distributed scheme.  Owns only the antenna's
    observations and position schedule; everything it produces for the
    central unit is explicit (proxies, sufficient statistics)."""

    def __init__(self, m: int, session: PilotSession, grid: AngularGrid,
                 layout: ArrayLayout, model: DipoleModel):
        self.m = m
        self.session = session
        self.grid = grid
        self.A_m = local_dictionary(session, m, grid, layout, model)
        self.corr = None  # (V, K) after correlate()

    def correlate(self, y_rows: list[np.ndarray]) -> None:
        """Pilot-correlate the antenna's own V received rows."""
        self.corr = np.stack([
            pilot_correlate(y_rows[v], self.session.S, self.session.tau)
            for v in range(self.session.V)
        ])

    def observation(self, k: int) -> np.ndarray:
        return self.corr[:, k]

    def proxies(self, k: int, eta: float, eps_n: float):
        rho, kept = local_proxy(self.A_m, self.observation(k),
                                self.session.sigma_eff2, eta, eps_n)
        return kept, rho[kept], rho

    def top_proxies(self, rho: np.ndarray, L: int):
        order = np.lexsort((np.arange(self.grid.G), -rho))
        idx = np.sort(order[:L])
        return idx, rho[idx]

    def suff_stats(self, k: int, support) -> tuple[np.ndarray, np.ndarray]:
        A_g = self.A_m[:, list(support)]
        R = A_g.conj().T @ A_g
        q = A_g.conj().T @ self.observation(k)
        return R, q


def aggregate_gains(stats: list[tuple[np.ndarray, np.ndarray]], eps_k) -> np.ndarray:
    """Sum per-antenna sufficient statistics and solve the loaded normal
    equations; eps_k may be a float or "auto" (1e-8 tr(R)/L)."""
    R = np.zeros_like(stats[0][0])
    q = np.zeros_like(stats[0][1])
    for R_m, q_m in stats:
        R = R + R_m
        q = q + q_m
    L = R.shape[0]
    if eps_k == "auto":
        eps_k = 1e-8 * float(np.real(np.trace(R))) / max(L, 1)
    R_loaded = R + eps_k * np.eye(L)
    cond = float(np.linalg.cond(R_loaded))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularAggregate(f"aggregated Gram condition {cond:.3e} after loading")
    return np.linalg.solve(R_loaded, q)


def distributed_gains(
    estimators: list[LocalEstimator], k: int, support, eps_k="auto"
) -> tuple[np.ndarray, dict]:
    """Gain estimate for one user from per-antenna sufficient statistics,
    with the closed-form upload ledger (L^2 + L complex per antenna)."""
    stats = [est.suff_stats(k, support) for est in estimators]
    gains = aggregate_gains(stats, eps_k)
    L = len(support)
    M = len(estimators)
    ledger = {
        "suffstat_complex": M * (L * L + L),
        "suffstat_scalars": 2 * M * (L * L + L),
    }
    return gains, ledger


def distributed_estimate(
    session: PilotSession,
    observations: list[np.ndarray],
    L: int,
    grid: AngularGrid,
    layout: ArrayLayout,
    model: DipoleModel,
    eta: float = DEFAULT_THRESHOLD,
    eps_n: float = DEFAULT_EPS_NORM,
    eps_k="auto",
) -> EstimationResult:
    """Full distributed pipeline: local proxies, central fusion of the
    support, local sufficient statistics, central loaded-LS gains."""
    M = layout.M
    K = session.K
    estimators = [LocalEstimator(m, session, grid, layout, model) for m in range(M)]
    for m, est in enumerate(estimators):
        est.correlate([observations[v][m] for v in range(session.V)])

    supports = np.zeros((K, L), dtype=int)
    angles = np.zeros((K, L))
    gains = np.zeros((K, L), dtype=complex)
    proxy_scalars = 0
    fallback_rounds = 0
    suffstat_scalars = 0
    for k in range(K):
        uploads = []
        rho_full = []
        for est in estimators:
            kept, rho_kept, rho = est.proxies(k, eta, eps_n)
            uploads.append((kept, rho_kept))
            rho_full.append(rho)
            proxy_scalars += 2 * len(kept)
        support, ok = fuse_and_select(uploads, L, grid.G)
        if not ok:
            # too little survived thresholding: one extra round of
            # unthresholded top-L proxies from every antenna
            fallback_rounds += 1
            uploads = [est.top_proxies(rho_full[m], L)
                       for m, est in enumerate(estimators)]
            proxy_scalars += sum(2 * len(idx) for idx, _ in uploads)
            support, _ = fuse_and_select(uploads, L, grid.G)
        supports[k] = support
        angles[k] = grid.angles[support]
        gains[k], g_ledger = distributed_gains(estimators, k, support, eps_k)
        suffstat_scalars += g_ledger["suffstat_scalars"]

    ledger = {
        "proxy_scalars": proxy_scalars,
        "fallback_rounds": fallback_rounds,
        "support_scalars": M * K * L,
        "suffstat_complex": suffstat_scalars // 2,
        "suffstat_scalars": suffstat_scalars,
        "gain_scalars": M * K * 2 * L,
    }
    return EstimationResult(
        scheme="distributed", supports=supports, angles=angles, gains=gains,
        grid=grid, ledger=ledger,
    )


# ---------------------------------------------------------------------------
# exhaustive measurement baseline


@dataclass
class ExhaustiveResult:
    """Direct per-candidate measurement table.  For each antenna and each
    coupler, the effective channel is measured with that coupler at every
    lattice candidate and the remaining couplers parked at the reference
    placement.  Prediction snaps each coupler to its nearest feasible
    candidate and applies the first-order correction around the parked
    measurement (exact lookup for N = 1)."""

    scheme: str
    candidates: np.ndarray  # (M, D, 2) lattice points per antenna region
    feasible: np.ndarray  # (M, N, D) bool
    table: np.ndarray  # (M, N, D, K) complex
    base: np.ndarray  # (M, K) complex, parked measurement
    parked: CouplerPlacement
    ledger: dict

    def predict(self, placement: CouplerPlacement, layout: ArrayLayout,
                model: DipoleModel) -> np.ndarray:
        M, N, D, K = self.table.shape
        out = np.zeros((M, K), dtype=complex)
        for m in range(M):
            acc = self.base[m].copy()
            for n in range(N):
                ok = self.feasible[m, n]
                if not np.any(ok):
                    continue
                cand = self.candidates[m]
                d2 = np.sum((cand - placement.positions[m, n]) ** 2, axis=1)
                d2 = np.where(ok, d2, np.inf)
                d_idx = int(np.argmin(d2))
                acc = acc + (self.table[m, n, d_idx] - self.base[m])
            out[m] = acc
        return out


def exhaustive_baseline(
    session: PilotSession,
    spec: MultipathSpec,
    layout: ArrayLayout,
    model: DipoleModel,
    D: int = 400,
) -> ExhaustiveResult:
    """Measure the effective channel over a D-point lattice per coupler
    region via pilot correlation (noise at the session's level)."""
    side = max(int(round(np.sqrt(D))), 1)
    D_actual = side * side
    M, N, K = layout.M, layout.N, session.K
    parked = session.placements[0]
    rng = np.random.default_rng([session.seed, 3])

    candidates = np.zeros((M, D_actual, 2))
    for m in range(M):
        lo, hi = layout.region_bounds(m)
        xs = lo[0] + (np.arange(side) + 0.5) * (hi[0] - lo[0]) / side
        ys = lo[1] + (np.arange(side) + 0.5) * (hi[1] - lo[1]) / side
        xx, yy = np.meshgrid(xs, ys)
        candidates[m] = np.column_stack([xx.ravel(), yy.ravel()])

    def measure_row(placement, m):
        g = true_effective(spec, placement, layout, model)[m]  # (K,)
        noise = np.sqrt(session.sigma2 / 2.0) * (
            rng.standard_normal(session.tau) + 1j * rng.standard_normal(session.tau)
        )
        y = g @ session.S + noise
        return pilot_correlate(y, session.S, session.tau)

    base = np.zeros((M, K), dtype=complex)
    for m in range(M):
        base[m] = measure_row(parked, m)

    table = np.zeros((M, N, D_actual, K), dtype=complex)
    feasible = np.zeros((M, N, D_actual), dtype=bool)
    for m in range(M):
        q = layout.active_position(m)
        for n in range(N):
            others = np.delete(parked.positions[m], n, axis=0)
            ref = np.vstack([q[None, :], others]) if others.size else q[None, :]
            for d in range(D_actual):
                c = candidates[m, d]
                if np.min(np.hypot(ref[:, 0] - c[0], ref[:, 1] - c[1])) < layout.min_sep_m:
                    continue
                feasible[m, n, d] = True
                moved = parked.copy()
                moved.positions[m, n] = c
                table[m, n, d] = measure_row(moved, m)

    ledger = {
        "candidate_measurements_per_user_per_block": M * N * D_actual,
        "baseline_measurements_per_user_per_block": M,
        "lattice_side": side,
    }
    return ExhaustiveResult(
        scheme="exhaustive", candidates=candidates, feasible=feasible,
        table=table, base=base, parked=parked, ledger=ledger,
    )
