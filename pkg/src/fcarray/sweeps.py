"""Monte-Carlo experiment engines behind the CLI: per-seed metric
computations, sweep orchestration with a worker pool, CSV/manifest emission,
and the coupler-region gain heatmap.

Every row of every CSV is reproducible in isolation: the channel draw, the
pilot session, and the evaluation placements are derived from the row's seed
through independent named substreams, never from loop state.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import chanest
from .channel import sample_channels
from .errors import ConfigError
from .geometry import (
    ArrayLayout,
    CouplerPlacement,
    random_feasible_placement,
    uniform_placement,
)
from .impedance import mutual_impedance
from .optimizer import (
    SCAConfig,
    optimize,
    screened_initial_placement,
)
from .precoding import (
    active_only_state,
    fc_state,
    fully_active_state,
)
from .runtime import export_message_log, run_algorithm1, run_algorithm3
from .scenario import Scenario, write_manifest


def _streams(seed: int, n: int = 4) -> list[int]:
    """Independent substream seeds derived from one row seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def sca_config_from(scenario: Scenario) -> SCAConfig:
    sca = scenario.doc["sca"]
    return SCAConfig(
        eps_stop=sca["eps_stop"],
        T_max=sca["T_max"],
        alpha_schedule=sca["alpha_schedule"],
    )


# ---------------------------------------------------------------------------
# rate metrics


def rate_metric(
    scheme: str,
    seed: int,
    scenario: Scenario,
    layout: ArrayLayout,
    P_max: float,
    sigma2: float,
) -> float:
    """Sum rate of one scheme on one seeded channel draw."""
    K = scenario.doc["channel"]["K"]
    L = scenario.doc["channel"]["L"]
    ch_seed, _, _, _ = _streams(seed)
    spec = sample_channels(ch_seed, K, L, layout)
    model = scenario.model(layout)
    if scheme == "active-only":
        return active_only_state(spec, layout, model, P_max, sigma2).sum_rate
    if scheme == "fixed-coupler":
        return fc_state(spec, uniform_placement(layout), layout, model,
                        P_max, sigma2).sum_rate
    if scheme == "fully-active":
        return fully_active_state(spec, layout, model, P_max, sigma2).sum_rate
    if scheme == "fc-optimized":
        cfg = sca_config_from(scenario)
        if scenario.doc["sca"]["init"] == "screened":
            initial = screened_initial_placement(
                layout, spec, model, P_max, sigma2,
                points_per_axis=scenario.doc["sca"]["screen_points"],
            )
        else:
            initial = uniform_placement(layout)
        result = optimize(initial, cfg, spec, layout, model, P_max, sigma2)
        return result.trace.rates[-1]
    raise ConfigError(f"unknown rate scheme {scheme!r}", field="schemes")


def _rate_job(args) -> dict:
    scenario_doc, axis, value, scheme, seed = args
    scenario = Scenario(scenario_doc)
    K = scenario.doc["channel"]["K"]
    P_ref = scenario.P_max
    sigma2 = scenario.sigma2_rate(K, P_ref)
    layout = scenario.layout()
    P_max = P_ref
    variant = ""
    if axis == "power":
        P_max = 10.0 ** ((value - 30.0) / 10.0)
    elif axis == "users":
        scenario.doc["channel"]["K"] = int(value)
        sigma2 = scenario.sigma2_rate(K, P_ref)  # noise fixed at the reference K
    elif axis == "region":
        n_value, a_value = value
        layout = scenario.layout(N=int(n_value), A=float(a_value))
        variant = f"N={int(n_value)}"
        value = a_value
    rate = rate_metric(scheme, seed, scenario, layout, P_max, sigma2)
    return {
        "seed": seed, "axis": axis, "value": value, "scheme": scheme,
        "variant": variant, "metric": "sum_rate_bps_hz", "metric_value": rate,
    }


# ---------------------------------------------------------------------------
# estimation metrics


def estimation_metrics(
    scheme: str,
    seed: int,
    scenario: Scenario,
    snr_db: float,
    V: int | None = None,
    tau: int | None = None,
) -> dict:
    """NMSE, support hit rate, and communication scalars for one trial."""
    est = scenario.doc["estimation"]
    V = est["V"] if V is None else V
    tau = est["tau"] if tau is None else tau
    K = scenario.doc["channel"]["K"]
    L = est["L"]
    layout = scenario.layout()
    model = scenario.model(layout)
    grid = chanest.AngularGrid(est["G"])
    sigma2 = Scenario.sigma2_estimation(snr_db)
    ch_seed, sess_seed, eval_seed, _ = _streams(seed)
    spec = sample_channels(ch_seed, K, L, layout)
    session = chanest.make_session(layout, K, tau, V, sigma2, sess_seed)
    observations = chanest.run_pilot_phase(session, spec, layout, model)

    if scheme == "centralized":
        result = chanest.centralized_estimate(session, observations, L, grid,
                                              layout, model)
        comm = result.ledger["pilot_uplink_scalars"]
    elif scheme == "distributed":
        result = chanest.distributed_estimate(session, observations, L, grid,
                                              layout, model, eta=est["eta"])
        lg = result.ledger
        comm = (lg["proxy_scalars"] + lg["support_scalars"]
                + lg["suffstat_scalars"] + lg["gain_scalars"])
    elif scheme == "exhaustive":
        result = chanest.exhaustive_baseline(session, spec, layout, model,
                                             D=est["D"])
        lg = result.ledger
        comm = 2 * K * (lg["candidate_measurements_per_user_per_block"]
                        + lg["baseline_measurements_per_user_per_block"])
    else:
        raise ConfigError(f"unknown estimation scheme {scheme!r}",
                          field="estimation.schemes")

    rng = np.random.default_rng(eval_seed)
    placements = [random_feasible_placement(layout, rng)
                  for _ in range(est["test_placements"])]
    value = chanest.nmse(result, spec, placements, layout, model)
    hit = (chanest.support_hit_rate(result, spec, grid)
           if isinstance(result, chanest.EstimationResult) else float("nan"))
    return {
        "seed": seed, "snr_db": snr_db, "V": V, "tau": tau, "scheme": scheme,
        "nmse": value, "support_hit_rate": hit, "comm_scalars": comm,
    }


def _estimation_job(args) -> dict:
    scenario_doc, axis, value, scheme, seed = args
    scenario = Scenario(scenario_doc)
    est = scenario.doc["estimation"]
    if axis == "snr":
        return estimation_metrics(scheme, seed, scenario, snr_db=value)
    if axis == "pilot":
        return estimation_metrics(scheme, seed, scenario,
                                  snr_db=est["snr_db"], tau=int(value))
    raise ConfigError(f"unknown estimation axis {axis!r}", field="sweep")


# ---------------------------------------------------------------------------
# sweep orchestration


RATE_AXES = {"power", "users", "region"}
ESTIMATION_AXES = {"snr", "pilot"}

_RATE_FIELDS = ["seed", "axis", "value", "scheme", "variant", "metric", "metric_value"]
_EST_FIELDS = ["seed", "snr_db", "V", "tau", "scheme", "nmse",
               "support_hit_rate", "comm_scalars"]


def _run_jobs(jobs, worker, workers: int):
    if workers <= 1:
        return [worker(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, jobs, chunksize=1))


def sweep_jobs(scenario: Scenario, axis: str) -> list[tuple]:
    sw = scenario.doc["sweep"]
    seeds = scenario.seeds()
    doc = scenario.doc
    jobs = []
    if axis == "power":
        for value in sw["power_dbm"]:
            for scheme in doc["schemes"]:
                for seed in seeds:
                    jobs.append((doc, axis, float(value), scheme, seed))
    elif axis == "users":
        for value in sw["users"]:
            for scheme in doc["schemes"]:
                for seed in seeds:
                    jobs.append((doc, axis, int(value), scheme, seed))
    elif axis == "region":
        for n_value in sw["region_n"]:
            for a_value in sw["region"]:
                for seed in seeds:
                    jobs.append((doc, axis, (int(n_value), float(a_value)),
                                 "fc-optimized", seed))
    elif axis == "snr":
        for value in sw["snr_db"]:
            for scheme in doc["estimation"]["schemes"]:
                for seed in seeds:
                    jobs.append((doc, axis, float(value), scheme, seed))
    elif axis == "pilot":
        for value in sw["pilot"]:
            for scheme in doc["estimation"]["schemes"]:
                for seed in seeds:
                    jobs.append((doc, axis, int(value), scheme, seed))
    else:
        raise ConfigError(
            f"unknown sweep axis {axis!r}; choose from "
            f"{sorted(RATE_AXES | ESTIMATION_AXES)}", field="sweep",
        )
    return jobs


def run_sweep(scenario: Scenario, axis: str, out_dir, workers: int = 1) -> list[dict]:
    """Run one sweep and write <axis>.csv plus manifest.json in out_dir."""
    jobs = sweep_jobs(scenario, axis)
    worker = _rate_job if axis in RATE_AXES else _estimation_job
    rows = _run_jobs(jobs, worker, workers)
    os.makedirs(out_dir, exist_ok=True)
    fields = _RATE_FIELDS if axis in RATE_AXES else _EST_FIELDS
    csv_path = os.path.join(out_dir, f"sweep_{axis}.csv")
    _write_rows(csv_path, fields, rows)
    write_manifest(
        os.path.join(out_dir, "manifest.json"),
        scenario.manifest(f"sweep {axis}", {"rows": len(rows), "workers": workers,
                                            "csv": os.path.basename(csv_path)}),
    )
    return rows


def run_estimate(scenario: Scenario, out_dir, workers: int = 1) -> list[dict]:
    """Estimation run at the scenario's own SNR/V/tau for every scheme/seed."""
    doc = scenario.doc
    est = doc["estimation"]
    jobs = [(doc, "snr", float(est["snr_db"]), scheme, seed)
            for scheme in est["schemes"] for seed in scenario.seeds()]
    rows = _run_jobs(jobs, _estimation_job, workers)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "estimate.csv")
    _write_rows(csv_path, _EST_FIELDS, rows)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   scenario.manifest("estimate", {"rows": len(rows)}))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(fields)
        for row in rows:
            wr.writerow([_fmt(row[f]) for f in fields])


# ---------------------------------------------------------------------------
# optimize entry (single scenario run)


def run_optimize(scenario: Scenario, seed: int, out_dir) -> dict:
    """One SCA run; writes the trace CSV, a summary JSON, and the final
    placement."""
    from .geometry import save_placement

    layout = scenario.layout()
    model = scenario.model(layout)
    K = scenario.doc["channel"]["K"]
    sigma2 = scenario.sigma2_rate(K)
    ch_seed, _, _, _ = _streams(seed)
    spec = sample_channels(ch_seed, K, scenario.doc["channel"]["L"], layout)
    cfg = sca_config_from(scenario)
    initial = uniform_placement(layout)
    result = optimize(initial, cfg, spec, layout, model, scenario.P_max, sigma2)
    os.makedirs(out_dir, exist_ok=True)
    result.trace.to_csv(os.path.join(out_dir, "trace.csv"))
    result.trace.to_json(os.path.join(out_dir, "trace_summary.json"))
    save_placement(os.path.join(out_dir, "placement.json"), result.placement, layout)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   scenario.manifest("optimize", {"seed": seed,
                                                  **result.trace.summary()}))
    return result.trace.summary()


# ---------------------------------------------------------------------------
# heatmap


@dataclass
class HeatmapResult:
    xs: np.ndarray
    ys: np.ndarray
    gain_db: np.ndarray  # (res, res), NaN where infeasible
    trajectory: list[dict]


def whitened_gain(spec, placement, layout, model) -> float:
    """sum_m |g_m|^2 / b_m: the K=1 rate is monotone in this quantity."""
    state = fc_state(spec, placement, layout, model, P_max=1.0, sigma2=1.0)
    return float(np.sum(np.abs(state.G[0]) ** 2 / state.B))


def compute_heatmap(scenario: Scenario, seed: int) -> HeatmapResult:
    """Power-normalized channel gain over one antenna's coupler region
    (remaining antennas held at the uniform placement), plus the optimizer
    trajectory of that coupler."""
    doc = scenario.doc
    if doc["layout"]["N"] != 1 or doc["channel"]["K"] != 1:
        raise ConfigError("heatmap requires N=1 and K=1", field="heatmap")
    layout = scenario.layout()
    model = scenario.model(layout)
    res = doc["heatmap"]["resolution"]
    a = doc["heatmap"]["antenna"]
    ch_seed, _, _, _ = _streams(seed)
    spec = sample_channels(ch_seed, 1, doc["channel"]["L"], layout)

    base = uniform_placement(layout)
    base_state = fc_state(spec, base, layout, model, P_max=1.0, sigma2=1.0)
    idx_other = [m for m in range(layout.M) if m != a]
    c0 = float(np.sum(np.abs(base_state.G[0, idx_other]) ** 2
                      / base_state.B[idx_other]))

    q = layout.active_position(a)
    lo, hi = layout.region_bounds(a)
    xs = np.linspace(lo[0], hi[0], res)
    ys = np.linspace(lo[1], hi[1], res)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    dist = np.hypot(xx - q[0], yy - q[1])
    feasible = dist >= layout.min_sep_m

    k0 = 2.0 * np.pi / layout.lam
    z_self = model.self_impedance
    x_load = model.load_impedance
    rs = np.real(z_self)
    gain = np.full((res, res), np.nan)
    z_bar = mutual_impedance(dist[feasible], model)
    w = z_bar / (z_self + x_load)
    b = rs * (1.0 + np.abs(w) ** 2) - 2.0 * np.real(z_bar) * np.real(w)
    # single-user channel at antenna a: active entry minus w * coupler sum
    angles = spec.angles[0]
    gains_path = spec.gains[0]
    h_a = gains_path @ np.exp(-1j * k0 * layout.spacing_m * np.sin(angles) * a)
    kx = np.cos(angles)
    ky = np.sin(angles)
    proj = np.outer(xx[feasible], kx) + np.outer(yy[feasible], ky)
    h_c = np.exp(-1j * k0 * proj) @ gains_path
    g_a = h_a - w * h_c
    gain[feasible] = 10.0 * np.log10(c0 + np.abs(g_a) ** 2 / b)

    cfg = sca_config_from(scenario)
    cfg.snapshot_placements = True
    sigma2 = scenario.sigma2_rate(1)
    result = optimize(base, cfg, spec, layout, model, scenario.P_max, sigma2)
    trajectory = []
    for t, snap in enumerate(result.trace.placements):
        placement = CouplerPlacement(snap)
        trajectory.append({
            "iteration": t,
            "x": float(snap[a, 0, 0]),
            "y": float(snap[a, 0, 1]),
            "gain_db": 10.0 * np.log10(whitened_gain(spec, placement, layout, model)),
            "rate": result.trace.rates[t],
        })
    return HeatmapResult(xs=xs, ys=ys, gain_db=gain, trajectory=trajectory)


def run_heatmap(scenario: Scenario, seed: int, out_dir) -> HeatmapResult:
    hm = compute_heatmap(scenario, seed)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "heatmap.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x_m", "y_m", "gain_db"])
        for i, x in enumerate(hm.xs):
            for j, y in enumerate(hm.ys):
                wr.writerow([_fmt(float(x)), _fmt(float(y)),
                             _fmt(float(hm.gain_db[i, j]))])
    _write_rows(os.path.join(out_dir, "trajectory.csv"),
                ["iteration", "x", "y", "gain_db", "rate"], hm.trajectory)
    write_manifest(
        os.path.join(out_dir, "manifest.json"),
        scenario.manifest("heatmap", {
            "seed": seed,
            "note": "gain is sum_m |g_m|^2/b_m in dB; trajectory overlays the "
                    "tracked antenna's coupler while all couplers move",
        }),
    )
    return hm


# ---------------------------------------------------------------------------
# communication ledgers


def run_ledger(scenario: Scenario, seed: int, out_dir) -> dict:
    """Run both message-routed algorithms on the scenario and export their
    logs and ledgers."""
    layout = scenario.layout()
    model = scenario.model(layout)
    doc = scenario.doc
    K = doc["channel"]["K"]
    sigma2 = scenario.sigma2_rate(K)
    ch_seed, sess_seed, _, _ = _streams(seed)
    spec = sample_channels(ch_seed, K, doc["channel"]["L"], layout)
    cfg = sca_config_from(scenario)
    initial = uniform_placement(layout)
    result1, log1, ledger1 = run_algorithm1(initial, cfg, spec, layout, model,
                                            scenario.P_max, sigma2)

    est = doc["estimation"]
    sigma2_est = Scenario.sigma2_estimation(est["snr_db"])
    session = chanest.make_session(layout, K, est["tau"], est["V"],
                                   sigma2_est, sess_seed)
    observations = chanest.run_pilot_phase(session, spec, layout, model)
    grid = chanest.AngularGrid(est["G"])
    result3, log3, ledger3 = run_algorithm3(session, observations, est["L"],
                                            grid, layout, model, eta=est["eta"])

    os.makedirs(out_dir, exist_ok=True)
    export_message_log(os.path.join(out_dir, "algorithm1_log.ndjson"), log1)
    export_message_log(os.path.join(out_dir, "algorithm3_log.ndjson"), log3)
    summary = {
        "algorithm1": {
            "ledger": ledger1.to_dict(),
            "final_rate": result1.trace.rates[-1],
            "rounds": result1.trace.rounds,
            "closed_form": result1.trace.comm,
        },
        "algorithm3": {
            "ledger": ledger3.to_dict(),
            "chanest_ledger": result3.ledger,
        },
    }
    write_manifest(os.path.join(out_dir, "ledger.json"), summary)
    write_manifest(os.path.join(out_dir, "manifest.json"),
                   scenario.manifest("ledger", {"seed": seed}))
    return summary
