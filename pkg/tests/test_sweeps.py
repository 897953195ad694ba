import numpy as np
import pytest

from fcarray.scenario import Scenario
from fcarray.sweeps import (
    _estimation_job,
    _rate_job,
    compute_heatmap,
    estimation_metrics,
    rate_metric,
    sweep_jobs,
)


HEAT_DOC = {
    "layout": {"M": 5, "N": 1},
    "channel": {"K": 1, "L": 15},
    "sca": {"T_max": 40},
    "heatmap": {"resolution": 201, "antenna": 2},
    "seeds": {"start": 0, "count": 1},
}


def count_strict_local_maxima(Z):
    """Interior cells strictly above their 8 neighbors (NaN-safe)."""
    count = 0
    n, m = Z.shape
    for i in range(1, n - 1):
        for j in range(1, m - 1):
            c = Z[i, j]
            if np.isnan(c):
                continue
            neigh = Z[i - 1:i + 2, j - 1:j + 2].ravel()
            neigh = np.delete(neigh, 4)
            if np.all(np.isnan(neigh) | (c > neigh)):
                count += 1
    return count


@pytest.fixture(scope="module")
def heat():
    return compute_heatmap(Scenario(HEAT_DOC), seed=1)


class TestHeatmap:
    def test_surface_continuity(self, heat):
        # adjacent finite cells at 201x201 never jump by 10 dB
        Z = heat.gain_db
        dx = np.abs(np.diff(Z, axis=0))
        dy = np.abs(np.diff(Z, axis=1))
        jump = max(np.nanmax(dx), np.nanmax(dy))
        assert jump < 10.0

    def test_multiple_local_extrema(self):
        # rich multipath produces several strict local maxima (statistical
        # property over seeds, not exact values)
        counts = []
        for seed in (1, 2, 3):
            hm = compute_heatmap(Scenario(HEAT_DOC), seed=seed)
            counts.append(count_strict_local_maxima(hm.gain_db))
        assert all(c >= 2 for c in counts)

    def test_trajectory_endpoint_improves(self, heat):
        traj = heat.trajectory
        assert traj[-1]["gain_db"] >= traj[0]["gain_db"]
        assert traj[-1]["rate"] >= traj[0]["rate"]

    def test_infeasible_cells_masked(self, heat):
        # the spacing guard blanks a disc around the active element
        assert np.isnan(heat.gain_db).sum() > 0

    def test_requires_single_coupler_single_user(self):
        with pytest.raises(Exception):
            compute_heatmap(Scenario({"layout": {"N": 2}, "channel": {"K": 1}}),
                            seed=0)


SMALL_DOC = {
    "layout": {"M": 2, "N": 1},
    "channel": {"K": 2, "L": 4},
    "seeds": {"start": 0, "count": 2},
    "sca": {"T_max": 3},
    "estimation": {"V": 2, "tau": 4, "G": 16, "L": 2, "test_placements": 2},
    "sweep": {"power_dbm": [30.0], "users": [2], "region": [1.0],
              "region_n": [1], "snr_db": [0.0], "pilot": [4]},
}


class TestRowReproducibility:
    def test_rate_row_reproducible_in_isolation(self):
        scenario = Scenario(SMALL_DOC)
        job = (scenario.doc, "power", 30.0, "fixed-coupler", 1)
        a = _rate_job(job)
        b = _rate_job(job)
        assert a == b

    def test_estimation_row_reproducible_in_isolation(self):
        scenario = Scenario(SMALL_DOC)
        job = (scenario.doc, "snr", 0.0, "centralized", 1)
        assert _estimation_job(job) == _estimation_job(job)

    def test_jobs_enumerate_all_combinations(self):
        scenario = Scenario(SMALL_DOC)
        jobs = sweep_jobs(scenario, "power")
        # 1 power value x default 4-ish schemes? SMALL uses default schemes
        schemes = scenario.doc["schemes"]
        assert len(jobs) == len(schemes) * 2

    def test_exhaustive_scheme_runs(self):
        doc = dict(SMALL_DOC)
        doc["estimation"] = dict(SMALL_DOC["estimation"], D=9,
                                 schemes=["exhaustive"])
        scenario = Scenario(doc)
        row = estimation_metrics("exhaustive", 0, scenario, snr_db=10.0)
        assert row["nmse"] >= 0.0
        assert row["comm_scalars"] > 0


class TestRateMetricSchemes:
    def test_all_schemes_positive(self):
        scenario = Scenario(SMALL_DOC)
        layout = scenario.layout()
        for scheme in ("active-only", "fixed-coupler", "fully-active",
                       "fc-optimized"):
            rate = rate_metric(scheme, 0, scenario, layout, 1.0, 0.05)
            assert rate > 0.0
