import numpy as np
import pytest

from fcarray import (
    ArrayLayout,
    is_feasible,
    linearize_spacing,
    load_placement,
    project_onto_set,
    random_feasible_placement,
    save_placement,
    uniform_placement,
)
from fcarray.errors import AnchorInfeasible, DimensionMismatch, InfeasibleLayout


class TestLayout:
    def test_wavelength(self):
        lay = ArrayLayout(M=1, N=1, f_c=7e9)
        assert abs(lay.lam - 299792458.0 / 7e9) / lay.lam < 1e-12

    def test_active_positions(self):
        lay = ArrayLayout(M=3, N=0)
        q = lay.active_positions()
        assert np.allclose(q[:, 0], 0.0)
        assert np.allclose(np.diff(q[:, 1]), 2.2 * lay.lam)

    @pytest.mark.parametrize("kw", [
        {"M": 0, "N": 1}, {"M": 1, "N": -1}, {"M": 1, "N": 1, "d_y": 0.0},
        {"M": 1, "N": 1, "d_min": 0.0}, {"M": 1, "N": 1, "d_min": 3.0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ArrayLayout(**kw)


class TestUniformPlacement:
    def test_single_coupler_offset(self):
        lay = ArrayLayout(M=1, N=1)
        pl = uniform_placement(lay)
        # one point just outside the spacing guard, on boresight
        off = pl.positions[0, 0] - lay.active_position(0)
        assert off[1] == 0.0
        assert off[0] >= lay.min_sep_m
        assert is_feasible(pl, lay).ok

    def test_two_couplers_symmetric(self):
        lay = ArrayLayout(M=3, N=2)
        pl = uniform_placement(lay)
        for m in range(3):
            a, b = pl.positions[m] - lay.active_position(m)
            # mirror pair about the boresight axis through q_m
            assert a[0] == pytest.approx(b[0])
            assert a[1] == pytest.approx(-b[1])
            assert np.hypot(*(a - b)) >= lay.min_sep_m
        assert is_feasible(pl, lay).ok

    def test_same_for_all_antennas(self):
        lay = ArrayLayout(M=4, N=3)
        pl = uniform_placement(lay)
        offs = pl.positions - lay.active_positions()[:, None, :]
        for m in range(1, 4):
            assert np.allclose(offs[m], offs[0], atol=1e-12 * lay.lam)

    def test_packing_bound(self):
        lay = ArrayLayout(M=1, N=100, region_side=1.0, d_min=0.5)
        with pytest.raises(InfeasibleLayout):
            uniform_placement(lay)

    def test_deterministic(self):
        lay = ArrayLayout(M=2, N=3)
        assert np.array_equal(uniform_placement(lay).positions,
                              uniform_placement(lay).positions)

    def test_small_region_configs(self):
        # the region-size sweep exercises these
        for A in (0.5, 1.0, 2.0):
            for N in (2, 3):
                lay = ArrayLayout(M=2, N=N, region_side=A)
                assert is_feasible(uniform_placement(lay), lay).ok


class TestIsFeasible:
    def test_uniform_ok(self, layout):
        assert is_feasible(uniform_placement(layout), layout).ok

    def test_coincident_couplers(self, layout):
        pl = uniform_placement(layout)
        pl.positions[0, 1] = pl.positions[0, 0]
        report = is_feasible(pl, layout)
        assert not report.ok
        spacing = [v for v in report.violations if v.kind == "spacing"]
        assert spacing
        assert spacing[0].margin == pytest.approx(-layout.min_sep_m)

    def test_coupler_on_active_element(self, layout):
        pl = uniform_placement(layout)
        pl.positions[2, 0] = layout.active_position(2)
        report = is_feasible(pl, layout)
        assert not report.ok
        pairs = [v.pair for v in report.violations if v.antenna == 2]
        assert any(p[0] == 0 for p in pairs)

    def test_outside_region(self, layout):
        pl = uniform_placement(layout)
        pl.positions[1, 0] = layout.active_position(1) + np.array(
            [layout.region_side_m, 0.0])
        report = is_feasible(pl, layout)
        assert any(v.kind == "region" for v in report.violations)

    def test_dimension_mismatch(self, layout):
        pl = uniform_placement(ArrayLayout(M=2, N=2))
        with pytest.raises(DimensionMismatch):
            is_feasible(pl, layout)


class TestLinearize:
    def test_anchor_slack(self, layout):
        anchor = uniform_placement(layout)
        for m in range(layout.M):
            fs = linearize_spacing(anchor, m, layout)
            slacks = fs.slacks(anchor.antenna_vector(m))
            assert np.all(slacks >= 0.0)
            # slack of each pair equals d(anchor) - d_min^2 exactly
            pts = np.vstack([layout.active_position(m)[None, :],
                             anchor.positions[m]])
            for idx, (a, b) in enumerate(fs.pairs):
                d_val = np.sum((pts[a] - pts[b]) ** 2)
                assert slacks[idx] == pytest.approx(d_val - layout.min_sep_m**2)

    def test_single_coupler_normal(self):
        lay = ArrayLayout(M=1, N=1)
        anchor = uniform_placement(lay)
        fs = linearize_spacing(anchor, 0, lay)
        assert fs.normals.shape == (1, 2)
        expected = 2.0 * (lay.active_position(0) - anchor.positions[0, 0])
        assert np.allclose(fs.normals[0], expected)

    def test_members_satisfy_true_constraints(self, layout, rng):
        # rejection-sample the polytope; every member must be feasible in the
        # original nonconvex set (inner approximation)
        anchor = uniform_placement(layout)
        m = 1
        fs = linearize_spacing(anchor, m, layout)
        found = 0
        for _ in range(20000):
            x = rng.uniform(fs.box_lo, fs.box_hi)
            if fs.contains(x):
                found += 1
                pl = anchor.with_antenna_vector(m, x)
                assert is_feasible(pl, layout).ok
            if found >= 1000:
                break
        assert found >= 200  # sanity: the set is not degenerate

    def test_infeasible_anchor_rejected(self, layout):
        bad = uniform_placement(layout)
        bad.positions[0, 1] = bad.positions[0, 0]
        with pytest.raises(AnchorInfeasible):
            linearize_spacing(bad, 0, layout)

    def test_margin_shrinks_set(self, layout):
        anchor = uniform_placement(layout)
        fs0 = linearize_spacing(anchor, 0, layout)
        fs1 = linearize_spacing(anchor, 0, layout, margin=1e-4 * layout.lam)
        assert np.all(fs1.box_lo >= fs0.box_lo)
        assert np.all(fs1.offsets <= fs0.offsets)


class TestProjection:
    def test_member_unchanged(self, layout):
        anchor = uniform_placement(layout)
        fs = linearize_spacing(anchor, 0, layout)
        x = anchor.antenna_vector(0)
        assert np.allclose(project_onto_set(x, fs, lam=layout.lam), x)

    def test_box_only_clamp(self, layout):
        anchor = uniform_placement(layout)
        fs = linearize_spacing(anchor, 0, layout)
        x = anchor.antenna_vector(0)
        y = x.copy()
        y[0] = fs.box_hi[0] + 0.01  # push one coordinate out of the box
        proj = project_onto_set(y, fs, lam=layout.lam)
        expected = np.clip(y, fs.box_lo, fs.box_hi)
        if fs.contains(expected, atol=1e-12):
            assert np.allclose(proj, expected, atol=1e-10)

    def test_single_halfspace_closed_form(self):
        lay = ArrayLayout(M=1, N=1)
        anchor = uniform_placement(lay)
        fs = linearize_spacing(anchor, 0, lay)
        # a point violating only the half-space, well inside the box
        a = fs.normals[0]
        b = fs.offsets[0]
        x = anchor.antenna_vector(0) + 0.4 * lay.min_sep_m * a / np.linalg.norm(a)
        assert fs.normals @ x > fs.offsets  # actually violating
        proj = project_onto_set(x, fs, lam=lay.lam)
        viol = a @ x - b
        expected = x - viol * a / (a @ a)
        assert np.allclose(proj, expected, atol=1e-9 * lay.lam)

    def test_idempotent_and_nonexpansive(self, layout, rng):
        anchor = uniform_placement(layout)
        fs = linearize_spacing(anchor, 2, layout)
        scale = layout.region_side_m
        center = anchor.antenna_vector(2)
        for _ in range(50):
            x = center + rng.uniform(-scale, scale, size=center.size)
            y = center + rng.uniform(-scale, scale, size=center.size)
            px = project_onto_set(x, fs, lam=layout.lam)
            py = project_onto_set(y, fs, lam=layout.lam)
            assert np.linalg.norm(project_onto_set(px, fs, lam=layout.lam) - px) \
                <= 1e-8 * layout.lam
            assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) * (1 + 1e-8)

    def test_projected_points_feasible(self, layout, rng):
        # inner-approximation guarantee across many random exterior points
        anchor = uniform_placement(layout)
        for m in range(layout.M):
            fs = linearize_spacing(anchor, m, layout)
            center = anchor.antenna_vector(m)
            for _ in range(250):
                x = center + rng.uniform(-2, 2, size=center.size) * layout.region_side_m
                proj = project_onto_set(x, fs, lam=layout.lam)
                assert fs.contains(proj, atol=1e-7 * layout.lam)
                pl = anchor.with_antenna_vector(m, proj)
                assert is_feasible(pl, layout).ok


class TestSerialization:
    def test_round_trip(self, tmp_path, layout):
        pl = uniform_placement(layout)
        path = tmp_path / "placement.json"
        save_placement(path, pl, layout)
        loaded, lay2 = load_placement(path)
        assert lay2 == layout
        assert np.allclose(loaded.positions, pl.positions)


class TestRandomFeasible:
    def test_always_feasible(self, layout, rng):
        for _ in range(20):
            pl = random_feasible_placement(layout, rng)
            assert is_feasible(pl, layout).ok

    def test_seeded_determinism(self, layout):
        a = random_feasible_placement(layout, np.random.default_rng(7))
        b = random_feasible_placement(layout, np.random.default_rng(7))
        assert np.array_equal(a.positions, b.positions)
