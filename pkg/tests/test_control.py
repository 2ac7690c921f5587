"""Control-lab tests: lattice values, the split identity, and diagnostics."""

import math

import numpy as np
import pytest

from roughkit import ArgumentError
from roughkit import paths, rough_core
from roughkit.control import (
    DESK_INSTANCES,
    ControlGrid,
    ControlProblem,
    PiecewiseControl,
    check_derivatives,
    cost,
    degeneracy_demo,
    desk_instance,
    dpp_check,
    driver_continuity_scan,
    hjb_residual,
    integral_growth_report,
    value,
    value_table,
    verification_probe,
)


def line_driver(n=16, slope=1.0, T=1.0):
    times = paths.uniform_times(T, n)
    return rough_core.canonical_lift(paths.SampledPath(times, slope * times[:, None]))


def still_driver(n=8, T=1.0):
    times = paths.uniform_times(T, n)
    return rough_core.canonical_lift(paths.SampledPath(times, np.zeros((n + 1, 1))))


def plain_problem(g, driver=None, **kw):
    """No dynamics, no running cost: only the terminal payoff g survives."""
    if driver is None:
        driver = still_driver()
    fields = dict(b=None, lam=None, dlam=None, f=None, psi=None, dpsi=None,
                  g=g, h=None, driver=driver)
    fields.update(kw)
    return ControlProblem(**fields)


class TestControlProblem:
    def test_rejects_negative_eps(self):
        with pytest.raises(ArgumentError, match="eps"):
            plain_problem(lambda x, a: 0.0, eps=-0.1)

    def test_rejects_sublinear_exponent(self):
        with pytest.raises(ArgumentError, match="q_exp"):
            plain_problem(lambda x, a: 0.0, q_exp=0.5)

    def test_requires_driver(self):
        with pytest.raises(ArgumentError, match="driver"):
            ControlProblem(b=None, lam=None, dlam=None, f=None, psi=None,
                           dpsi=None, g=lambda x, a: 0.0, h=None, driver=None)

    def test_horizon_must_match_driver(self):
        with pytest.raises(ArgumentError, match="horizon"):
            plain_problem(lambda x, a: 0.0, T=2.0)

    def test_lam_needs_dlam(self):
        with pytest.raises(ArgumentError, match="dlam"):
            plain_problem(lambda x, a: 0.0, lam=lambda x, a: np.array([[1.0]]))

    def test_psi_needs_dpsi(self):
        with pytest.raises(ArgumentError, match="dpsi"):
            plain_problem(lambda x, a: 0.0, psi=lambda x, a: np.array([1.0]))


class TestPiecewiseControl:
    def test_scalar_values_get_a_column(self):
        u = PiecewiseControl([0.0, 0.5], [1.0, 2.0])
        assert u.values.shape == (2, 1)

    def test_row_count_must_match_knots(self):
        with pytest.raises(ArgumentError, match="one value row per knot"):
            PiecewiseControl([0.0, 0.5], [[1.0]])

    def test_knots_strictly_increasing(self):
        with pytest.raises(ArgumentError, match="strictly increasing"):
            PiecewiseControl([0.0, 0.0], [[1.0], [2.0]])
        with pytest.raises(ArgumentError, match="nonempty"):
            PiecewiseControl([], np.zeros((0, 1)))

    def test_constant_control(self):
        u = PiecewiseControl.constant([1.5, -2.0])
        np.testing.assert_array_equal(u.at(0.0), [1.5, -2.0])
        np.testing.assert_array_equal(u.at(0.9), [1.5, -2.0])

    def test_lookup_is_right_continuous(self):
        u = PiecewiseControl([0.0, 0.5], [[1.0], [2.0]])
        assert u.at(0.0) == 1.0
        assert u.at(0.5 - 1e-9) == 1.0
        assert u.at(0.5) == 2.0
        assert u.at(0.9) == 2.0
        # queries before the first knot clamp to the first value
        assert u.at(-1.0) == 1.0


class TestControlGrid:
    def test_needs_a_knot(self):
        with pytest.raises(ArgumentError, match="knot"):
            ControlGrid(n_knots=0, u_bounds=[[-1.0, 1.0]])

    def test_bounds_must_be_ordered(self):
        with pytest.raises(ArgumentError, match="lo <= hi"):
            ControlGrid(n_knots=1, u_bounds=[[1.0, -1.0]])
        with pytest.raises(ArgumentError, match="u_bounds"):
            ControlGrid(n_knots=1, u_bounds=[[0.0, 1.0, 2.0]])

    def test_levels_broadcast_and_validate(self):
        grid = ControlGrid(n_knots=1, u_bounds=[[-1.0, 1.0], [0.0, 2.0]], u_levels=3)
        assert len(grid.knot_options()) == 9
        with pytest.raises(ArgumentError, match="u_levels"):
            ControlGrid(n_knots=1, u_bounds=[[-1.0, 1.0]], u_levels=[2, 3])
        with pytest.raises(ArgumentError, match="u_levels"):
            ControlGrid(n_knots=1, u_bounds=[[-1.0, 1.0]], u_levels=0)

    def test_u_dim(self):
        grid = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0], [0.0, 2.0]])
        assert grid.u_dim == 2

    def test_options_enumerate_lexicographically(self):
        grid = ControlGrid(n_knots=1, u_bounds=[[0.0, 1.0], [0.0, 2.0]],
                           u_levels=[2, 3])
        got = np.stack(grid.knot_options())
        expected = [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
        np.testing.assert_array_equal(got, np.array(expected, dtype=np.float64))

    def test_single_level_collapses_to_lower_bound(self):
        grid = ControlGrid(n_knots=1, u_bounds=[[-1.0, 1.0]], u_levels=1)
        opts = grid.knot_options()
        assert len(opts) == 1 and opts[0][0] == -1.0


class TestCheckDerivatives:
    def test_consistent_coefficients_pass(self):
        problem, _, meta = desk_instance("tracking", mesh=8)
        check_derivatives(problem, meta["x"], meta["a"])

    def test_wrong_dlam_detected(self):
        problem = plain_problem(lambda x, a: 0.0,
                                lam=lambda x, a: np.array([[x[0] ** 2]]),
                                dlam=lambda x, a: np.zeros((1, 1, 1)))
        with pytest.raises(ArgumentError, match="dlam disagrees"):
            check_derivatives(problem, [1.0], [0.0])

    def test_wrong_dlam_shape_detected(self):
        problem = plain_problem(lambda x, a: 0.0,
                                lam=lambda x, a: np.array([[x[0]]]),
                                dlam=lambda x, a: np.ones((1, 1)))
        with pytest.raises(ArgumentError, match="shape"):
            check_derivatives(problem, [1.0], [0.0])

    def test_wrong_dpsi_detected(self):
        problem = plain_problem(lambda x, a: 0.0,
                                psi=lambda x, a: np.array([math.sin(x[0])]),
                                dpsi=lambda x, a: np.array([[10.0]]))
        with pytest.raises(ArgumentError, match="dpsi disagrees"):
            check_derivatives(problem, [0.3], [0.0])

    def test_absent_coefficients_are_skipped(self):
        check_derivatives(plain_problem(lambda x, a: 0.0), [1.0], [0.0])


ZERO_U = PiecewiseControl.constant([0.0])


class TestCost:
    def test_at_horizon_cost_is_terminal_payoff(self):
        problem = plain_problem(lambda x, a: x[0] + 2.0 * a[0])
        assert cost(problem, 1.0, [1.5], [0.25], ZERO_U) == 2.0

    def test_static_problem_reduces_to_terminal_payoff(self):
        problem = plain_problem(lambda x, a: x[0] ** 2)
        assert cost(problem, 0.0, [1.5], [0.0], ZERO_U) == 2.25

    def test_regularizer_accumulates_exactly_on_dyadic_grid(self):
        problem = plain_problem(lambda x, a: 0.0, driver=still_driver(16),
                                eps=0.5, q_exp=2.0)
        u = PiecewiseControl.constant([2.0])
        assert cost(problem, 0.0, [0.0], [0.0], u) == 2.0

    def test_running_cost_uses_trapezoid_cells(self):
        problem = plain_problem(lambda x, a: 0.0, driver=still_driver(16),
                                f=lambda x, a: x[0])
        assert cost(problem, 0.0, [3.0], [0.0], ZERO_U) == 3.0

    def test_auxiliary_state_integrates_control(self):
        problem = plain_problem(lambda x, a: a[0], driver=still_driver(16),
                                h=lambda a, u: u)
        u = PiecewiseControl.constant([3.0])
        assert cost(problem, 0.0, [0.0], [0.0], u) == 3.0

    def test_unit_volatility_tracks_line_driver(self):
        problem = plain_problem(lambda x, a: x[0], driver=line_driver(16, slope=2.0),
                                lam=lambda x, a: np.array([[1.0]]),
                                dlam=lambda x, a: np.zeros((1, 1, 1)))
        assert cost(problem, 0.0, [1.0], [0.0], ZERO_U) == 3.0

    def test_constant_psi_integrates_driver_increment(self):
        problem = plain_problem(lambda x, a: 0.0, driver=line_driver(16, slope=2.0),
                                psi=lambda x, a: np.array([1.0]),
                                dpsi=lambda x, a: np.array([[0.0]]))
        assert cost(problem, 0.0, [0.0], [0.0], ZERO_U) == 2.0

    def test_validate_flag_gates_the_derivative_check(self):
        problem = plain_problem(lambda x, a: x[0], driver=line_driver(16),
                                lam=lambda x, a: np.array([[x[0] ** 2]]),
                                dlam=lambda x, a: np.zeros((1, 1, 1)))
        with pytest.raises(ArgumentError, match="dlam"):
            cost(problem, 0.0, [1.0], [0.0], ZERO_U)
        assert np.isfinite(cost(problem, 0.0, [1.0], [0.0], ZERO_U, validate=False))


class TestValue:
    def test_at_horizon_returns_payoff_and_null_control(self):
        problem = plain_problem(lambda x, a: x[0] ** 2)
        grid = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]])
        v, u = value(problem, 1.0, [2.0], [0.0], grid)
        assert v == 4.0
        np.testing.assert_array_equal(u.values, [[0.0]])

    def test_single_knot_value_matches_direct_minimum(self):
        problem = plain_problem(lambda x, a: (a[0] - 0.6) ** 2,
                                driver=still_driver(16), h=lambda a, u: u)
        grid = ControlGrid(n_knots=1, u_bounds=[[-1.0, 1.0]], u_levels=3)
        v, best = value(problem, 0.0, [0.0], [0.0], grid)
        direct = [cost(problem, 0.0, [0.0], [0.0],
                       PiecewiseControl.constant(opt), validate=False)
                  for opt in grid.knot_options()]
        assert v == min(direct)
        np.testing.assert_array_equal(best.values, [[1.0]])

    def test_ties_resolve_to_first_lattice_point(self):
        problem = plain_problem(lambda x, a: 0.0, h=lambda a, u: u)
        grid = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]], u_levels=3)
        v, best = value(problem, 0.0, [0.0], [0.0], grid)
        assert v == 0.0
        np.testing.assert_array_equal(best.values, [[-1.0], [-1.0]])

    def test_returned_control_achieves_the_value(self):
        problem, _, meta = desk_instance("tracking", mesh=8)
        grid = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]], u_levels=3)
        v, best = value(problem, meta["t"], meta["x"], meta["a"], grid)
        assert cost(problem, meta["t"], meta["x"], meta["a"], best,
                    validate=False) == v

    def test_refining_the_lattice_cannot_increase_the_value(self):
        problem, _, meta = desk_instance("tracking", mesh=16)
        coarse = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]], u_levels=3)
        fine = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]], u_levels=5)
        v3, _ = value(problem, meta["t"], meta["x"], meta["a"], coarse)
        v5, _ = value(problem, meta["t"], meta["x"], meta["a"], fine)
        assert v5 <= v3


class TestDppCheck:
    def test_rejects_unordered_times(self):
        problem, grid, meta = desk_instance("inventory", mesh=8)
        with pytest.raises(ArgumentError, match="t <= r <= T"):
            dpp_check(problem, 0.0, 1.5, meta["x"], meta["a"], grid)

    def test_rejects_split_off_the_knot_grid(self):
        problem, grid, meta = desk_instance("inventory", mesh=8)
        with pytest.raises(ArgumentError, match="align"):
            dpp_check(problem, 0.0, 0.3, meta["x"], meta["a"], grid)

    def test_rejects_split_off_the_driver_grid(self):
        problem, _, meta = desk_instance("inventory", mesh=16)
        grid = ControlGrid(n_knots=3, u_bounds=[[-2.0, 2.0]], u_levels=3)
        with pytest.raises(ArgumentError, match="align"):
            dpp_check(problem, 0.0, 1.0 / 3.0, meta["x"], meta["a"], grid)

    def test_split_at_left_edge_is_exact(self):
        problem, grid, meta = desk_instance("inventory", mesh=8)
        out = dpp_check(problem, 0.0, 0.0, meta["x"], meta["a"], grid)
        assert out["pass"] and out["gap"] == 0.0 and out["n_prefix"] == 0

    def test_split_at_horizon_is_exact(self):
        problem, grid, meta = desk_instance("inventory", mesh=8)
        out = dpp_check(problem, 0.0, 1.0, meta["x"], meta["a"], grid)
        assert out["pass"] and out["gap"] == 0.0 and out["n_suffix"] == 0

    @pytest.mark.parametrize("name", sorted(DESK_INSTANCES))
    def test_desk_instances_satisfy_the_split_identity(self, name):
        problem, grid, meta = desk_instance(name, mesh=16)
        out = dpp_check(problem, meta["t"], meta["r"], meta["x"], meta["a"], grid)
        assert out["pass"], out
        assert out["gap"] <= 1e-12


class TestDegeneracyDemo:
    def tent(self):
        return paths.SampledPath([0.0, 0.5, 1.0], [[0.0], [1.0], [0.0]])

    def test_validation(self):
        with pytest.raises(ArgumentError, match="nonnegative"):
            degeneracy_demo([self.tent()], -1.0, [0.1])
        with pytest.raises(ArgumentError, match="eps > 0"):
            degeneracy_demo([self.tent()], 1.0, [0.0])
        wide = paths.SampledPath([0.0, 1.0], [[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ArgumentError, match="scalar"):
            degeneracy_demo([wide], 1.0, [0.1])

    def test_tent_path_closed_forms(self):
        rows = degeneracy_demo([self.tent()], 0.7, [0.1, 0.25, 1.0], x=0.3)
        row = rows[0]
        assert row["n_segments"] == 2
        assert row["one_variation"] == 2.0
        assert row["value_eps0"] == pytest.approx(0.3 + 0.7 * 2.0, abs=1e-12)
        # exact relaxation: value = x + int (eta_T - eta_s)^2 ds / (4 eps),
        # and the tent square-integral is 1/3
        for eps, got in zip([0.1, 0.25, 1.0], row["values_regularized"]):
            assert got == pytest.approx(0.3 + (1.0 / 3.0) / (4.0 * eps), rel=1e-12)
        assert row["values_regularized"] == sorted(row["values_regularized"],
                                                   reverse=True)

    def test_line_path_value_is_x_plus_q_times_horizon(self):
        times = paths.uniform_times(1.0, 4)
        line = paths.SampledPath(times, times[:, None])
        row = degeneracy_demo([line], 0.9, [0.5], x=0.1)[0]
        assert row["value_eps0"] == pytest.approx(0.1 + 0.9 * 1.0, abs=1e-12)

    def test_unregularized_value_tracks_one_variation(self):
        rng = np.random.default_rng(5)
        fam = []
        for n in (4, 8, 16):
            t = paths.uniform_times(1.0, n)
            fam.append(paths.SampledPath(t, rng.normal(size=(n + 1, 1))))
        rows = degeneracy_demo(fam, 1.3, [0.1], x=-0.2)
        for row in rows:
            assert row["value_eps0"] == pytest.approx(
                -0.2 + 1.3 * row["one_variation"], abs=1e-12)

    def test_refined_noise_inflates_unregularized_value(self):
        base = rough_core.brownian_rough_path(11, 32).base
        fam = [paths.resample(base, base.times[::8]),
               paths.resample(base, base.times[::4]),
               paths.resample(base, base.times[::2]),
               base]
        rows = degeneracy_demo(fam, 1.0, [0.1])
        vals = [row["value_eps0"] for row in rows]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestValueTableAndResidual:
    def trivial(self):
        problem = plain_problem(lambda x, a: x[0])
        grid = ControlGrid(n_knots=1, u_bounds=[[-1.0, 1.0]], u_levels=3)
        nodes = np.array([-1.0, 0.0, 1.0])
        return problem, grid, np.array([0.0, 0.25, 0.5]), nodes, nodes

    def test_value_table_shape_and_entries(self):
        problem, grid, t_nodes, x_nodes, a_nodes = self.trivial()
        table = value_table(problem, t_nodes, x_nodes, a_nodes, grid)
        assert table.shape == (3, 3, 3)
        for jx, xv in enumerate(x_nodes):
            np.testing.assert_array_equal(table[:, jx, :], xv)

    def test_residual_needs_three_nodes_per_axis(self):
        problem, grid, t_nodes, x_nodes, a_nodes = self.trivial()
        with pytest.raises(ArgumentError, match="at least 3"):
            hjb_residual(problem, np.zeros((2, 3, 3)), t_nodes[:2], x_nodes,
                         a_nodes, grid)

    def test_residual_rejects_mismatched_table(self):
        problem, grid, t_nodes, x_nodes, a_nodes = self.trivial()
        with pytest.raises(ArgumentError, match="shape"):
            hjb_residual(problem, np.zeros((3, 3, 4)), t_nodes, x_nodes,
                         a_nodes, grid)

    def test_transport_free_value_solves_the_equation_exactly(self):
        problem, grid, t_nodes, x_nodes, a_nodes = self.trivial()
        table = value_table(problem, t_nodes, x_nodes, a_nodes, grid)
        out = hjb_residual(problem, table, t_nodes, x_nodes, a_nodes, grid)
        assert out["residual"].shape == (2, 1, 1)
        assert out["max_abs"] == 0.0

    def test_verification_probe_confirms_known_solution(self):
        problem, grid, t_nodes, x_nodes, a_nodes = self.trivial()
        out = verification_probe(problem, lambda t, x, a: x,
                                 lambda t: np.zeros(1),
                                 t_nodes, x_nodes, a_nodes, grid)
        assert out["max_residual"] == 0.0
        assert out["cost_minus_value"] == 0.0
        assert out["max_value_gap"] == 0.0


class TestDriverContinuityScan:
    def scan_problem(self, driver):
        return ControlProblem(
            b=None,
            lam=lambda x, a: np.array([[0.3]]),
            dlam=lambda x, a: np.zeros((1, 1, 1)),
            f=lambda x, a: (x[0] - a[0]) ** 2,
            psi=lambda x, a: np.array([0.4 * x[0]]),
            dpsi=lambda x, a: np.array([[0.4]]),
            g=lambda x, a: x[0] ** 2,
            h=lambda a, u: u,
            driver=driver, eps=0.05, q_exp=2.0, T=1.0)

    def test_identical_pairs_are_skipped(self):
        base = rough_core.brownian_rough_path(3, 16).base
        problem = self.scan_problem(rough_core.canonical_lift(base))
        grid = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]], u_levels=3)
        rows = driver_continuity_scan(problem, [(base, base)], 2.5, 0.0,
                                      [0.2], [0.0], grid)
        assert rows == []

    def test_distinct_drivers_produce_finite_ratios(self):
        p1 = rough_core.brownian_rough_path(3, 16).base
        p2 = rough_core.brownian_rough_path(4, 16).base
        coarse = paths.resample(p1, p1.times[::4])
        problem = self.scan_problem(rough_core.canonical_lift(p1))
        grid = ControlGrid(n_knots=2, u_bounds=[[-1.0, 1.0]], u_levels=3)
        rows = driver_continuity_scan(problem, [(p1, p2), (p1, coarse)], 2.5,
                                      0.0, [0.2], [0.0], grid)
        assert len(rows) == 2
        for row in rows:
            assert row["metric"] > 0.0
            assert row["value_gap"] >= 0.0
            assert np.isfinite(row["ratio"])


class TestIntegralGrowthReport:
    def test_reports_ratio_against_variation_bound(self):
        problem, _, meta = desk_instance("tracking", mesh=8)
        rep = integral_growth_report(problem, meta["t"], meta["x"], meta["a"],
                                     PiecewiseControl.constant([0.5]), p=2.5)
        assert set(rep) == {"psi_integral", "gamma_p2_variation",
                            "growth_bound_ratio"}
        assert rep["psi_integral"] >= 0.0
        assert rep["gamma_p2_variation"] >= 0.0
        # the denominator 1 + |gamma|^{2(1+p)} is at least one
        assert rep["growth_bound_ratio"] <= rep["psi_integral"]


class TestDeskInstances:
    def test_unknown_name_rejected(self):
        with pytest.raises(ArgumentError, match="unknown desk instance"):
            desk_instance("garage")

    def test_catalogue(self):
        assert set(DESK_INSTANCES) == {"inventory", "tracking", "mean-revert"}
        for name in DESK_INSTANCES:
            problem, grid, meta = desk_instance(name)
            assert problem.T == 1.0
            assert grid.u_dim == 1
            assert set(meta) == {"x", "a", "t", "r"}

    def test_mesh_argument_controls_the_driver(self):
        problem, _, _ = desk_instance("inventory", mesh=8)
        assert problem.driver.times.shape[0] == 9

    def test_instances_are_deterministic(self):
        a, _, _ = desk_instance("mean-revert")
        b, _, _ = desk_instance("mean-revert")
        np.testing.assert_array_equal(a.driver.base.values, b.driver.base.values)
