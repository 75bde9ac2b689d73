import numpy as np
import pytest

from netcrf import (
    ModelSpec,
    build_design,
    build_geometric_network,
    cell_means,
    complete_effects,
    dgp_scenario,
    fit,
    generate_positions,
    recover_effect_table,
    simulate_frame,
    split_by_f,
    telescope_level_from_changes,
)
from conftest import make_frame


@pytest.fixture(scope="module")
def noiseless_iii_frame():
    net = build_geometric_network(generate_positions(1500, 55), 0.025)
    return simulate_frame(net, dgp_scenario("iii", noise_sd=0.0), 56)


@pytest.fixture(scope="module")
def noisy_small_f_frame():
    # cap friend counts at 6 so the saturated designs stay well populated
    net = build_geometric_network(generate_positions(2000, 57), 0.025)
    frame = simulate_frame(net, dgp_scenario("iii"), 58)
    keep = frame.f <= 6
    return make_frame(frame.y[keep], frame.d[keep], frame.t[keep], frame.f[keep])


class TestCompleteEffects:
    def test_zero_interaction(self):
        assert complete_effects(2.0, 1.0, 0.0) == (1.0, 2.0)

    def test_additive_identity(self):
        assert complete_effects(2.0, 1.0, 0.5) == (1.5, 2.5)

    def test_identity_closure(self):
        # the construction identities are bitwise exact; the re-subtracted
        # closure agrees to rounding error
        rng = np.random.default_rng(0)
        for _ in range(50):
            delta0, tau0, tau_pm = rng.standard_normal(3)
            tau1, delta_t = complete_effects(delta0, tau0, tau_pm)
            assert tau1 == tau0 + tau_pm
            assert delta_t == delta0 + tau_pm
            assert (tau1 - tau0) - (delta_t - delta0) == pytest.approx(0.0, abs=1e-14)


class TestTelescoping:
    def test_single_step(self):
        assert telescope_level_from_changes([0.7]) == pytest.approx(0.7)

    def test_constant_changes(self):
        assert telescope_level_from_changes([0.3] * 5) == pytest.approx(1.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            telescope_level_from_changes([])

    def test_grid_change_effects_sum_to_level_effect(self):
        # algebraic identity on the same sample means: summing the mean
        # change effects for s = 1..t reproduces the mean level effect at t
        net = build_geometric_network(generate_positions(1200, 60), 0.025)
        frame, grid = simulate_frame(net, dgp_scenario("iv"), 61, track_grid=True)
        for f_value in range(1, 7):
            units = [i for i in range(frame.n_selected) if frame.f[i] == f_value]
            if not units:
                continue
            for t in range(1, f_value + 1):
                changes = []
                for s in range(1, t + 1):
                    step = [
                        grid.values[i][1, s] - grid.values[i][1, s - 1]
                        - grid.values[i][0, s] + grid.values[i][0, s - 1]
                        for i in units
                    ]
                    changes.append(np.mean(step))
                level = np.mean([
                    grid.values[i][1, t] - grid.values[i][1, 0]
                    - grid.values[i][0, t] + grid.values[i][0, 0]
                    for i in units
                ])
                assert telescope_level_from_changes(changes) == pytest.approx(level, abs=1e-10)


class TestCellMeans:
    def test_identical_rows_collapse(self):
        frame = make_frame([2.5, 2.5], [1, 1], [1, 1], [2, 2])
        table = cell_means(frame)
        assert table.mean(1, 1, 2) == pytest.approx(2.5)
        assert table.count(1, 1, 2) == 2
        assert len(list(table.items())) == 1

    def test_singletons(self):
        frame = make_frame([1.0, 4.0], [0, 1], [0, 1], [1, 1])
        table = cell_means(frame)
        assert table.mean(0, 0, 1) == 1.0
        assert table.mean(1, 1, 1) == 4.0

    def test_count_weighted_mean_equals_grand_mean(self, noisy_small_f_frame):
        table = cell_means(noisy_small_f_frame)
        total = sum(mean * count for _, (mean, count) in table.items())
        count = sum(count for _, (_, count) in table.items())
        assert total / count == pytest.approx(noisy_small_f_frame.y.mean(), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cell_means(make_frame([], [], [], []))


def exact_fit(frame, spec, **kwargs):
    design = build_design(frame, spec)
    return fit(design, frame.y, **kwargs)


class TestRecoverLinearModels:
    def test_t_model_mapping(self):
        # y = 1 - f + 2 d + 0.3 t exactly; at f=4, t=2 the mapping gives
        # delta0=2, tau0=0.6, tau_pm=0, baseline=-3
        rng = np.random.default_rng(1)
        f = rng.integers(1, 8, size=60)
        t = rng.integers(0, f + 1)
        d = rng.integers(0, 2, size=60)
        y = 1.0 - f + 2.0 * d + 0.3 * t
        frame = make_frame(y, d, t, f)
        table = recover_effect_table(exact_fit(frame, ModelSpec.t_model()),
                                     ModelSpec.t_model(), frame.f)
        cell = table.cell(4, 2)
        assert cell.delta0 == pytest.approx(2.0, abs=1e-9)
        assert cell.tau0 == pytest.approx(0.6, abs=1e-9)
        assert cell.tau_pm == 0.0
        assert cell.baseline == pytest.approx(-3.0, abs=1e-9)
        assert cell.tau1 == pytest.approx(0.6, abs=1e-9)
        assert cell.delta_t == pytest.approx(2.0, abs=1e-9)
        assert table.aggregates.interaction == 0.0

    def test_tr_model_interaction_mapping(self):
        # slopes: tau_pm at (f=2, t=1) = beta_dtau + beta_dr / 2 = 0.2 + 1
        rng = np.random.default_rng(2)
        f = rng.integers(1, 9, size=300)
        t = rng.integers(0, f + 1)
        d = rng.integers(0, 2, size=300)
        y = (0.5 - 2.0 * f + 1.5 * d + (0.1 + 0.8 / f) * t + (0.2 + 2.0 / f) * d * t)
        frame = make_frame(y, d, t, f)
        table = recover_effect_table(exact_fit(frame, ModelSpec.tr_model()),
                                     ModelSpec.tr_model(), frame.f)
        cell = table.cell(2, 1)
        assert cell.tau_pm == pytest.approx(1.2, abs=1e-9)
        assert cell.delta_t == pytest.approx(cell.delta0 + 1.2, abs=1e-9)

    def test_zero_noise_scenario_iii_tr_recovery(self, noiseless_iii_frame):
        frame = noiseless_iii_frame
        table = recover_effect_table(exact_fit(frame, ModelSpec.tr_model()),
                                     ModelSpec.tr_model(), frame.f)
        for cell in table.cells:
            expected = (0.2 + 2.0 / cell.f) * cell.t
            assert cell.tau0 == pytest.approx(expected, abs=1e-8)
            assert cell.tau_pm == pytest.approx(expected, abs=1e-8)
            assert cell.delta0 == pytest.approx(2.0, abs=1e-8)
            assert cell.baseline == pytest.approx(-2.0 * cell.f, abs=1e-7)

    def test_zero_noise_scenario_iii_crf1short_f2(self, noiseless_iii_frame):
        frame = noiseless_iii_frame.restrict_to_f(2)
        spec = ModelSpec.crf1_short(2)
        table = recover_effect_table(exact_fit(frame, spec, on_rank_deficiency="drop"),
                                     spec, frame.f)
        for t in (1, 2):
            assert table.cell(2, t).tau0 == pytest.approx(1.2 * t, abs=1e-8)

    def test_crf2_polynomial_mapping(self):
        # exact quadratic DGP in f: delta0(f) = 1 + f - 0.5 f^2
        rng = np.random.default_rng(3)
        f = rng.integers(1, 7, size=400)
        t = rng.integers(0, f + 1)
        d = rng.integers(0, 2, size=400)
        y = (2.0 + f) + (1.0 + f - 0.5 * f**2) * d + 0.3 * t + 0.1 * d * t
        frame = make_frame(y, d, t, f)
        spec = ModelSpec.crf2(2)
        table = recover_effect_table(exact_fit(frame, spec), spec, frame.f)
        for cell in table.cells:
            assert cell.delta0 == pytest.approx(1.0 + cell.f - 0.5 * cell.f**2, abs=1e-7)
            assert cell.tau0 == pytest.approx(0.3 * cell.t, abs=1e-7)
            assert cell.tau_pm == pytest.approx(0.1 * cell.t, abs=1e-7)
            assert cell.baseline == pytest.approx(2.0 + cell.f, abs=1e-7)


class TestSaturatedOracle:
    def test_long_fitted_values_equal_cell_means(self, noisy_small_f_frame):
        frame = noisy_small_f_frame
        spec = ModelSpec.crf1_long(f_max=6, t_max=6)
        result = exact_fit(frame, spec, on_rank_deficiency="drop")
        means = cell_means(frame)
        for i in range(frame.n_selected):
            expected = means.mean(int(frame.d[i]), int(frame.t[i]), int(frame.f[i]))
            assert result.fitted[i] == pytest.approx(expected, abs=1e-8)

    def test_long_short_equivalence(self, noisy_small_f_frame):
        # effects identified by occupied cells agree between the pooled and
        # per-subsample saturated fits; combined contrasts from empty
        # companion cells have arbitrary attribution and are not compared
        from conftest import identified_effects

        frame = noisy_small_f_frame
        means = cell_means(frame)
        long_spec = ModelSpec.crf1_long(f_max=6, t_max=6)
        long_table = recover_effect_table(
            exact_fit(frame, long_spec, on_rank_deficiency="drop"), long_spec, frame.f)
        compared = 0
        for f_value, subframe in split_by_f(frame):
            short_spec = ModelSpec.crf1_short(f_value)
            short_table = recover_effect_table(
                exact_fit(subframe, short_spec, on_rank_deficiency="drop"),
                short_spec, subframe.f)
            for t in range(1, f_value + 1):
                long_cell = long_table.cell(f_value, t)
                short_cell = short_table.cell(f_value, t)
                for name in identified_effects(means, f_value, t):
                    long_value = getattr(long_cell, name)
                    short_value = getattr(short_cell, name)
                    assert long_value is not None and short_value is not None, (f_value, t, name)
                    assert long_value == pytest.approx(short_value, abs=1e-8)
                    compared += 1
        assert compared > 20

    def test_tau1_matches_grid_oracle_zero_noise(self):
        # with no noise the tracked grid pins E[y^{1t} - y^{10} | F=f] exactly
        net = build_geometric_network(generate_positions(1500, 70), 0.025)
        frame, grid = simulate_frame(net, dgp_scenario("iii", noise_sd=0.0), 71,
                                     track_grid=True)
        keep = frame.f <= 5
        sub = make_frame(frame.y[keep], frame.d[keep], frame.t[keep], frame.f[keep])
        spec = ModelSpec.crf1_long(f_max=5, t_max=5)
        table = recover_effect_table(exact_fit(sub, spec, on_rank_deficiency="drop"),
                                     spec, sub.f)
        kept_units = np.flatnonzero(keep)
        for cell in table.cells:
            if cell.tau1 is None:
                continue
            units = [i for i in kept_units if frame.f[i] == cell.f]
            oracle = np.mean([grid.values[i][1, cell.t] - grid.values[i][1, 0] for i in units])
            assert cell.tau1 == pytest.approx(oracle, abs=1e-8)


class TestAbsentCells:
    def test_unoccupied_cells_are_absent_not_zero(self):
        # f=3 has no t=2 observations, so the T=2:F=3 dummy column is zero
        frame = make_frame([1.0, 2.0, 1.5, 2.5, 3.0, 1.0],
                           [0, 1, 0, 1, 0, 1],
                           [0, 1, 1, 0, 3, 1],
                           [3, 3, 3, 3, 3, 3])
        spec = ModelSpec.crf1_long(f_max=3, t_max=3)
        result = exact_fit(frame, spec, on_rank_deficiency="drop")
        table = recover_effect_table(result, spec, frame.f)
        absent = table.cell(3, 2)
        assert absent.tau0 is None
        assert absent.tau1 is None
        present = table.cell(3, 1)
        assert present.tau0 is not None

    def test_aggregate_skips_absent_with_warning(self, caplog):
        # no unit has t=1 at f=2, so the network aggregate must skip f=2
        frame = make_frame([1.0, 2.0, 1.5, 0.5, 2.5],
                           [0, 1, 0, 1, 0],
                           [0, 2, 1, 0, 1],
                           [2, 2, 1, 1, 1])
        spec = ModelSpec.crf1_long(f_max=2, t_max=2)
        result = exact_fit(frame, spec, on_rank_deficiency="drop")
        with caplog.at_level("WARNING", logger="netcrf.effects"):
            table = recover_effect_table(result, spec, frame.f)
        assert table.aggregates.network is not None
        assert any("skipped" in rec.message for rec in caplog.records)

    def test_requires_nonempty_f_values(self, noiseless_iii_frame):
        result = exact_fit(noiseless_iii_frame, ModelSpec.t_model())
        with pytest.raises(ValueError):
            recover_effect_table(result, ModelSpec.t_model(), [])


class TestEffectTableOutput:
    def test_csv_layout(self, noiseless_iii_frame):
        frame = noiseless_iii_frame
        spec = ModelSpec.tr_model()
        table = recover_effect_table(exact_fit(frame, spec), spec, frame.f)
        text = table.to_csv_text()
        header, first = text.splitlines()[:2]
        assert header == "f,t,delta0,tau0,tau_pm,tau1,delta_t,baseline"
        assert first.startswith("1,1,")

    def test_json_round_trip_values(self, noiseless_iii_frame):
        frame = noiseless_iii_frame
        spec = ModelSpec.tr_model()
        table = recover_effect_table(exact_fit(frame, spec), spec, frame.f)
        payload = table.to_json_dict()
        assert payload["model"] == "tr"
        assert payload["aggregates"]["direct"] == pytest.approx(2.0, abs=1e-8)
        assert len(payload["cells"]) == len(table.cells)
