import numpy as np
import pytest

from tradeblocks.ingest import FlowMatrix, FlowRecord, table_from_records, yearly_flow_matrix
from tradeblocks.netbuild import (
    build_networks,
    net_exports,
    normalize_rows,
    slice_presence,
    threshold,
)
from tradeblocks.synth import random_flow_table


def matrix(values, year=2014, direction="exports", universe=None):
    values = np.asarray(values, dtype=np.int64)
    universe = universe or tuple(f"C{i}" for i in range(values.shape[0]))
    return FlowMatrix(values=values, year=year, direction=direction, universe=universe)


class TestNetExports:
    def test_subtraction(self):
        x = matrix([[0, 10], [0, 0]])
        i = matrix([[0, 4], [0, 0]], direction="imports")
        assert net_exports(x, i).values[0, 1] == 6

    def test_clamped_at_zero(self):
        x = matrix([[0, 4], [0, 0]])
        i = matrix([[0, 10], [0, 0]], direction="imports")
        assert net_exports(x, i).values[0, 1] == 0

    def test_balanced_trade_is_all_zero(self):
        x = matrix([[0, 7], [3, 0]])
        i = matrix([[0, 7], [3, 0]], direction="imports")
        assert not net_exports(x, i).values.any()

    def test_universe_mismatch_errors(self):
        x = matrix([[0, 1], [0, 0]], universe=("A", "B"))
        i = matrix([[0, 1], [0, 0]], direction="imports", universe=("A", "C"))
        with pytest.raises(ValueError, match="universe"):
            net_exports(x, i)

    def test_year_mismatch_errors(self):
        x = matrix([[0, 1], [0, 0]], year=2014)
        i = matrix([[0, 1], [0, 0]], year=2015, direction="imports")
        with pytest.raises(ValueError, match="year"):
            net_exports(x, i)


class TestNormalizeRows:
    def test_symmetric_row(self):
        net = normalize_rows(matrix([[0, 2, 2], [0, 0, 0], [0, 0, 0]]))
        assert net.weights[0].tolist() == [0.0, 0.5, 0.5]
        assert net.active.tolist() == [True, False, False]

    def test_forced_arithmetic(self):
        net = normalize_rows(matrix([[0, 19, 1], [0, 0, 0], [0, 0, 0]]))
        assert net.weights[0, 1] == 0.95
        assert net.weights[0, 2] == 0.05

    def test_total_weight_equals_active_count(self):
        for seed in range(30):
            table = random_flow_table(seed, max_countries=12, max_years=1)
            m = yearly_flow_matrix(table, table.years[0], "exports")
            net = normalize_rows(m)
            assert abs(net.weights.sum() - net.active.sum()) < 1e-9

    def test_row_sums_are_one_before_threshold(self):
        for seed in range(30):
            table = random_flow_table(seed, max_countries=12, max_years=1)
            net = normalize_rows(yearly_flow_matrix(table, table.years[0], "exports"))
            sums = net.weights[net.active].sum(axis=1)
            assert np.max(np.abs(sums - 1.0)) <= 1e-12

    def test_all_zero_matrix_errors(self):
        with pytest.raises(ValueError, match="no network"):
            normalize_rows(matrix([[0, 0], [0, 0]]))

    def test_scale_invariance(self):
        for seed in range(20):
            table = random_flow_table(seed, max_countries=10, max_years=1)
            m = yearly_flow_matrix(table, table.years[0], "exports")
            scaled = FlowMatrix(values=m.values * 7, year=m.year, direction=m.direction, universe=m.universe)
            w1 = normalize_rows(m).weights
            w2 = normalize_rows(scaled).weights
            assert np.max(np.abs(w1 - w2)) <= 1e-12


class TestThreshold:
    def normalized(self, row):
        n = len(row) + 1
        values = np.zeros((n, n), dtype=np.int64)
        values[0, 1:] = row
        return normalize_rows(matrix(values))

    def test_boundary_is_strict(self):
        net = self.normalized([19, 1])  # weights 0.95, 0.05
        out = threshold(net, tau=0.05)
        assert out.weights[0].tolist() == net.weights[0].tolist()
        assert out.removed_count[0] == 0

    def test_below_boundary_removed(self):
        net = self.normalized([24, 1])  # weights 0.96, 0.04
        out = threshold(net, tau=0.05)
        assert out.weights[0, 1] == 0.96
        assert out.weights[0, 2] == 0.0
        assert out.removed_count[0] == 1
        assert out.removed_mass[0] == net.weights[0, 2]

    def test_twentyone_equal_ties_all_removed(self):
        net = self.normalized([1] * 21)  # each 1/21 < 0.05
        out = threshold(net, tau=0.05)
        assert not out.weights[0].any()
        assert out.removed_count[0] == 21
        assert not slice_presence(out)[0]
        assert slice_presence(out, keep_isolated=True)[0]

    def test_tau_validation(self):
        net = self.normalized([1, 1])
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError, match="tau"):
                threshold(net, tau=bad)

    def test_double_threshold_rejected(self):
        out = threshold(self.normalized([1, 1]))
        with pytest.raises(ValueError, match="already"):
            threshold(out)

    def test_monotone_in_tau(self):
        for seed in range(10):
            table = random_flow_table(seed, max_countries=10, max_years=1)
            net = normalize_rows(yearly_flow_matrix(table, table.years[0], "exports"))
            counts = [
                (threshold(net, tau).weights > 0).sum() for tau in (0.01, 0.05, 0.2, 0.5)
            ]
            assert counts == sorted(counts, reverse=True)

    def test_tiny_tau_is_identity(self):
        table = random_flow_table(3, max_countries=10, max_years=1)
        net = normalize_rows(yearly_flow_matrix(table, table.years[0], "exports"))
        out = threshold(net, tau=1e-300)
        assert np.array_equal(out.weights, net.weights)


class TestBuildNetworks:
    def six_row_table(self):
        rows = [
            ("A", "B", 1991, 60), ("A", "C", 1991, 40), ("B", "A", 1991, 10),
            ("B", "C", 1991, 90), ("C", "A", 1991, 50), ("C", "B", 1991, 50),
            ("A", "B", 1992, 97), ("A", "C", 1992, 3), ("B", "A", 1992, 50),
            ("C", "A", 1992, 50),
        ]
        return table_from_records([FlowRecord(r, p, y, v * 100, 0) for r, p, y, v in rows])

    def test_hand_computed_exports_network(self):
        # Oracle: weights computed by hand from the row sums above.
        nets = build_networks(self.six_row_table(), years=[1991, 1992], kinds=("X",))
        tn = nets["X"]
        w1991 = tn.slices[0].weights
        assert w1991[0].tolist() == [0.0, 0.6, 0.4]
        assert w1991[1].tolist() == [0.1, 0.0, 0.9]
        assert w1991[2].tolist() == [0.5, 0.5, 0.0]
        w1992 = tn.slices[1].weights
        assert w1992[0].tolist() == [0.0, 0.97, 0.0]  # 0.03 tie removed
        assert tn.slices[1].removed_count.tolist() == [1, 0, 0]
        assert w1992[1, 0] == 1.0 and w1992[2, 0] == 1.0
        assert tn.presence.all()

    def test_composition_order_normalize_then_threshold(self):
        # If thresholding happened first, the 0.03 flow-share tie would still
        # be present after renormalization; the pipeline must remove it.
        nets = build_networks(self.six_row_table(), years=[1992], kinds=("X",))
        sl = nets["X"].slices[0]
        assert sl.weights[0, 2] == 0.0
        assert sl.pre_threshold[0, 2] == 0.03
        # row sum is the pre-threshold unit minus removed mass, not renormalized
        assert sl.weights[0].sum() == 0.97

    def test_single_year_network(self):
        nets = build_networks(self.six_row_table(), years=[1991], kinds=("X",))
        assert nets["X"].n_steps == 1

    def test_empty_year_range_errors(self):
        with pytest.raises(ValueError, match="empty year range"):
            build_networks(self.six_row_table(), years=[], kinds=("X",))

    def test_missing_year_errors(self):
        with pytest.raises(ValueError, match="1999"):
            build_networks(self.six_row_table(), years=[1999], kinds=("X",))

    def test_unknown_kind_errors(self):
        with pytest.raises(ValueError, match="kinds"):
            build_networks(self.six_row_table(), years=[1991], kinds=("Z",))

    def test_all_kinds_on_toy_fixture(self, toy_flows_path):
        from tradeblocks.ingest import load_flow_table

        table = load_flow_table(toy_flows_path)
        nets = build_networks(table, years=table.years)
        assert set(nets) == {"X", "I", "NX"}
        for tn in nets.values():
            assert tn.n_steps == 3
            assert tn.universe == table.universe
            for sl in tn.slices:
                retained = sl.weights[sl.weights > 0]
                assert retained.size == 0 or retained.min() >= 0.05
                assert retained.size == 0 or retained.max() <= 1.0

    def test_import_rows_are_import_portfolios(self):
        # A imports 3 from B and 1 from C: row A of the I net is A's
        # import-share portfolio.
        table = table_from_records(
            [FlowRecord("A", "B", 2000, 0, 300), FlowRecord("A", "C", 2000, 500, 100)]
        )
        tn = build_networks(table, years=[2000], kinds=("I",))["I"]
        assert tn.slices[0].weights[0].tolist() == [0.0, 0.75, 0.25]
