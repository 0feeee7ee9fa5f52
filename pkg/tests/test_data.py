import math

import numpy as np
import pytest

from synthtest import errors
from synthtest.data import (CategoryEquals, Dataset, Feature, Interval, Neighborhood, Schema, SubgroupSpec,
                            category, empirical_quantile, feature_scales, load_csv, load_schema, row_distance,
                            save_schema, split, subgroup_filter, write_csv)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


CSV = "x1,x2,color,sex,y\n1,10,red,0,1\n2,20,green,1,0\n3,30,red,1,1\n"


class TestSchema:
    def test_categorical_needs_two_levels(self):
        with pytest.raises(errors.SchemaError):
            Feature("c", "categorical", ("a",))

    def test_duplicate_categories_rejected(self):
        with pytest.raises(errors.SchemaError):
            Feature("c", "categorical", ("a", "a"))

    def test_binary_uses_zero_one(self):
        assert Feature("b", "binary").categories == ("0", "1")
        with pytest.raises(errors.SchemaError):
            Feature("b", "binary", ("no", "yes"))

    def test_label_must_exist(self):
        with pytest.raises(errors.SchemaError):
            Schema([Feature("a", "continuous")], "y")

    def test_unique_names(self):
        with pytest.raises(errors.SchemaError):
            Schema([Feature("a", "continuous"), Feature("a", "binary")], "a")

    def test_json_round_trip(self, toy_schema, tmp_path):
        save_schema(toy_schema, tmp_path / "s.json")
        assert load_schema(tmp_path / "s.json") == toy_schema


class TestLoadCsv:
    def test_three_rows(self, toy_schema, tmp_path):
        ds = load_csv(_write(tmp_path / "d.csv", CSV), toy_schema)
        assert len(ds) == 3

    def test_unknown_category(self, toy_schema, tmp_path):
        with pytest.raises(errors.UnknownCategory):
            load_csv(_write(tmp_path / "d.csv", CSV.replace("green", "Q")), toy_schema)

    def test_permuted_columns_match_direct_construction(self, toy_schema, tmp_path):
        text = "y,color,x2,sex,x1\n1,red,10,0,1\n0,green,20,1,2\n1,red,30,1,3\n"
        ds = load_csv(_write(tmp_path / "p.csv", text), toy_schema)
        direct = Dataset.from_rows(toy_schema, [
            [1.0, 10.0, "red", "0", "1"], [2.0, 20.0, "green", "1", "0"], [3.0, 30.0, "red", "1", "1"]])
        assert ds.equals(direct)

    def test_missing_column(self, toy_schema, tmp_path):
        with pytest.raises(errors.MissingColumn):
            load_csv(_write(tmp_path / "d.csv", "x1,x2,color,y\n1,2,red,1\n"), toy_schema)

    def test_unparseable_number_reports_row(self, toy_schema, tmp_path):
        with pytest.raises(errors.UnparseableNumber) as exc:
            load_csv(_write(tmp_path / "d.csv", CSV.replace("20", "abc")), toy_schema)
        assert exc.value.row == 1

    def test_empty_file(self, toy_schema, tmp_path):
        with pytest.raises(errors.EmptyFile):
            load_csv(_write(tmp_path / "d.csv", ""), toy_schema)

    def test_missing_value_rejected(self, toy_schema, tmp_path):
        with pytest.raises(errors.MissingValue):
            load_csv(_write(tmp_path / "d.csv", CSV.replace("30", "")), toy_schema)

    def test_write_then_read(self, toy, tmp_path):
        write_csv(toy, tmp_path / "out.csv")
        assert load_csv(tmp_path / "out.csv", toy.schema).equals(toy)


class TestSplit:
    def test_overfull_fractions_rejected(self, toy_schema):
        ds = Dataset(toy_schema, np.zeros((30000, 5)))
        with pytest.raises(errors.BadFractions):
            split(ds, (0.28, 0.07, 0.653), 0)

    def test_sizes_round(self, toy_schema):
        ds = Dataset(toy_schema, np.zeros((30000, 5)))
        parts = split(ds, (0.28, 0.07, 0.65), 0)
        assert [len(p) for p in parts] == [8400, 2100, 19500]

    def test_zero_fraction_rejected(self, toy_schema):
        ds = Dataset(toy_schema, np.zeros((10, 5)))
        with pytest.raises(errors.BadFractions):
            split(ds, (1.0, 0.0, 0.0), 0)

    def test_deterministic_and_disjoint(self, toy_schema):
        ds = Dataset(toy_schema, np.column_stack([np.arange(1000.0), np.zeros((1000, 4))]))
        a = split(ds, (0.5, 0.2, 0.3), 7)
        b = split(ds, (0.5, 0.2, 0.3), 7)
        for p, q in zip(a, b):
            assert p.equals(q)
        ids = np.concatenate([p.index for p in a])
        assert len(np.unique(ids)) == len(ids) == 1000


class TestSubgroups:
    def test_empty_spec_is_everything(self, toy):
        assert subgroup_filter(toy, SubgroupSpec(())).equals(toy)

    def test_category_count(self, toy):
        out = subgroup_filter(toy, category("color", "red"))
        assert len(out) == 2
        assert list(out.index) == [0, 2]

    def test_conjunction_equals_composition(self, toy):
        a = Interval("x1", 2.5, math.inf)
        b = CategoryEquals("sex", "0")
        both = subgroup_filter(toy, SubgroupSpec((a, b)))
        seq = subgroup_filter(subgroup_filter(toy, SubgroupSpec((a,))), SubgroupSpec((b,)))
        assert both.equals(seq)
        assert list(both.index) == [3, 4]

    def test_interval_flags(self, toy):
        half_open = SubgroupSpec((Interval("x1", 2, 4),))
        closed = SubgroupSpec((Interval("x1", 2, 4, closed_high=True),))
        open_ = SubgroupSpec((Interval("x1", 2, 4, closed_low=False, closed_high=False),))
        assert len(subgroup_filter(toy, half_open)) == 2
        assert len(subgroup_filter(toy, closed)) == 3
        assert len(subgroup_filter(toy, open_)) == 1

    def test_unknown_feature(self, toy):
        with pytest.raises(errors.UnknownFeature):
            subgroup_filter(toy, category("nope", "a"))

    def test_neighborhood_metric(self, toy):
        scales = feature_scales(toy)
        a, b = toy.row(0), toy.row(3)
        assert row_distance(a, b, scales) == row_distance(b, a, scales)
        assert row_distance(a, a, scales) == 0.0
        ball = SubgroupSpec((Neighborhood(toy.row(0), math.inf, scales),))
        assert len(subgroup_filter(toy, ball)) == len(toy)


class TestQuantile:
    def _uniform(self, toy_schema):
        vals = np.zeros((101, 5))
        vals[:, 0] = np.arange(101)
        return Dataset(toy_schema, vals)

    def test_median(self, toy_schema):
        assert empirical_quantile(self._uniform(toy_schema), "x1", 0.5) == 50.0

    def test_interpolates(self, toy_schema):
        ds = self._uniform(toy_schema)
        # type-7: position q*(n-1) between order statistics
        assert empirical_quantile(ds, "x1", 0.255) == pytest.approx(25.5)

    def test_boundaries(self, toy):
        assert empirical_quantile(toy, "x1", 0.0) == 1.0
        assert empirical_quantile(toy, "x1", 1.0) == 5.0

    def test_not_continuous(self, toy):
        with pytest.raises(errors.NotContinuous):
            empirical_quantile(toy, "color", 0.5)


def test_weights_must_be_non_negative(toy_schema):
    with pytest.raises(errors.DataError):
        Dataset(toy_schema, np.zeros((2, 5)), weights=[1.0, -1.0])
