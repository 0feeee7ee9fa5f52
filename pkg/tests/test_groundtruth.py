import dataclasses

import numpy as np
import pytest

from synthtest import errors
from synthtest.evaluation import estimate
from synthtest.data import category
from synthtest.groundtruth import GroundTruthSpec, bayes_accuracy, bayes_predictor, simulate_ground_truth


def test_group_proportions(gt_spec):
    ds = simulate_ground_truth(gt_spec, 30000, 0)
    counts = np.bincount(ds.codes("group"), minlength=4) / 30000
    assert np.all(np.abs(counts - np.asarray(gt_spec.group_probs)) <= 0.01)


def test_same_seed_same_data(gt_spec):
    assert simulate_ground_truth(gt_spec, 500, 4).equals(simulate_ground_truth(gt_spec, 500, 4))
    assert not simulate_ground_truth(gt_spec, 500, 4).equals(simulate_ground_truth(gt_spec, 500, 5))


def test_noise_free_group_is_perfectly_predictable():
    spec = GroundTruthSpec(deterministic_label=True, noise=(0.0, 0.1, 0.1, 0.1))
    ds = simulate_ground_truth(spec, 5000, 0)
    assert estimate(bayes_predictor(spec), ds, category("group", "A")).value == 1.0
    assert bayes_accuracy(spec, group=0) == pytest.approx(1.0)


def test_bayes_accuracy_matches_large_simulation(gt_spec):
    ds = simulate_ground_truth(gt_spec, 1_000_000, 11)
    simulated = estimate(bayes_predictor(gt_spec), ds).value
    assert abs(simulated - bayes_accuracy(gt_spec)) <= 0.005


def test_schema_shape(gt_spec):
    names = [f.name for f in gt_spec.schema.features]
    assert names == ["group", "region", "sex", "age", "income", "hours", "outcome"]


def test_dict_round_trip(gt_spec):
    assert GroundTruthSpec.from_dict(gt_spec.to_dict()) == gt_spec


@pytest.mark.parametrize("change", [
    {"group_probs": (0.5, 0.3, 0.1, 0.05)},
    {"noise": (0.5, 0.0, 0.0, 0.0)},
    {"correlation": ((1.0, 0.99, 0.99), (0.99, 1.0, -0.99), (0.99, -0.99, 1.0))},
    {"group_effects": (0.0, 0.1)},
])
def test_bad_spec(gt_spec, change):
    with pytest.raises(errors.BadSpec):
        dataclasses.replace(gt_spec, **change)


def test_unknown_field_rejected():
    with pytest.raises(errors.BadSpec):
        GroundTruthSpec.from_dict({"colour": 1})
