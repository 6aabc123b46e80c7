import pytest

from lamp.policies.datasets import needs_degree_features, resolve_dataset_dir
from lamp.policies.grids import GAMMA_GRID, is_on_grid, off_grid_fields, sweep_values


def test_gamma_grid_has_nineteen_points():
    assert len(GAMMA_GRID) == 19
    assert GAMMA_GRID[0] == 0.05 and GAMMA_GRID[-1] == 0.95
    assert is_on_grid("gamma", 0.3)
    assert not is_on_grid("gamma", 0.33)


def test_alpha_grid():
    assert sweep_values("alpha") == (0.01, 0.1, 1.0, 10.0, 100.0)
    with pytest.raises(KeyError):
        sweep_values("tau")


def test_fields_without_a_grid_are_always_on_it():
    assert is_on_grid("epochs", 7)
    assert off_grid_fields({"gamma": 0.3, "batch_size": 50, "epochs": 7}) == ["batch_size"]


def test_resolve_dataset_dir(tmp_path):
    existing = tmp_path / "MUTAG"
    existing.mkdir()
    assert resolve_dataset_dir(existing, "/nowhere") == existing
    assert resolve_dataset_dir("PROTEINS", tmp_path) == tmp_path / "PROTEINS"


def test_needs_degree_features(synthetic_tu_dir, toy_tu_dir):
    from lamp.services.graph_core import load_tu_dataset

    assert needs_degree_features(load_tu_dataset(synthetic_tu_dir))
    assert not needs_degree_features(load_tu_dataset(toy_tu_dir))
