"""Hyper-parameter grids searched for the unsupervised protocol."""

GAMMA_GRID = tuple(round(0.05 * step, 2) for step in range(1, 20))
ALPHA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
LEARNING_RATE_GRID = (0.01, 0.005, 0.001)
BATCH_SIZE_GRID = (32, 128)
HIDDEN_DIM_GRID = (32, 64)

GRIDS = {
    "gamma": GAMMA_GRID,
    "alpha": ALPHA_GRID,
    "learning_rate": LEARNING_RATE_GRID,
    "batch_size": BATCH_SIZE_GRID,
    "hidden_dim": HIDDEN_DIM_GRID,
}

SWEEP_AXES = ("gamma", "alpha", "hidden_dim")


def is_on_grid(name: str, value) -> bool:
    grid = GRIDS.get(name)
    if grid is None:
        return True
    return any(abs(float(value) - float(point)) < 1e-9 for point in grid)


def off_grid_fields(values: dict) -> list[str]:
    return [name for name in GRIDS if name in values and not is_on_grid(name, values[name])]


def sweep_values(axis: str) -> tuple:
    if axis not in SWEEP_AXES:
        raise KeyError(axis)
    return GRIDS[axis]
