"""Count rules shared by augmentations and pruning.

`ratio * n` is evaluated in floating point, so 0.7 * 10 lands on
7.000000000000001. Both helpers snap values within 1e-9 of an integer first.
"""

import math

_SNAP = 1e-9


def floor_count(ratio: float, total: int) -> int:
    return max(0, math.floor(ratio * total + _SNAP))


def ceil_count(ratio: float, total: int) -> int:
    return max(0, math.ceil(ratio * total - _SNAP))
