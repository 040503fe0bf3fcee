import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fedtrade.allocation import NoiseAllocation


@given(
    alpha=st.floats(1e-6, 1e6),
    rho=st.floats(1e-3, 1e3),
    scale=st.sampled_from([1.0, 2.0, 10.0]),
)
def test_stored_representations_stay_consistent(alpha, rho, scale):
    # Constructing from noise keeps the noise vector bit-exact for the whole
    # admissible range; the informativeness column is derived from it.
    alloc = NoiseAllocation.from_noise_stds([alpha], rho, scale)
    assert alloc.noise_stds[0] == alpha
    expected = 1.0 / (1.0 / rho + scale * alpha * alpha)
    assert alloc.informativeness[0] == pytest.approx(expected, rel=1e-15)


@given(
    alpha=st.floats(1e-6, 1e6),
    rho=st.floats(1e-3, 1e3),
    scale=st.sampled_from([1.0, 2.0, 10.0]),
)
def test_alpha_beta_round_trip(alpha, rho, scale):
    # Reconstructing noise from informativeness alone subtracts 1/rho from
    # 1/beta, so 12-digit recovery needs the noise term to carry weight
    # against the local precision; below that the stored noise column (see
    # above) is the faithful representation.
    if rho * scale * alpha * alpha < 1e-3:
        return
    alloc = NoiseAllocation.from_noise_stds([alpha], rho, scale)
    back = NoiseAllocation.from_informativeness(alloc.informativeness, rho, scale)
    assert back.noise_stds[0] == pytest.approx(alpha, rel=1e-12)


def test_limits_map_exactly():
    alloc = NoiseAllocation.from_noise_stds([0.0, math.inf], 2.5)
    assert alloc.informativeness[0] == 2.5
    assert alloc.informativeness[1] == 0.0
    back = NoiseAllocation.from_informativeness([2.5, 0.0], 2.5)
    assert back.noise_stds[0] == 0.0
    assert math.isinf(back.noise_stds[1])


def test_totals_and_others():
    alloc = NoiseAllocation.from_informativeness([0.5, 1.0, 1.5], 2.0)
    assert alloc.total == pytest.approx(3.0)
    assert alloc.others(0) == pytest.approx(2.5)
    assert alloc.others(2) == pytest.approx(1.5)
    with pytest.raises(IndexError):
        alloc.others(3)


def test_informativeness_bounds_enforced():
    with pytest.raises(ValueError):
        NoiseAllocation.from_informativeness([2.5], 2.0)
    with pytest.raises(ValueError):
        NoiseAllocation.from_informativeness([-0.1], 2.0)
    with pytest.raises(ValueError):
        NoiseAllocation.from_noise_stds([-1.0], 2.0)


def test_rescaled_keeps_noise_levels():
    alloc = NoiseAllocation.from_noise_stds([0.3, 1.2, math.inf], 4.0, 1.0)
    moved = alloc.rescaled(2.0, 3.0)
    np.testing.assert_array_equal(moved.noise_stds, alloc.noise_stds)
    assert moved.local_precision == 2.0
    assert moved.informativeness[2] == 0.0
    assert moved.informativeness[0] == pytest.approx(1.0 / (1 / 2.0 + 3.0 * 0.09))
