import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maskforge.errors import DimensionError, DivergenceError
from maskforge.geometry import Rect
from maskforge.ilt import IltConfig, LatentMask, ilt_ground_truth, ilt_loss, initial_latent, optimize
from maskforge.litho import Kernel, KernelSet, ResistConfig, default_kernels, identity_kernels, print_image


def square(n=64, lo=20, hi=44):
    t = np.zeros((n, n), dtype=bool)
    t[lo:hi, lo:hi] = True
    return t


def central_difference(v, t, ks, cfg, i, j, h=1e-5):
    vp, vm = v.copy(), v.copy()
    vp[i, j] += h
    vm[i, j] -= h
    return (ilt_loss(LatentMask(vp, cfg.beta), t, ks, cfg)[0] - ilt_loss(LatentMask(vm, cfg.beta), t, ks, cfg)[0]) / (2 * h)


@pytest.mark.parametrize("weights", [(1.0, 0.0), (0.0, 1.0), (1.0, 0.025)])
def test_gradient_matches_finite_differences(weights):
    ks = default_kernels(3.0)
    cfg = IltConfig(weight_l2=weights[0], weight_pvb=weights[1])
    rng = np.random.default_rng(7)
    v = rng.normal(0, 0.5, (32, 32))
    t = square(32, 8, 24)
    _, g = ilt_loss(LatentMask(v, cfg.beta), t, ks, cfg)
    for i, j in rng.integers(0, 32, (5, 2)):
        fd = central_difference(v, t, ks, cfg, i, j)
        assert abs(fd - g[i, j]) <= 1e-5 * max(abs(fd), 1e-3)


def test_zero_weights_give_zero_loss_and_gradient():
    cfg = IltConfig(weight_l2=0.0, weight_pvb=0.0)
    loss, g = ilt_loss(LatentMask(np.zeros((16, 16))), square(16, 4, 12), default_kernels(1.5), cfg)
    assert loss == 0 and not g.any()


def test_loss_shape_mismatch():
    with pytest.raises(DimensionError):
        ilt_loss(LatentMask(np.zeros((8, 8))), np.zeros((8, 9)), identity_kernels())


def test_initialisation_from_target():
    t = square(16, 4, 12)
    m = LatentMask(initial_latent(t, IltConfig())).relaxed()
    np.testing.assert_allclose(m[t], 0.995)
    np.testing.assert_allclose(m[~t], 0.005)


def test_single_iteration_history():
    res = optimize(square(), default_kernels(5.0), IltConfig(max_iters=1))
    assert len(res.loss_history) == 1 and res.loss_history[0][0] == 1
    assert res.mask.dtype == bool and res.mask.shape == (64, 64)


def test_relaxed_mask_stays_strictly_inside_unit_interval():
    res = optimize(square(), default_kernels(5.0), IltConfig(max_iters=20))
    assert res.relaxed_mask.min() > 0 and res.relaxed_mask.max() < 1
    assert np.array_equal(res.mask, res.relaxed_mask > 0.5)


def test_empty_target_prints_nothing():
    res = optimize(np.zeros((32, 32), dtype=bool), default_kernels(3.0), IltConfig(max_iters=10))
    assert not print_image(res.mask.astype(float), default_kernels(3.0)).any()
    assert not ilt_ground_truth([], Rect(8, 8, 24, 24), default_kernels(3.0), canvas=Rect(0, 0, 32, 32)).any()


@settings(max_examples=8, deadline=None)
@given(st.integers(8, 28), st.integers(8, 28), st.sampled_from([1.0, 4.0, 50.0]))
def test_weighted_loss_never_increases(w, h, step):
    t = np.zeros((48, 48), dtype=bool)
    t[10:10 + h, 10:10 + w] = True
    res = optimize(t, default_kernels(3.0), IltConfig(max_iters=15, step_size=step))
    assert all(b <= a for a, b in zip(res.losses, res.losses[1:]))
    first = IltConfig().weight_l2 * res.initial[0] + IltConfig().weight_pvb * res.initial[1]
    assert res.losses[0] <= first


def test_optimize_is_deterministic():
    a = optimize(square(), default_kernels(5.0), IltConfig(max_iters=15, init="random"), seed=3)
    b = optimize(square(), default_kernels(5.0), IltConfig(max_iters=15, init="random"), seed=3)
    assert np.array_equal(a.relaxed_mask, b.relaxed_mask) and a.losses == b.losses


def test_stop_tolerance_ends_early():
    res = optimize(square(), default_kernels(5.0), IltConfig(max_iters=200, stop_tol=1e9))
    assert len(res.loss_history) == 11


def test_non_finite_loss_raises_divergence():
    huge = KernelSet([Kernel(np.full((3, 3), 1e308 + 0j), 1.0)])   # fields overflow to inf - inf
    with np.errstate(all="ignore"), pytest.raises(DivergenceError):
        optimize(square(16, 4, 12), huge, IltConfig(max_iters=3))


def test_config_validation():
    for kw in ({"max_iters": 0}, {"step_size": 0}, {"weight_pvb": -1}, {"beta": 0}, {"init": "zeros"}):
        with pytest.raises(ValueError):
            IltConfig(**kw)


def test_context_changes_the_core_mask():
    # a neighbour that lies entirely outside the core still alters the optimized core
    ks = default_kernels(5.0)
    canvas, core = Rect(0, 0, 64, 64), Rect(16, 16, 48, 48)
    alone = [Rect(20, 20, 40, 44).to_polygon()]
    crowded = alone + [Rect(48, 20, 56, 44).to_polygon()]
    a = ilt_ground_truth(alone, core, ks, IltConfig(max_iters=40), canvas)
    b = ilt_ground_truth(crowded, core, ks, IltConfig(max_iters=40), canvas)
    assert a.shape == (32, 32) and not np.array_equal(a, b)
    with pytest.raises(DimensionError):
        ilt_ground_truth(alone, Rect(40, 40, 80, 80), ks, canvas=canvas)


def test_saturated_exact_print_is_stationary():
    t = square(16, 4, 12)
    v = np.where(t, 5.0, -5.0)   # relaxed mask within 2e-9 of binary
    cfg = IltConfig(weight_pvb=0.0, resist=ResistConfig(alpha=200.0))
    loss, g = ilt_loss(LatentMask(v, cfg.beta), t, identity_kernels(), cfg)
    assert loss < 1e-12 and np.abs(g).max() < 1e-12
