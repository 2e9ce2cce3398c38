import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstct import numerics as nx
from mstct.numerics import Tensor, parameter
from mstct.supervision import (
    ActionInstance, AnnotationError, bce_loss, build_gt_heatmap, focal_loss, frame_labels,
    gaussian_response, round_center, total_loss,
)


def brute_heatmap(instances, T, C, ratio):
    """Double loop over frames and instances, max of peak-normalised Gaussians."""
    g = [[0.0] * C for _ in range(T)]
    for t in range(T):
        for a in instances:
            c0 = math.floor((a.start + a.end) / 2 + 0.5)
            s = ratio * (a.end - a.start + 1)
            v = math.exp(-((t - c0) ** 2) / (2 * s * s))
            g[t][a.class_id] = max(g[t][a.class_id], v)
    return np.array(g)


def loop_focal(G, Gs, A):
    total = 0.0
    for t in range(G.shape[0]):
        for c in range(G.shape[1]):
            g = G[t, c]
            if Gs[t, c] >= 1 - 1e-9:
                total += (1 - g) ** 2 * math.log(g)
            else:
                total += (1 - Gs[t, c]) ** 4 * g**2 * math.log(1 - g)
    return -total / A


def loop_bce(p, y):
    s = 0.0
    for a, b in zip(p.ravel(), y.ravel()):
        s += -(b * math.log(a) + (1 - b) * math.log(1 - a))
    return s / p.size


class TestFrameLabels:
    def test_empty(self):
        assert not frame_labels([], 6, 3).any()

    def test_indicator(self):
        y = frame_labels([ActionInstance(0, 2, 4)], 6, 2)
        np.testing.assert_array_equal(y[:, 0], [0, 0, 1, 1, 1, 0])

    def test_multilabel_overlap(self):
        y = frame_labels([ActionInstance(0, 1, 3), ActionInstance(1, 3, 5)], 6, 2)
        assert y[3].sum() == 2

    @pytest.mark.parametrize("inst", [ActionInstance(0, 4, 6), ActionInstance(0, -1, 2), ActionInstance(3, 0, 1)])
    def test_out_of_range(self, inst):
        with pytest.raises(AnnotationError):
            frame_labels([inst], 6, 2)


class TestHeatmap:
    def test_peak_at_center(self):
        g = build_gt_heatmap([ActionInstance(0, 4, 12)], 20, 1, 0.5)
        assert g[8, 0] == 1.0 and g.argmax() == 8

    def test_one_sigma_value(self):
        # duration 9, sigma = 0.5 * 9 = 4.5
        assert gaussian_response(8 + 4.5, 8, 4.5) == pytest.approx(math.exp(-0.5), abs=1e-15)
        # integer offset: sigma_ratio 1/3 -> sigma = 3
        g = build_gt_heatmap([ActionInstance(0, 4, 12)], 20, 1, 1 / 3)
        assert abs(g[11, 0] - math.exp(-0.5)) <= 1e-12
        assert abs(g[5, 0] - math.exp(-0.5)) <= 1e-12

    def test_overlap_is_pointwise_max(self):
        insts = [ActionInstance(0, 2, 9), ActionInstance(0, 8, 19), ActionInstance(1, 5, 6), ActionInstance(0, 25, 27)]
        for ratio in (1 / 8, 1 / 4, 1 / 2):
            g = build_gt_heatmap(insts, 30, 2, ratio)
            np.testing.assert_allclose(g, brute_heatmap(insts, 30, 2, ratio), atol=1e-15)

    def test_even_duration_rounds_center(self):
        g = build_gt_heatmap([ActionInstance(0, 0, 7)], 10, 1)
        assert round_center(3.5) == 4 and g[4, 0] == 1.0

    def test_clipped_instance_keeps_original_gaussian(self):
        full = build_gt_heatmap([ActionInstance(0, 10, 29)], 40, 1)
        clipped = ActionInstance(0, 0, 9, ref_center=19.5 - 20, ref_duration=20)
        win = build_gt_heatmap([clipped], 20, 1)
        np.testing.assert_allclose(win, full[20:40], atol=1e-15)

    def test_zero_duration_floor(self):
        a = ActionInstance(0, 3, 3, ref_duration=0)
        with pytest.warns(UserWarning):
            g = build_gt_heatmap([a], 8, 1)
        assert g[4, 0] == pytest.approx(math.exp(-0.5))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 40), st.integers(0, 20), st.sampled_from([0.125, 0.25, 0.5]))
    def test_range_and_symmetry(self, start, dur, ratio):
        end = start + dur
        T = 80
        g = build_gt_heatmap([ActionInstance(0, start, end)], T, 1, ratio)[:, 0]
        assert g.min() >= 0 and g.max() == 1.0
        c = round_center((start + end) / 2)
        for d in range(1, min(c, T - 1 - c) + 1):
            assert g[c - d] == g[c + d]


class TestFocal:
    def test_closed_form_positive(self):
        L = focal_loss(Tensor([[0.5]]), np.array([[1.0]]), 1)
        assert abs(L.item() - (-(0.25) * math.log(0.5))) <= 1e-12
        assert L.item() == pytest.approx(0.1733, abs=1e-4)

    def test_closed_form_negative(self):
        L = focal_loss(Tensor([[0.5]]), np.array([[0.0]]), 1)
        assert abs(L.item() - (-(1.0) * 0.25 * math.log(0.5))) <= 1e-12

    def test_perfect_limit(self):
        gs = np.zeros((10, 2))
        gs[4, 0] = gs[7, 1] = 1.0
        for eps in (1e-3, 1e-5, 1e-7):
            G = np.where(gs == 1.0, 1 - eps, eps)
            assert 0 <= focal_loss(Tensor(G), gs, 2).item() < 10 * eps

    def test_matches_loop(self):
        rng = np.random.default_rng(0)
        insts = [ActionInstance(0, 3, 10), ActionInstance(1, 8, 20)]
        gs = build_gt_heatmap(insts, 24, 2)
        G = rng.uniform(0.01, 0.99, (24, 2))
        assert abs(focal_loss(Tensor(G), gs, 2).item() - loop_focal(G, gs, 2)) <= 1e-12

    def test_zero_instances(self):
        with pytest.raises(nx.ContractError):
            focal_loss(Tensor([[0.5]]), np.array([[0.0]]), 0)

    def test_monotone(self):
        grid = np.linspace(0.01, 0.99, 50)
        pos = [focal_loss(Tensor([[g]]), np.array([[1.0]]), 1).item() for g in grid]
        neg = [focal_loss(Tensor([[g]]), np.array([[0.3]]), 1).item() for g in grid]
        assert np.all(np.diff(pos) < 0) and np.all(np.diff(neg) > 0)
        assert min(pos) >= 0 and min(neg) >= 0

    def test_gradcheck(self):
        G = parameter(np.random.default_rng(1).uniform(0.1, 0.9, (12, 2)))
        gs = build_gt_heatmap([ActionInstance(0, 2, 6), ActionInstance(1, 4, 11)], 12, 2)
        assert nx.grad_check(lambda: focal_loss(G, gs, 2), [G], samples_per_param=None) < 1e-4


class TestBCE:
    def test_perfect(self):
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        p = np.clip(y, 1e-7, 1 - 1e-7)
        assert bce_loss(Tensor(p), y).item() < 1e-6

    def test_half(self):
        y = np.random.default_rng(0).integers(0, 2, (5, 3)).astype(float)
        assert abs(bce_loss(Tensor(np.full((5, 3), 0.5)), y).item() - math.log(2)) <= 1e-12

    def test_matches_loop(self):
        rng = np.random.default_rng(1)
        p, y = rng.uniform(0.01, 0.99, (7, 4)), rng.integers(0, 2, (7, 4)).astype(float)
        assert abs(bce_loss(Tensor(p), y).item() - loop_bce(p, y)) <= 1e-12

    def test_mask_drops_padded_frames(self):
        rng = np.random.default_rng(2)
        p, y = rng.uniform(0.01, 0.99, (6, 2)), rng.integers(0, 2, (6, 2)).astype(float)
        mask = np.array([1, 1, 1, 1, 0, 0])
        assert bce_loss(Tensor(p), y, mask).item() == pytest.approx(loop_bce(p[:4], y[:4]), abs=1e-12)


class TestTotal:
    def test_alpha_zero_equals_bce(self):
        rng = np.random.default_rng(0)
        p, y = rng.uniform(0.01, 0.99, (6, 2)), rng.integers(0, 2, (6, 2)).astype(float)
        G = rng.uniform(0.01, 0.99, (6, 2))
        t = total_loss(Tensor(p), y, Tensor(G), np.zeros((6, 2)), 1, 0.0)
        assert t.total.item() == bce_loss(Tensor(p), y).item()

    def test_heatmap_disabled_equals_bce(self):
        p, y = np.full((3, 2), 0.3), np.array([[1.0, 0.0]] * 3)
        t = total_loss(Tensor(p), y, None, None, 1, 0.05)
        assert t.total.item() == bce_loss(Tensor(p), y).item() and t.focal is None

    def test_sum_of_closed_forms(self):
        t = total_loss(Tensor([[0.5]]), np.array([[1.0]]), Tensor([[0.5]]), np.array([[1.0]]), 1, 0.05)
        expect = math.log(2) + 0.05 * (-0.25 * math.log(0.5))
        assert abs(t.total.item() - expect) <= 1e-12
        assert t.total.item() == pytest.approx(0.7018, abs=1e-4)

    def test_derivative_in_alpha_is_focal(self):
        rng = np.random.default_rng(3)
        p, y = rng.uniform(0.01, 0.99, (8, 2)), rng.integers(0, 2, (8, 2)).astype(float)
        G = rng.uniform(0.01, 0.99, (8, 2))
        gs = build_gt_heatmap([ActionInstance(0, 1, 5)], 8, 2)

        def L(a):
            return total_loss(Tensor(p), y, Tensor(G), gs, 1, a).total.item()

        h = 1e-5
        d = (L(0.05 + h) - L(0.05 - h)) / (2 * h)
        assert d == pytest.approx(focal_loss(Tensor(G), gs, 1).item(), rel=1e-6)

    def test_no_branch(self):
        with pytest.raises(nx.ConfigError):
            total_loss(None, None, None, None, 1, 0.05)

    def test_heatmap_only_optimises_focal(self):
        G = Tensor([[0.4]])
        t = total_loss(None, None, G, np.array([[1.0]]), 1, 0.05)
        assert t.total.item() == focal_loss(G, np.array([[1.0]]), 1).item()
