import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradcheck import check_gradients
from oracles import matmul_loops
from vlpipe.assembly import (
    ProjectionParams,
    VideoTokenSequence,
    assemble_video_tokens,
    init_projection,
    project_tokens,
    projection_backward,
)
from vlpipe.features import N_PATCHES, FrameFeatures, VideoFeatures
from vlpipe.temporal import AggregatedPatches


def random_features(rng, t, dim):
    return VideoFeatures(
        frames=[
            FrameFeatures(
                cls=rng.uniform(-1, 1, size=dim),
                patches=rng.uniform(-1, 1, size=(N_PATCHES, dim)),
            )
            for _ in range(t)
        ]
    )


class TestAssemble:
    def test_row_count_t3(self):
        rng = np.random.default_rng(0)
        f = random_features(rng, 3, 4)
        agg = AggregatedPatches(patches=rng.uniform(-1, 1, size=(N_PATCHES, 4)))
        seq = assemble_video_tokens(agg, f)
        assert seq.tokens.shape == (259, 4)

    def test_t1_last_row_is_cls(self):
        rng = np.random.default_rng(1)
        f = random_features(rng, 1, 4)
        agg = AggregatedPatches(patches=rng.uniform(-1, 1, size=(N_PATCHES, 4)))
        seq = assemble_video_tokens(agg, f)
        assert seq.tokens.shape[0] == 257
        assert np.array_equal(seq.tokens[256], f.frames[0].cls)

    def test_cls_rows_round_trip(self):
        rng = np.random.default_rng(2)
        f = random_features(rng, 5, 8)
        agg = AggregatedPatches(patches=rng.uniform(-1, 1, size=(N_PATCHES, 8)))
        seq = assemble_video_tokens(agg, f)
        assert np.array_equal(seq.tokens[:N_PATCHES], agg.patches)
        assert np.array_equal(seq.tokens[N_PATCHES:], f.cls_stack())

    @pytest.mark.parametrize("t", [1, 2, 8, 64])
    def test_row_conservation(self, t):
        rng = np.random.default_rng(3)
        f = random_features(rng, t, 4)
        agg = AggregatedPatches(patches=rng.uniform(-1, 1, size=(N_PATCHES, 4)))
        seq = assemble_video_tokens(agg, f)
        assert seq.tokens.shape[0] == N_PATCHES + t
        projected = project_tokens(seq, init_projection(4, 6, seed=0))
        assert projected.shape == (N_PATCHES + t, 6)

    def test_dim_mismatch(self):
        rng = np.random.default_rng(4)
        f = random_features(rng, 2, 4)
        agg = AggregatedPatches(patches=rng.uniform(-1, 1, size=(N_PATCHES, 8)))
        with pytest.raises(ValueError):
            assemble_video_tokens(agg, f)


class TestProject:
    def test_identity(self):
        rng = np.random.default_rng(5)
        tokens = rng.uniform(-1, 1, size=(259, 4))
        seq = VideoTokenSequence(tokens=tokens, t=3)
        params = ProjectionParams(matrix=np.eye(4), bias=np.zeros(4))
        assert np.array_equal(project_tokens(seq, params), tokens)

    def test_zero_matrix_gives_bias_rows(self):
        rng = np.random.default_rng(6)
        seq = VideoTokenSequence(tokens=rng.uniform(-1, 1, size=(257, 4)), t=1)
        bias = np.array([1.0, -2.0, 3.0])
        params = ProjectionParams(matrix=np.zeros((4, 3)), bias=bias)
        out = project_tokens(seq, params)
        assert np.array_equal(out, np.tile(bias, (257, 1)))

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(7)
        tokens = rng.uniform(-1, 1, size=(259, 4))
        seq = VideoTokenSequence(tokens=tokens, t=3)
        params = ProjectionParams(
            matrix=rng.uniform(-1, 1, size=(4, 6)), bias=rng.uniform(-1, 1, size=6)
        )
        out = project_tokens(seq, params)
        expected = np.array(matmul_loops(tokens.tolist(), params.matrix.tolist()))
        expected = expected + params.bias
        assert np.allclose(out, expected, atol=1e-12)

    def test_dim_mismatch(self):
        rng = np.random.default_rng(8)
        seq = VideoTokenSequence(tokens=rng.uniform(-1, 1, size=(257, 4)), t=1)
        with pytest.raises(ValueError):
            project_tokens(seq, init_projection(8, 6))

    @given(alpha=st.floats(min_value=-2.0, max_value=3.0, allow_nan=False))
    def test_affine_combination_identity(self, alpha):
        rng = np.random.default_rng(9)
        x = rng.uniform(-1, 1, size=(259, 4))
        y = rng.uniform(-1, 1, size=(259, 4))
        params = init_projection(4, 6, seed=1)
        mixed = project_tokens(VideoTokenSequence(alpha * x + (1 - alpha) * y, t=3), params)
        px = project_tokens(VideoTokenSequence(x, t=3), params)
        py = project_tokens(VideoTokenSequence(y, t=3), params)
        assert np.abs(mixed - (alpha * px + (1 - alpha) * py)).max() < 1e-12

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        seq = VideoTokenSequence(tokens=rng.uniform(-1, 1, size=(258, 4)), t=2)
        params = init_projection(4, 8, seed=2)
        assert np.array_equal(project_tokens(seq, params), project_tokens(seq, params))


class TestProjectionBackward:
    def test_bias_gradient_is_column_sum(self):
        rng = np.random.default_rng(11)
        seq = VideoTokenSequence(tokens=rng.uniform(-1, 1, size=(258, 4)), t=2)
        params = init_projection(4, 6, seed=3)
        upstream = rng.uniform(-1, 1, size=(258, 6))
        _, d_bias, _ = projection_backward(seq, params, upstream)
        assert np.allclose(d_bias, upstream.sum(axis=0), atol=1e-15)

    def test_matrix_gradient_finite_differences(self):
        rng = np.random.default_rng(12)
        tokens = rng.uniform(-1, 1, size=(257, 4))
        seq = VideoTokenSequence(tokens=tokens, t=1)
        params = init_projection(4, 6, seed=4)
        upstream = rng.uniform(-1, 1, size=(257, 6))
        d_matrix, d_bias, d_input = projection_backward(seq, params, upstream)

        def loss(arrays):
            p = ProjectionParams(matrix=arrays["matrix"], bias=arrays["bias"])
            s = VideoTokenSequence(tokens=arrays["__input__"], t=1)
            return float(np.sum(upstream * project_tokens(s, p)))

        check_gradients(
            loss,
            {"matrix": params.matrix, "bias": params.bias, "__input__": tokens},
            {"matrix": d_matrix, "bias": d_bias, "__input__": d_input},
            coords_per_array=50,
        )

    def test_input_gradient_matches_loop_oracle(self):
        rng = np.random.default_rng(13)
        tokens = rng.uniform(-1, 1, size=(257, 4))
        seq = VideoTokenSequence(tokens=tokens, t=1)
        params = init_projection(4, 6, seed=5)
        upstream = rng.uniform(-1, 1, size=(257, 6))
        _, _, d_input = projection_backward(seq, params, upstream)
        expected = np.array(matmul_loops(upstream.tolist(), params.matrix.T.tolist()))
        assert np.allclose(d_input, expected, atol=1e-12)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(14)
        seq = VideoTokenSequence(tokens=rng.uniform(-1, 1, size=(257, 4)), t=1)
        params = init_projection(4, 6, seed=6)
        with pytest.raises(ValueError):
            projection_backward(seq, params, np.zeros((257, 7)))


class TestTokenSequenceValidation:
    def test_row_count_checked(self):
        with pytest.raises(ValueError):
            VideoTokenSequence(tokens=np.zeros((200, 4)), t=3)
