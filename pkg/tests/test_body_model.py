import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionguide.body.body_model import (
    BodyModel,
    PoseParams,
    ShapeParams,
    evaluate_body,
    forward_kinematics,
    regress_joints,
    rodrigues,
)
from motionguide.body.toy_body import make_toy_body
from motionguide.core.exceptions import DimensionError, InvalidArgumentError, ModelFormatError
from motionguide.core.rng import make_rng


def expm_series(axis_angle, terms=30):
    x, y, z = axis_angle
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    out = np.eye(3)
    term = np.eye(3)
    for n in range(1, terms):
        term = term @ k / n
        out = out + term
    return out


def skinning_oracle(model, beta, theta):
    """Per-vertex loop over joints, no batching."""
    V, K = model.num_vertices, model.num_joints
    v_shaped = np.array(model.template_vertices)
    for s in range(model.num_shape):
        v_shaped = v_shaped + model.shape_dirs[:, :, s] * beta[s]
    rest = np.zeros((K, 3))
    for k in range(K):
        for v in range(V):
            rest[k] += model.joint_regressor[k, v] * v_shaped[v]
    rots = [rodrigues(theta[k]) for k in range(K)]
    v_posed = v_shaped.copy()
    if model.pose_dirs is not None:
        feature = np.concatenate([(rots[k] - np.eye(3)).ravel() for k in range(1, K)])
        for p in range(feature.shape[0]):
            v_posed = v_posed + model.pose_dirs[:, :, p] * feature[p]
    world = [None] * K
    for k in range(K):
        local = np.eye(4)
        local[:3, :3] = rots[k]
        parent = model.parents[k]
        local[:3, 3] = rest[k] if parent < 0 else rest[k] - rest[parent]
        world[k] = local if parent < 0 else world[parent] @ local
    out = np.zeros((V, 3))
    for v in range(V):
        for k in range(K):
            moved = world[k][:3, :3] @ (v_posed[v] - rest[k]) + world[k][:3, 3]
            out[v] += model.skin_weights[v, k] * moved
    return out


def chain_model():
    """Three joints stacked on the y axis, one vertex bound to each."""
    return BodyModel(
        template_vertices=np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0]]),
        shape_dirs=np.zeros((3, 3, 1)),
        skin_weights=np.eye(3),
        joint_regressor=np.eye(3),
        parents=np.array([-1, 0, 1]),
        part_labels=np.zeros(3, dtype=np.int64),
        faces=np.array([[0, 1, 2]]),
        num_parts=1,
    )


class TestRodrigues:
    def test_zero_is_identity(self):
        assert np.array_equal(rodrigues([0.0, 0.0, 0.0]), np.eye(3))

    def test_half_turn_about_z(self):
        np.testing.assert_allclose(rodrigues([0.0, 0.0, np.pi]), np.diag([-1.0, -1.0, 1.0]), atol=1e-12)

    def test_matches_series_oracle(self):
        r = np.array([0.3, -0.2, 0.9])
        np.testing.assert_allclose(rodrigues(r), expm_series(r), atol=1e-12)

    def test_small_angle_expansion_is_orthonormal(self):
        R = rodrigues([3e-9, -1e-9, 2e-9])
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1.0) < 1e-9

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rodrigues([np.nan, 0.0, 0.0])

    @given(st.lists(st.floats(-10.0, 10.0, allow_nan=False), min_size=3, max_size=3))
    def test_orthonormal_with_unit_determinant(self, r):
        R = rodrigues(r)
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1.0) < 1e-9


class TestForwardKinematics:
    def test_identity_rotations_keep_rest_joints(self, toy_model):
        rest = toy_model.joint_regressor @ toy_model.template_vertices
        transforms = forward_kinematics(toy_model, rest, np.tile(np.eye(3), (toy_model.num_joints, 1, 1)))
        assert np.array_equal(transforms[:, :3, 3], rest)

    def test_root_rotation_transports_tree(self, toy_model):
        rest = toy_model.joint_regressor @ toy_model.template_vertices
        R = rodrigues([0.2, 0.7, -0.4])
        rots = np.tile(np.eye(3), (toy_model.num_joints, 1, 1))
        rots[0] = R
        world = forward_kinematics(toy_model, rest, rots)[:, :3, 3]
        expected = (rest - rest[0]) @ R.T + rest[0]
        np.testing.assert_allclose(world, expected, atol=1e-12)

    def test_bent_chain_tip(self):
        model = chain_model()
        rest = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0]])
        rots = np.tile(np.eye(3), (3, 1, 1))
        rots[1] = rodrigues([np.pi / 2, 0.0, 0.0])
        transforms = forward_kinematics(model, rest, rots)

        def rigid(R, t):
            out = np.eye(4)
            out[:3, :3] = R
            out[:3, 3] = t
            return out

        by_hand = rigid(np.eye(3), rest[0]) @ rigid(rots[1], rest[1] - rest[0]) @ rigid(np.eye(3), rest[2] - rest[1])
        np.testing.assert_allclose(transforms[2], by_hand, atol=1e-12)
        np.testing.assert_allclose(transforms[2][:3, 3], [0.0, 1.0, 1.0], atol=1e-12)

    def test_joint_count_mismatch(self, toy_model):
        with pytest.raises(DimensionError):
            forward_kinematics(toy_model, np.zeros((3, 3)), np.tile(np.eye(3), (3, 1, 1)))


class TestEvaluateBody:
    def test_rest_pose_fixed_point(self, toy_model):
        mesh = evaluate_body(toy_model, ShapeParams.zeros(10), PoseParams.zeros(5))
        np.testing.assert_allclose(mesh.vertices, toy_model.template_vertices, rtol=0, atol=1e-12)

    def test_unit_shape_coefficient(self, toy_model):
        beta = np.zeros(10)
        beta[0] = 1.0
        mesh = evaluate_body(toy_model, ShapeParams(beta), PoseParams.zeros(5))
        expected = toy_model.template_vertices + toy_model.shape_dirs[:, :, 0]
        np.testing.assert_allclose(mesh.vertices, expected, rtol=0, atol=1e-12)

    def test_shape_linearity(self, toy_model, rng):
        beta = rng.standard_normal(10)
        once = evaluate_body(toy_model, ShapeParams(beta), PoseParams.zeros(5)).vertices
        twice = evaluate_body(toy_model, ShapeParams(2 * beta), PoseParams.zeros(5)).vertices
        template = toy_model.template_vertices
        np.testing.assert_allclose(twice - template, 2 * (once - template), rtol=0, atol=1e-12)

    def test_partition_of_unity(self, toy_model, rng):
        beta = rng.standard_normal(10)
        mesh = evaluate_body(toy_model, ShapeParams(beta), PoseParams.zeros(5))
        shaped = toy_model.template_vertices + toy_model.shape_dirs @ beta
        np.testing.assert_allclose(mesh.vertices, shaped, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("correctives", [False, True])
    def test_matches_brute_force_oracle(self, correctives):
        model = make_toy_body(num_vertices=100, num_joints=5, num_shape=10, pose_correctives=correctives)
        rng = make_rng(99)
        for _ in range(50):
            beta = rng.standard_normal(10)
            theta = 0.5 * rng.standard_normal((5, 3))
            mesh = evaluate_body(model, ShapeParams(beta), PoseParams(theta))
            np.testing.assert_allclose(mesh.vertices, skinning_oracle(model, beta, theta), rtol=0, atol=1e-10)

    def test_root_rotation_is_rigid(self, toy_model_correctives, rng):
        beta = rng.standard_normal(10)
        theta = 0.4 * rng.standard_normal((5, 3))
        base = evaluate_body(toy_model_correctives, ShapeParams(beta), PoseParams(theta)).vertices
        theta[0] = [0.3, -1.1, 0.5]
        turned = evaluate_body(toy_model_correctives, ShapeParams(beta), PoseParams(theta)).vertices

        def pairwise(v):
            return np.linalg.norm(v[:, None] - v[None], axis=-1)

        np.testing.assert_allclose(pairwise(turned), pairwise(base), rtol=0, atol=1e-9)

    def test_normals_are_unit(self, toy_model, rng):
        mesh = evaluate_body(toy_model, ShapeParams(rng.standard_normal(10)), PoseParams(0.3 * rng.standard_normal((5, 3))))
        np.testing.assert_allclose(np.linalg.norm(mesh.per_vertex_normals, axis=1), 1.0, atol=1e-6)

    def test_dimension_mismatch(self, toy_model):
        with pytest.raises(DimensionError):
            evaluate_body(toy_model, ShapeParams.zeros(3), PoseParams.zeros(5))
        with pytest.raises(DimensionError):
            evaluate_body(toy_model, ShapeParams.zeros(10), PoseParams.zeros(4))

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=10, max_size=10))
    def test_posed_vertex_count(self, beta):
        model = make_toy_body()
        mesh = evaluate_body(model, ShapeParams(beta), PoseParams.zeros(model.num_joints))
        assert mesh.vertices.shape == (model.num_vertices, 3)
        assert np.array_equal(mesh.part_labels, model.part_labels)


class TestRegressJoints:
    def test_one_hot_selects_vertex(self):
        model = chain_model()
        vertices = np.arange(9, dtype=np.float64).reshape(3, 3)
        assert np.array_equal(regress_joints(model, vertices), vertices)

    def test_uniform_row_is_centroid(self, toy_model, rng):
        V = toy_model.num_vertices
        model = BodyModel(
            template_vertices=toy_model.template_vertices,
            shape_dirs=toy_model.shape_dirs,
            skin_weights=toy_model.skin_weights,
            joint_regressor=np.full((toy_model.num_joints, V), 1.0 / V),
            parents=toy_model.parents,
            part_labels=toy_model.part_labels,
            faces=toy_model.faces,
            num_parts=toy_model.num_parts,
        )
        vertices = rng.standard_normal((V, 3))
        np.testing.assert_allclose(regress_joints(model, vertices)[0], vertices.mean(axis=0), atol=1e-12)

    def test_translation_equivariance(self, toy_model, rng):
        vertices = rng.standard_normal((toy_model.num_vertices, 3))
        d = np.array([0.5, -1.0, 2.0])
        shifted = regress_joints(toy_model, vertices + d)
        np.testing.assert_allclose(shifted, regress_joints(toy_model, vertices) + d, atol=1e-12)

    def test_wrong_vertex_count(self, toy_model):
        with pytest.raises(DimensionError):
            regress_joints(toy_model, np.zeros((7, 3)))


class TestBodyModelInvariants:
    def test_weights_must_sum_to_one(self, toy_model):
        weights = np.array(toy_model.skin_weights)
        weights[0] *= 1.1
        with pytest.raises(ModelFormatError):
            BodyModel(
                template_vertices=toy_model.template_vertices,
                shape_dirs=toy_model.shape_dirs,
                skin_weights=weights,
                joint_regressor=toy_model.joint_regressor,
                parents=toy_model.parents,
                part_labels=toy_model.part_labels,
                faces=toy_model.faces,
                num_parts=toy_model.num_parts,
            )

    def test_parent_must_precede_child(self):
        with pytest.raises(ModelFormatError):
            BodyModel(
                template_vertices=np.zeros((3, 3)),
                shape_dirs=np.zeros((3, 3, 1)),
                skin_weights=np.eye(3),
                joint_regressor=np.eye(3),
                parents=np.array([-1, 2, 0]),
                part_labels=np.zeros(3, dtype=np.int64),
                faces=np.array([[0, 1, 2]]),
                num_parts=1,
            )

    def test_toy_body_sizes(self):
        model = make_toy_body(num_vertices=240, num_joints=24, num_shape=4)
        assert (model.num_vertices, model.num_joints, model.num_shape) == (240, 24, 4)
        assert model.num_parts == 23

    def test_shape_params_must_be_finite(self):
        with pytest.raises(InvalidArgumentError):
            ShapeParams([0.0, np.inf])
