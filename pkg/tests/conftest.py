import numpy as np
import pytest

from motionguide.alignment.shape_alignment import MotionFrame, MotionSequence
from motionguide.body.body_model import PoseParams, ShapeParams
from motionguide.body.toy_body import make_toy_body
from motionguide.core.rng import make_rng
from motionguide.interfaces.cli.commands import fixture_camera


@pytest.fixture
def toy_model():
    return make_toy_body(num_vertices=100, num_joints=5, num_shape=10)


@pytest.fixture
def toy_model_correctives():
    return make_toy_body(num_vertices=100, num_joints=5, num_shape=10, pose_correctives=True)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def camera(toy_model):
    return fixture_camera(toy_model, 64, 64)


def random_motion(model, frames, camera, seed=0):
    rng = make_rng(seed, stream=7)
    poses = []
    for _ in range(frames):
        theta = 0.3 * rng.standard_normal((model.num_joints, 3))
        theta[0] = 0.0
        poses.append(MotionFrame(pose=PoseParams(theta), camera=camera))
    return MotionSequence(frames=poses, source_shape=ShapeParams(rng.standard_normal(model.num_shape)))


@pytest.fixture
def motion(toy_model, camera):
    return random_motion(toy_model, 3, camera)


@pytest.fixture
def motion10(toy_model, camera):
    return random_motion(toy_model, 10, camera, seed=3)


@pytest.fixture
def beta_ref(toy_model):
    return ShapeParams(0.5 * np.arange(toy_model.num_shape) / toy_model.num_shape)
