from motionguide.body.body_model import (
    BodyModel,
    PosedMesh,
    PoseParams,
    ShapeParams,
    evaluate_body,
    forward_kinematics,
    regress_joints,
    rodrigues,
)
from motionguide.body.model_io import load_body_model, save_body_model
from motionguide.body.toy_body import make_toy_body

__all__ = [
    "BodyModel",
    "PosedMesh",
    "PoseParams",
    "ShapeParams",
    "evaluate_body",
    "forward_kinematics",
    "regress_joints",
    "rodrigues",
    "load_body_model",
    "save_body_model",
    "make_toy_body",
]
