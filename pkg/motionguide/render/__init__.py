from motionguide.render.camera import Camera, project, project_points
from motionguide.render.rasterizer import BACKGROUND_DEPTH, GuidanceMaps, rasterize_mesh
from motionguide.render.skeleton import render_skeleton

__all__ = [
    "Camera",
    "project",
    "project_points",
    "BACKGROUND_DEPTH",
    "GuidanceMaps",
    "rasterize_mesh",
    "render_skeleton",
]
