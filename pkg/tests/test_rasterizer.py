import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionguide.body.body_model import PosedMesh, PoseParams, ShapeParams, evaluate_body
from motionguide.core.exceptions import InvalidArgumentError
from motionguide.core.rng import make_rng
from motionguide.interfaces.cli.commands import fixture_camera
from motionguide.render.camera import NEAR_Z, Camera, project, to_camera_space
from motionguide.render.rasterizer import BACKGROUND_DEPTH, GuidanceMaps, rasterize_mesh

SIZE = 64
CAMERA = Camera(f=32.0, cx=32.0, cy=32.0)
# camera-facing winding
SLANTED = np.array([[-1.0, -1.0, 2.0], [0.0, 1.0, 3.0], [1.0, -1.0, 2.5]])


def triangle_mesh(vertices, faces=((0, 1, 2),), labels=None):
    vertices = np.asarray(vertices, dtype=np.float64)
    return PosedMesh(
        vertices=vertices,
        joints=np.zeros((0, 3)),
        per_vertex_normals=np.tile([0.0, 0.0, -1.0], (len(vertices), 1)),
        part_labels=np.arange(len(vertices)) if labels is None else np.asarray(labels),
        faces=np.asarray(faces, dtype=np.int64),
    )


def cast_ray(i, j, tri):
    """Depth and smallest barycentric of the ray through pixel (i, j)."""
    d = np.array([(j + 0.5 - CAMERA.cx) / CAMERA.focal, (i + 0.5 - CAMERA.cy) / CAMERA.focal, 1.0])
    e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
    a, b, t = np.linalg.solve(np.column_stack([e1, e2, -d]), -tri[0])
    return t, min(1.0 - a - b, a, b)


def test_matches_ray_cast_oracle():
    maps = rasterize_mesh(triangle_mesh(SLANTED), CAMERA, SIZE, SIZE)
    checked = 0
    for i in range(SIZE):
        for j in range(SIZE):
            depth, inside = cast_ray(i, j, SLANTED)
            if inside > 1e-6:
                assert maps.depth[i, j] == pytest.approx(depth, rel=1e-9)
                checked += 1
            elif inside < -1e-6:
                assert maps.depth[i, j] == BACKGROUND_DEPTH
    assert checked > 50


def test_foreground_layers():
    maps = rasterize_mesh(triangle_mesh(SLANTED), CAMERA, SIZE, SIZE)
    fg = maps.foreground
    assert np.allclose(maps.normal[fg], [0.0, 0.0, -1.0])
    assert np.all(maps.normal[~fg] == 0)
    assert set(np.unique(maps.semantic[fg])) <= {1, 2, 3}
    assert np.all(maps.semantic[~fg] == 0)


def test_semantic_follows_nearest_vertex():
    maps = rasterize_mesh(triangle_mesh(SLANTED, labels=[4, 5, 6]), CAMERA, SIZE, SIZE)
    u, v, _, _ = project(CAMERA, SLANTED[1])
    # a pixel just inside the second corner
    assert maps.semantic[int(v) - 2, int(u)] == 6


def test_back_faces_culled():
    reversed_mesh = triangle_mesh(SLANTED[[0, 2, 1]])
    culled = rasterize_mesh(reversed_mesh, CAMERA, SIZE, SIZE)
    kept = rasterize_mesh(reversed_mesh, CAMERA, SIZE, SIZE, back_face_culling=False)
    drawn = rasterize_mesh(triangle_mesh(SLANTED), CAMERA, SIZE, SIZE)
    assert not culled.foreground.any()
    assert kept.foreground.any()
    assert np.sum(kept.foreground != drawn.foreground) <= 2


def test_nearer_face_wins_regardless_of_order():
    near = SLANTED * [1.0, 1.0, 0.0] + [0.0, 0.0, 1.5]
    far = SLANTED * [1.0, 1.0, 0.0] + [0.0, 0.0, 2.5]
    vertices = np.vstack([near, far])
    for faces in (((0, 1, 2), (3, 4, 5)), ((3, 4, 5), (0, 1, 2))):
        maps = rasterize_mesh(triangle_mesh(vertices, faces), CAMERA, SIZE, SIZE)
        assert np.allclose(maps.depth[maps.foreground], 1.5)


def test_triangle_behind_camera_culled():
    maps = rasterize_mesh(triangle_mesh(SLANTED * [1.0, 1.0, -1.0]), CAMERA, SIZE, SIZE, back_face_culling=False)
    assert not maps.foreground.any()


def test_empty_mesh_is_blank():
    maps = rasterize_mesh(PosedMesh.empty(), CAMERA, 8, 6)
    blank = GuidanceMaps.blank(8, 6)
    assert maps.depth.shape == (6, 8)
    assert np.array_equal(maps.depth, blank.depth)
    assert np.array_equal(maps.semantic, blank.semantic)


def test_bad_size():
    with pytest.raises(InvalidArgumentError):
        rasterize_mesh(PosedMesh.empty(), CAMERA, 0, 4)


def test_toy_body_render(toy_model, camera):
    mesh = evaluate_body(toy_model, ShapeParams.zeros(10), PoseParams.zeros(5))
    maps = rasterize_mesh(mesh, camera, 64, 64)
    fg = maps.foreground
    assert fg.sum() > 20
    np.testing.assert_allclose(np.linalg.norm(maps.normal[fg], axis=1), 1.0, atol=1e-9)
    assert maps.semantic.max() <= toy_model.num_parts
    maps.validate(toy_model.num_parts)


def random_body(model, seed):
    rng = make_rng(seed, stream=11)
    theta = 0.3 * rng.standard_normal((model.num_joints, 3))
    theta[0] = 0.0
    return evaluate_body(model, ShapeParams(0.5 * rng.standard_normal(model.num_shape)), PoseParams(theta))


def ray_cast(mesh, camera, width, height):
    """
    Nearest front-facing hit of every pixel ray, by ray/triangle intersection.

    Returns depth and semantic images plus a mask of pixels too close to an
    edge, a depth tie or a label tie for the comparison to be exact.
    """
    x, y = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    rays = np.stack([(x - camera.cx) / camera.focal, (y - camera.cy) / camera.focal, np.ones_like(x)], axis=-1).reshape(-1, 3)
    points = to_camera_space(camera, mesh.vertices)
    labels = np.asarray(mesh.part_labels)

    depth = np.full(len(rays), BACKGROUND_DEPTH)
    second = np.full(len(rays), BACKGROUND_DEPTH)
    semantic = np.zeros(len(rays), dtype=np.int64)
    margin = np.full(len(rays), np.inf)
    edge = np.zeros(len(rays), dtype=bool)
    for face in mesh.faces:
        p0, p1, p2 = points[face]
        e1, e2 = p1 - p0, p2 - p0
        if (points[face, 2] <= NEAR_Z).any() or np.cross(e1, e2).dot(p0) >= 0:
            continue
        pvec = np.cross(rays, e2)
        det = pvec @ e1
        ok = np.abs(det) > 1e-15
        det = np.where(ok, det, 1.0)
        qvec = np.cross(-p0, e1)
        a = (pvec @ -p0) / det
        b = (rays @ qvec) / det
        t = e2.dot(qvec) / det
        bary = np.stack([1.0 - a - b, a, b], axis=1)
        low = bary.min(axis=1)
        edge |= ok & (t > 0) & (np.abs(low) <= 1e-7)
        hit = ok & (t > 0) & (low > 0)
        nearer = hit & (t < depth)
        second = np.where(nearer, depth, np.where(hit, np.minimum(second, t), second))
        depth[nearer] = t[nearer]
        semantic[nearer] = labels[face[np.argmax(bary[nearer], axis=1)]] + 1
        ranked = np.sort(bary[nearer], axis=1)
        margin[nearer] = ranked[:, 2] - ranked[:, 1]

    covered = depth < BACKGROUND_DEPTH
    boundary = edge | (covered & (second - depth <= 1e-9)) | (margin < 1e-9)
    shape = (height, width)
    return depth.reshape(shape), semantic.reshape(shape), boundary.reshape(shape)


def test_random_bodies_match_ray_cast_oracle(toy_model, camera):
    covered_total = interior_total = boundary_misses = 0
    for seed in range(20):
        mesh = random_body(toy_model, seed)
        maps = rasterize_mesh(mesh, camera, SIZE, SIZE)
        depth, semantic, boundary = ray_cast(mesh, camera, SIZE, SIZE)
        covered = depth < BACKGROUND_DEPTH
        interior = ~boundary
        np.testing.assert_array_equal(maps.foreground[interior], covered[interior])
        inside = interior & covered
        np.testing.assert_allclose(maps.depth[inside], depth[inside], rtol=0, atol=1e-6)
        np.testing.assert_array_equal(maps.semantic[inside], semantic[inside])

        wrong = (maps.foreground != covered) | (maps.semantic != semantic) | (np.abs(maps.depth - depth) > 1e-6)
        boundary_misses += int(np.sum(boundary & wrong))
        covered_total += int(covered.sum())
        interior_total += int(inside.sum())
    assert interior_total > 500
    assert boundary_misses <= 0.01 * covered_total


def screen_facing_patch(x0, x1, y0, y1, z, cells=3):
    """Grid of triangles on the plane at depth ``z``, wound toward the camera."""
    xs, ys = np.linspace(x0, x1, cells + 1), np.linspace(y0, y1, cells + 1)
    vertices = np.array([[x, y, z] for y in ys for x in xs])
    faces = []
    for r in range(cells):
        for c in range(cells):
            a, b = r * (cells + 1) + c, r * (cells + 1) + c + 1
            faces += [(a, a + cells + 1, b), (b, a + cells + 1, b + cells + 1)]
    return vertices, faces


def two_patches(offset=0.0):
    left, left_faces = screen_facing_patch(-0.9, -0.1, -0.6, 0.6, 2.0 + offset)
    right, right_faces = screen_facing_patch(0.1, 0.9, -0.6, 0.6, 3.0 + offset)
    faces = left_faces + [tuple(i + len(left) for i in face) for face in right_faces]
    vertices = np.vstack([left, right])
    return triangle_mesh(vertices, faces, labels=np.arange(len(vertices)) % 4)


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.05, max_value=2.0))
def test_moving_away_adds_the_distance_to_depth(distance):
    before = rasterize_mesh(two_patches(), CAMERA, SIZE, SIZE)
    after = rasterize_mesh(two_patches(distance), CAMERA, SIZE, SIZE)
    both = before.foreground & after.foreground
    assert both.sum() > 20
    np.testing.assert_allclose(after.depth[both] - before.depth[both], distance, rtol=0, atol=1e-9)


def majority_downsample(semantic):
    """Most frequent foreground label of each 2x2 block; background only when the whole block is."""
    h, w = semantic.shape
    blocks = semantic.reshape(h // 2, 2, w // 2, 2).swapaxes(1, 2).reshape(h // 2, w // 2, 4)
    out = np.zeros((h // 2, w // 2), dtype=semantic.dtype)
    for i in range(h // 2):
        for j in range(w // 2):
            votes = blocks[i, j][blocks[i, j] > 0]
            if votes.size:
                out[i, j] = np.bincount(votes).argmax()
    return out


@pytest.mark.parametrize("seed", range(3))
def test_double_resolution_downsamples_to_same_labels(toy_model, seed):
    mesh = random_body(toy_model, seed)
    low = rasterize_mesh(mesh, fixture_camera(toy_model, 128, 128), 128, 128)
    high = rasterize_mesh(mesh, fixture_camera(toy_model, 256, 256), 256, 256)
    fg = low.foreground
    assert fg.sum() > 100
    assert np.mean(majority_downsample(high.semantic)[fg] == low.semantic[fg]) >= 0.95


@pytest.mark.parametrize("seed", range(5))
def test_layers_agree_on_coverage(toy_model, camera, seed):
    maps = rasterize_mesh(random_body(toy_model, seed), camera, SIZE, SIZE)
    fg = maps.depth < BACKGROUND_DEPTH
    assert fg.any()
    np.testing.assert_array_equal(maps.semantic > 0, fg)
    lengths = np.linalg.norm(maps.normal, axis=-1)
    np.testing.assert_array_equal(lengths > 0, fg)
    np.testing.assert_allclose(lengths[fg], 1.0, atol=1e-3)
