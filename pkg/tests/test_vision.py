# tests/test_vision.py
import math

import numpy as np
import pytest

from app.core import sim_logic
from app.core.camera_logic import CameraIntrinsics, camera_to_world, world_to_camera
from app.core.kinematics_logic import solve_nearest
from app.core.servo_logic import features_of_joints, marker_points
from app.core.sim_logic import TARGET_POSE
from app.core.vision_logic import (
    DEFAULT_MARKER_RADII,
    HoughParams,
    PixelMap,
    circle_offsets,
    check_image,
    detect_markers,
    draw_ring,
    edge_pixels,
    extract_feature_vector,
    hough_circles,
    metric_to_pixel,
    observe_features,
    plan_detection,
    pixel_to_metric,
    read_pgm,
    render_stereo,
    write_pgm,
)
from app.utils.errors import ConfigurationError, FeatureLossError, MarkerOutOfViewError, VisionError

SMALL_MAP = PixelMap(width=200, height=200, f_px=100.0, cx=100.0, cy=100.0)
SMALL_INTRINSICS = CameraIntrinsics(f_u=1.0, f_v=1.0)


def ring_image(shape, *circles) -> np.ndarray:
    img = np.zeros(shape)
    for x, y, r in circles:
        draw_ring(img, x, y, r)
    return img


@pytest.fixture(scope="module")
def target_joints(plant):
    return solve_nearest(plant.geometry, TARGET_POSE.to_transform(), np.zeros(6)).q


def test_default_pixel_map():
    pmap = PixelMap()
    assert pmap.f_px == pytest.approx(685.6, abs=0.1)
    assert (pmap.cx, pmap.cy) == (640.0, 360.0)


def test_metric_pixel_conversion(intrinsics):
    pmap = PixelMap.for_intrinsics(intrinsics)
    x, y = metric_to_pixel(pmap, intrinsics, 0.5, -0.25)
    assert pixel_to_metric(pmap, intrinsics, x, y) == pytest.approx((0.5, -0.25))


def test_edge_pixels_are_x_y_in_row_order():
    img = np.zeros((20, 20))
    img[2, 5] = 1.0
    img[3, 1] = 0.7
    img[4, 4] = 0.3
    np.testing.assert_array_equal(edge_pixels(img), [[5, 2], [1, 3]])


def test_circle_offsets_lie_on_circle():
    for radius in (3, 10, 25):
        off = circle_offsets(radius)
        d = np.hypot(off[:, 0], off[:, 1])
        assert np.all(np.abs(d - radius) < 0.6)
        pts = {tuple(p) for p in off}
        assert all((-x, y) in pts and (y, x) in pts for x, y in pts)


def test_ring_edge_count():
    img = ring_image((128, 128), (64.0, 64.0, 20.0))
    n = len(edge_pixels(img))
    assert 100 <= n <= 314


def test_single_circle_is_found():
    img = ring_image((128, 128), (50.0, 60.0, 20.0))
    params = HoughParams(r_min=15, r_max=25)
    hyps = hough_circles(edge_pixels(img), params, img.shape)
    assert hyps
    best = hyps[0]
    assert abs(best.a - 50.0) <= 1.0 and abs(best.b - 60.0) <= 1.0 and abs(best.R - 20.0) <= 1.0
    found = detect_markers(img, params)
    assert len(found) == 1
    assert found[0].a == pytest.approx(50.0, abs=0.25)
    assert found[0].b == pytest.approx(60.0, abs=0.25)
    assert found[0].R == pytest.approx(20.0, abs=0.25)


def test_two_circles_are_found():
    img = ring_image((128, 128), (40.0, 40.0, 12.0), (90.0, 85.0, 18.0))
    found = sorted(detect_markers(img, HoughParams(r_min=8, r_max=25)), key=lambda c: c.R)
    assert len(found) == 2
    for hyp, (x, y, r) in zip(found, ((40.0, 40.0, 12.0), (90.0, 85.0, 18.0))):
        assert math.hypot(hyp.a - x, hyp.b - y) < 0.5
        assert hyp.R == pytest.approx(r, abs=0.5)


def test_sparse_noise_gives_no_circles(rng):
    img = np.zeros((128, 128))
    idx = rng.integers(0, 128, size=(30, 2))
    img[idx[:, 0], idx[:, 1]] = 1.0
    assert detect_markers(img, HoughParams(r_min=10, r_max=30)) == []


def test_random_rings_are_recovered(rng):
    params = HoughParams(r_min=6, r_max=64)
    for _ in range(50):
        r = rng.uniform(8.0, 60.0)
        x, y = rng.uniform(r + 4.0, 256.0 - r - 4.0, size=2)
        found = detect_markers(ring_image((256, 256), (x, y, r)), params)
        assert len(found) == 1
        assert math.hypot(found[0].a - x, found[0].b - y) < 1.0
        assert abs(found[0].R - r) < 1.0


def test_hough_is_deterministic():
    img = ring_image((128, 128), (40.3, 41.7, 12.2), (90.0, 85.5, 18.4))
    params = HoughParams(r_min=8, r_max=25)
    first = hough_circles(edge_pixels(img), params, img.shape)
    second = hough_circles(edge_pixels(img), params, img.shape)
    assert [h.to_dict() for h in first] == [h.to_dict() for h in second]


def test_render_on_optical_axis(camera_pose, intrinsics):
    pmap = PixelMap.for_intrinsics(intrinsics)
    point = camera_to_world(camera_pose, [0.0, 0.0, 1.0])
    left, right = render_stereo([point], [0.01], camera_pose, intrinsics, pmap)
    assert left.shape == (720, 1280)
    found = detect_markers(left, HoughParams())
    assert len(found) == 1
    assert found[0].a == pytest.approx(598.86, abs=0.5)
    assert found[0].b == pytest.approx(360.0, abs=0.5)
    assert found[0].R == pytest.approx(6.86, abs=0.5)
    mirrored = detect_markers(right, HoughParams())
    assert mirrored[0].a == pytest.approx(2 * 640.0 - 598.86, abs=0.5)


def test_empty_scene(camera_pose, intrinsics):
    left, right = render_stereo([], [], camera_pose, intrinsics, PixelMap())
    assert not left.any() and not right.any()
    assert detect_markers(left, HoughParams()) == []


def test_marker_out_of_view(camera_pose, intrinsics):
    behind = camera_to_world(camera_pose, [0.0, 0.0, -1.0])
    with pytest.raises(MarkerOutOfViewError):
        render_stereo([behind], [0.01], camera_pose, intrinsics, PixelMap())


def test_features_at_target_match_projection(plant, target_joints):
    pmap = PixelMap.for_intrinsics(plant.intr)
    ideal, flags = features_of_joints(plant, target_joints)
    assert flags == (True, True)
    measured = observe_features(
        marker_points(plant, target_joints), DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams()
    )
    assert np.max(np.abs(measured - ideal)) <= plant.intr.f_u / pmap.f_px


def test_features_near_target_within_two_pixels(plant, target_joints, rng):
    pmap = PixelMap.for_intrinsics(plant.intr)
    tol = 2.0 * plant.intr.f_u / pmap.f_px
    for _ in range(20):
        q = target_joints + rng.uniform(-0.05, 0.05, size=6)
        ideal, flags = features_of_joints(plant, q)
        assert all(flags)
        measured = observe_features(
            marker_points(plant, q), DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams()
        )
        assert np.max(np.abs(measured - ideal)) < tol


def test_large_ring_with_default_params():
    img = ring_image((720, 1280), (640.0, 360.0, 50.0))
    found = detect_markers(img, HoughParams())
    assert len(found) == 1
    assert math.hypot(found[0].a - 640.0, found[0].b - 360.0) < 0.5
    assert found[0].R == pytest.approx(50.0, abs=0.5)


def test_scaled_pixel_map_keeps_field_of_view(intrinsics):
    base = PixelMap.for_intrinsics(intrinsics)
    fine = base.scaled(3)
    assert (fine.width, fine.height) == (3840, 2160)
    assert fine.f_px == pytest.approx(3 * base.f_px)
    x, y = metric_to_pixel(fine, intrinsics, 0.4, -0.2)
    assert pixel_to_metric(fine, intrinsics, x, y) == pytest.approx((0.4, -0.2))
    assert base.scaled(1) is base
    assert base.fit((2160, 3840)) == fine
    with pytest.raises(ConfigurationError):
        base.scaled(0)
    with pytest.raises(ConfigurationError):
        base.fit((700, 1280))


def test_detection_plan_at_target(plant, target_joints):
    pmap = PixelMap.for_intrinsics(plant.intr)
    points = marker_points(plant, target_joints)
    grid, tuned = plan_detection(points, DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams())
    scale = grid.width // pmap.width
    assert scale > 1 and grid == pmap.scaled(scale)
    depths = world_to_camera(plant.pose, points)[:, 2]
    r_px = [scale * pmap.f_px * r / z for r, z in zip(DEFAULT_MARKER_RADII, depths)]
    assert min(r_px) >= HoughParams().radius_floor
    assert tuned.r_min <= min(r_px) and max(r_px) <= tuned.r_max
    untouched = plan_detection(
        points, DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams(auto_window=False)
    )
    assert untouched == (pmap, HoughParams(auto_window=False))


def test_detection_plan_rejects_unresolvable_scenes(plant, target_joints, camera_pose, intrinsics):
    pmap = PixelMap.for_intrinsics(plant.intr)
    points = marker_points(plant, target_joints)
    with pytest.raises(FeatureLossError):
        plan_detection(points, DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams(max_scale=1))
    near_top = camera_to_world(camera_pose, [0.0, -0.52, 1.0])
    with pytest.raises(FeatureLossError):
        plan_detection([near_top], [0.02], camera_pose, intrinsics, PixelMap.for_intrinsics(intrinsics), HoughParams())
    behind = camera_to_world(camera_pose, [0.0, 0.0, -1.0])
    with pytest.raises(MarkerOutOfViewError):
        plan_detection([behind], [0.01], camera_pose, intrinsics, PixelMap(), HoughParams())


def test_features_at_scenario_one_start(scenarios):
    setup = sim_logic.prepare(scenarios["1"])
    plant = setup.true_plant
    pmap = PixelMap.for_intrinsics(plant.intr)
    ideal, flags = features_of_joints(plant, setup.q_start)
    assert all(flags)
    measured = observe_features(
        marker_points(plant, setup.q_start), DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams()
    )
    assert np.max(np.abs(measured - ideal)) < 2.0 * plant.intr.f_u / pmap.f_px


@pytest.mark.slow
def test_random_in_view_poses_match_projection(plant, target_joints, rng):
    pmap = PixelMap.for_intrinsics(plant.intr)
    tol = 2.0 * plant.intr.f_u / pmap.f_px
    checked = 0
    for _ in range(1000):
        q = target_joints + rng.uniform(-0.6, 0.6, size=6)
        ideal, flags = features_of_joints(plant, q)
        if not all(flags):
            continue
        points = marker_points(plant, q)
        try:
            plan_detection(points, DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams())
        except FeatureLossError:
            continue
        measured = observe_features(points, DEFAULT_MARKER_RADII, plant.pose, plant.intr, pmap, HoughParams())
        assert np.max(np.abs(measured - ideal)) < tol
        checked += 1
        if checked == 50:
            break
    assert checked == 50


def test_missing_circle_is_feature_loss():
    params = HoughParams(r_min=5, r_max=20)
    left = ring_image((200, 200), (80.0, 60.0, 12.0), (80.0, 120.0, 8.0))
    right = ring_image((200, 200), (110.0, 60.0, 12.0))
    with pytest.raises(FeatureLossError):
        extract_feature_vector(left, right, params, SMALL_MAP, SMALL_INTRINSICS)


def test_epipolar_mismatch_is_feature_loss():
    params = HoughParams(r_min=5, r_max=20)
    left = ring_image((200, 200), (80.0, 60.0, 12.0), (80.0, 120.0, 8.0))
    right = ring_image((200, 200), (110.0, 70.0, 12.0), (110.0, 140.0, 8.0))
    with pytest.raises(FeatureLossError):
        extract_feature_vector(left, right, params, SMALL_MAP, SMALL_INTRINSICS)


def test_swapped_views_have_negative_disparity():
    params = HoughParams(r_min=5, r_max=20)
    left = ring_image((200, 200), (110.0, 60.0, 12.0), (110.0, 120.0, 8.0))
    right = ring_image((200, 200), (80.0, 60.0, 12.0), (80.0, 120.0, 8.0))
    with pytest.raises(FeatureLossError):
        extract_feature_vector(left, right, params, SMALL_MAP, SMALL_INTRINSICS)
    features = extract_feature_vector(right, left, params, SMALL_MAP, SMALL_INTRINSICS)
    assert features[2] < features[5]
    assert features[1] > features[0] and features[4] > features[3]


def test_pgm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, size=(32, 48)).astype(float) / 255.0
    path = write_pgm(tmp_path / "frame.pgm", img)
    assert path.read_bytes()[:2] == b"P5"
    back = read_pgm(path)
    np.testing.assert_array_equal(np.round(back * 255.0), np.round(img * 255.0))
    write_pgm(tmp_path / "again.pgm", back)
    assert (tmp_path / "again.pgm").read_bytes() == path.read_bytes()


def test_missing_pgm_raises(tmp_path):
    with pytest.raises(OSError):
        read_pgm(tmp_path / "missing.pgm")


def test_invalid_inputs():
    with pytest.raises(ConfigurationError):
        HoughParams(r_min=2)
    with pytest.raises(ConfigurationError):
        HoughParams(r_min=10, r_max=5)
    with pytest.raises(ConfigurationError):
        hough_circles(np.zeros((1, 2)), HoughParams(r_max=40), (64, 64))
    with pytest.raises(VisionError):
        check_image(np.zeros((8, 8)))
