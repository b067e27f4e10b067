#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbcal/geometry.hpp"
#include "mbcal/mask.hpp"

namespace mbcal {

struct Camera {
    Mat3 k = Mat3::Identity();   // intrinsics (zero skew)
    Mat3 r = Mat3::Identity();   // world-to-camera rotation
    Vec3 center = Vec3::Zero();  // camera center in world coords
    Mat34 p = Mat34::Zero();     // derived projection K [R | -R c]
};

Camera make_look_at_camera(const Vec3& center, const Vec3& target, double focalPx,
                           const Vec2& principalPoint);

struct Sphere {
    Vec3 center = Vec3::Zero();  // meters
    double radius = 0.0;
};

/// Lissajous trajectory: center(t) = base + amp .* sin(2*pi*freq*t/frames + phase).
struct SphereTrack {
    Vec3 base = Vec3::Zero();
    Vec3 amplitude = Vec3::Zero();
    Vec3 frequency = Vec3::Ones();
    Vec3 phase = Vec3::Zero();
    double radius = 0.3;
};

/// Silhouette corruption: dilate (> 0) or erode (< 0) the boundary by
/// |dilatePx| pixels, and drop whole frames with probability dropout.
struct NoiseSpec {
    int dilatePx = 0;
    double dropout = 0.0;
    uint64_t seed = 0;
};

struct SceneSpec {
    std::vector<double> azimuthsDeg{0.0, 60.0};  // camera azimuths on the circle
    double circleRadius = 5.0;                   // meters
    double cameraHeight = 0.0;
    double focalPx = 600.0;
    Vec2 imageSize{640, 480};
    int frames = 200;
    std::vector<SphereTrack> spheres;
    NoiseSpec noise;
};

struct Scene {
    SceneSpec spec;
    std::vector<Camera> cameras;
    std::vector<std::vector<Sphere>> spheresAtFrame;  // [frame][sphere]
};

/// Default desk-scale scene: 2 cameras at 0/60 degrees, 200 frames,
/// 640x480, two spheres on Lissajous paths.
SceneSpec default_scene_spec();
/// The facing configuration of the robustness test: cameras at 0/180.
SceneSpec facing_scene_spec();

/// Places cameras on the circle looking at the origin and evaluates all
/// trajectories. Throws InvalidSpec on non-positive radius, < 2
/// cameras, empty trajectories, or < 10 frames.
Scene make_scene(const SceneSpec& spec);

/// Ground-truth F between two of the scene's cameras (A = camI, B = camJ).
Fundamental scene_fundamental(const Scene& scene, size_t camI = 0, size_t camJ = 1);

/// Exact per-pixel ray-sphere rendering; a pixel is foreground iff the
/// ray through its center hits any sphere in front of the camera.
Mask render_silhouette(const Camera& cam, const std::vector<Sphere>& spheres,
                       const Vec2& imageSize, int frameIndex = 0);

/// All frames of one camera, with the spec's noise applied.
std::vector<Mask> render_sequence(const Scene& scene, size_t camIndex);

/// Morphological square dilation (n > 0) or erosion (n < 0) by |n| px.
Mask morph_mask(const Mask& m, int n);

/// Projected silhouette conic of one sphere: x^T C x = 0 on pixel
/// coords. Throws Error when the sphere touches the camera center.
Mat3 sphere_conic(const Camera& cam, const Sphere& s);

struct FrontierPair {
    HomogPoint a, b;
    int frame = 0;
};

/// Ground-truth frontier extraction: boundary points whose hull
/// tangent is within tangentTolDeg of the true epipolar line, paired
/// across images when the GT symmetric epipolar distance is < distTol,
/// thinned to pairwise separation >= minSeparationPx in both images.
/// Throws NoFrontierPoints when nothing survives.
std::vector<FrontierPair> ground_truth_frontier_points(const std::vector<Mask>& masksA,
                                                       const std::vector<Mask>& masksB,
                                                       const Fundamental& fGT,
                                                       double tangentTolDeg = 1.0,
                                                       double distTol = 0.01,
                                                       double minSeparationPx = 15.0);

std::vector<PointPair> frontier_point_pairs(const std::vector<FrontierPair>& pairs);

/// Scene spec JSON (cameras, trajectories, noise) round trip.
std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& json);

/// Writes camA/frame_NNNN.pgm, camB/..., manifest.json (GT F, cameras)
/// and frontier_points.csv under dir.
void save_scene(const Scene& scene, const std::string& dir);

}  // namespace mbcal
