#include "mbcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "mbcal/rng.hpp"
#include "mbcal/silhouette.hpp"

namespace mbcal {

using nlohmann::json;

Camera make_look_at_camera(const Vec3& center, const Vec3& target, double focalPx,
                           const Vec2& principalPoint) {
    Camera cam;
    cam.center = center;
    cam.k << focalPx, 0, principalPoint.x(), 0, focalPx, principalPoint.y(), 0, 0, 1;

    const Vec3 z = (target - center).normalized();
    Vec3 x = Vec3(0, 1, 0).cross(z);
    if (x.norm() < 1e-8) x = Vec3(1, 0, 0).cross(z);
    x.normalize();
    const Vec3 y = z.cross(x);
    cam.r.row(0) = x.transpose();
    cam.r.row(1) = y.transpose();
    cam.r.row(2) = z.transpose();

    cam.p.leftCols<3>() = cam.k * cam.r;
    cam.p.col(3) = -cam.k * cam.r * center;
    return cam;
}

SceneSpec default_scene_spec() {
    SceneSpec spec;
    spec.azimuthsDeg = {0.0, 60.0};
    SphereTrack s1;
    s1.base = Vec3(0.0, 0.0, 0.0);
    s1.amplitude = Vec3(1.1, 0.55, 0.8);
    s1.frequency = Vec3(1.0, 2.0, 1.0);
    s1.phase = Vec3(0.0, 1.0, 2.0);
    s1.radius = 0.35;
    SphereTrack s2;
    s2.base = Vec3(0.3, -0.2, 0.1);
    s2.amplitude = Vec3(0.9, 0.5, 1.0);
    s2.frequency = Vec3(2.0, 1.0, 3.0);
    s2.phase = Vec3(0.7, 2.1, 4.0);
    s2.radius = 0.28;
    spec.spheres = {s1, s2};
    return spec;
}

SceneSpec facing_scene_spec() {
    SceneSpec spec = default_scene_spec();
    spec.azimuthsDeg = {0.0, 180.0};
    return spec;
}

Scene make_scene(const SceneSpec& spec) {
    if (spec.circleRadius <= 0) throw InvalidSpec("make_scene: circle radius must be > 0");
    if (spec.azimuthsDeg.size() < 2) throw InvalidSpec("make_scene: need >= 2 cameras");
    if (spec.spheres.empty()) throw InvalidSpec("make_scene: need >= 1 sphere trajectory");
    if (spec.frames < 10) throw InvalidSpec("make_scene: need >= 10 frames");
    if (spec.focalPx <= 0) throw InvalidSpec("make_scene: focal must be > 0");

    Scene scene;
    scene.spec = spec;
    const Vec2 pp = spec.imageSize / 2.0;
    for (double azDeg : spec.azimuthsDeg) {
        const double az = azDeg * M_PI / 180.0;
        const Vec3 c(spec.circleRadius * std::cos(az), spec.cameraHeight,
                     spec.circleRadius * std::sin(az));
        scene.cameras.push_back(make_look_at_camera(c, Vec3::Zero(), spec.focalPx, pp));
    }
    scene.spheresAtFrame.resize(static_cast<size_t>(spec.frames));
    for (int t = 0; t < spec.frames; ++t) {
        auto& frame = scene.spheresAtFrame[static_cast<size_t>(t)];
        for (const auto& track : spec.spheres) {
            Sphere s;
            s.radius = track.radius;
            const double w = 2 * M_PI * t / static_cast<double>(spec.frames);
            for (int k = 0; k < 3; ++k)
                s.center[k] = track.base[k] +
                              track.amplitude[k] * std::sin(track.frequency[k] * w + track.phase[k]);
            frame.push_back(s);
        }
    }
    return scene;
}

Fundamental scene_fundamental(const Scene& scene, size_t camI, size_t camJ) {
    if (camI >= scene.cameras.size() || camJ >= scene.cameras.size())
        throw InvalidSpec("scene_fundamental: camera index out of range");
    return fundamental_from_cameras(scene.cameras[camI].p, scene.cameras[camJ].p);
}

namespace {

struct PixelBox {
    int x0, y0, x1, y1;
    bool empty;
};

// conservative pixel bounding box of a sphere's projection
PixelBox sphere_pixel_box(const Camera& cam, const Sphere& s, const Vec2& imageSize) {
    const int w = static_cast<int>(imageSize.x()), h = static_cast<int>(imageSize.y());
    const Vec3 q = cam.r * (s.center - cam.center);  // camera coords
    if (q.z() + s.radius <= 1e-9) return {0, 0, -1, -1, true};  // fully behind
    if (q.z() - s.radius <= 1e-9) return {0, 0, w - 1, h - 1, false};  // crosses the camera plane

    const double fx = cam.k(0, 0), fy = cam.k(1, 1), cx = cam.k(0, 2), cy = cam.k(1, 2);
    double uMin = std::numeric_limits<double>::infinity(), uMax = -uMin;
    double vMin = uMin, vMax = -uMin;
    for (double dz : {-s.radius, s.radius})
        for (double dv : {-s.radius, s.radius}) {
            const double z = q.z() + dz;
            uMin = std::min(uMin, fx * (q.x() + dv) / z + cx);
            uMax = std::max(uMax, fx * (q.x() + dv) / z + cx);
            vMin = std::min(vMin, fy * (q.y() + dv) / z + cy);
            vMax = std::max(vMax, fy * (q.y() + dv) / z + cy);
        }
    PixelBox box;
    box.x0 = std::max(0, static_cast<int>(std::floor(uMin)) - 2);
    box.x1 = std::min(w - 1, static_cast<int>(std::ceil(uMax)) + 2);
    box.y0 = std::max(0, static_cast<int>(std::floor(vMin)) - 2);
    box.y1 = std::min(h - 1, static_cast<int>(std::ceil(vMax)) + 2);
    box.empty = box.x0 > box.x1 || box.y0 > box.y1;
    return box;
}

}  // namespace

Mask render_silhouette(const Camera& cam, const std::vector<Sphere>& spheres,
                       const Vec2& imageSize, int frameIndex) {
    Mask m(static_cast<int>(imageSize.x()), static_cast<int>(imageSize.y()), frameIndex);
    const Mat3 rtKinv = cam.r.transpose() * cam.k.inverse();
    for (const auto& s : spheres) {
        const PixelBox box = sphere_pixel_box(cam, s, imageSize);
        if (box.empty) continue;
        const Vec3 q = s.center - cam.center;
        const double qq = q.squaredNorm() - s.radius * s.radius;
        for (int y = box.y0; y <= box.y1; ++y)
            for (int x = box.x0; x <= box.x1; ++x) {
                if (m.at(x, y)) continue;
                const Vec3 d = rtKinv * Vec3(x, y, 1);
                const double a = d.squaredNorm();
                const double b = -2.0 * d.dot(q);
                const double disc = b * b - 4.0 * a * qq;
                if (disc < 0) continue;
                // hit in front of the camera iff the larger root is positive
                if (-b + std::sqrt(disc) > 0) m.set(x, y, true);
            }
    }
    m.update_bbox();
    return m;
}

Mask morph_mask(const Mask& m, int n) {
    if (n == 0) return m;
    const bool dilate = n > 0;
    Mask cur = m;
    for (int pass = 0; pass < std::abs(n); ++pass) {
        Mask next = cur;
        for (int y = 0; y < cur.height; ++y)
            for (int x = 0; x < cur.width; ++x) {
                bool any = false, all = true;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        const bool v = xx >= 0 && yy >= 0 && xx < cur.width && yy < cur.height &&
                                       cur.at(xx, yy);
                        any = any || v;
                        all = all && v;
                    }
                next.set(x, y, dilate ? any : all);
            }
        cur = std::move(next);
    }
    cur.update_bbox();
    return cur;
}

std::vector<Mask> render_sequence(const Scene& scene, size_t camIndex) {
    if (camIndex >= scene.cameras.size())
        throw InvalidSpec("render_sequence: camera index out of range");
    const NoiseSpec& noise = scene.spec.noise;
    std::vector<Mask> out;
    out.reserve(scene.spheresAtFrame.size());
    for (size_t t = 0; t < scene.spheresAtFrame.size(); ++t) {
        uint64_t rng = noise.seed ^ (0x9E3779B97F4A7C15ULL * (t + 1)) ^ (camIndex << 32);
        if (noise.dropout > 0 && splitmix_unit(rng) < noise.dropout) {
            Mask empty(static_cast<int>(scene.spec.imageSize.x()),
                       static_cast<int>(scene.spec.imageSize.y()), static_cast<int>(t));
            empty.update_bbox();
            out.push_back(std::move(empty));
            continue;
        }
        Mask m = render_silhouette(scene.cameras[camIndex], scene.spheresAtFrame[t],
                                   scene.spec.imageSize, static_cast<int>(t));
        if (noise.dilatePx != 0) m = morph_mask(m, noise.dilatePx);
        out.push_back(std::move(m));
    }
    return out;
}

Mat3 sphere_conic(const Camera& cam, const Sphere& s) {
    const Vec3 q = cam.r * (s.center - cam.center);
    const double slack = q.squaredNorm() - s.radius * s.radius;
    if (slack <= 0) throw Error("sphere_conic: camera center inside the sphere");
    const Mat3 m = q * q.transpose() - slack * Mat3::Identity();
    const Mat3 kinv = cam.k.inverse();
    return kinv.transpose() * m * kinv;
}

namespace {

// smallest angle in degrees between two 2-D directions, modulo 180
double direction_angle_deg(const Vec2& a, const Vec2& b) {
    const double c = std::abs(a.normalized().dot(b.normalized()));
    return std::acos(std::clamp(c, 0.0, 1.0)) * 180.0 / M_PI;
}

double point_segment_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// boundary points whose incident hull-edge direction is within tol of
// the epipolar direction through them
std::vector<Vec2> tangent_filtered_points(const Mask& mask, const HomogPoint& epipole,
                                          double tolDeg) {
    const ConvexHull hull = convex_hull(mask);
    if (hull.degenerate()) return {};
    const auto pts = candidate_points(mask, hull);
    std::vector<Vec2> out;
    const size_t n = hull.vertices.size();
    for (const auto& cp : pts) {
        const Vec3 line = epipole.v.cross(Vec3(cp.pos.x(), cp.pos.y(), 1.0));
        const Vec2 epiDir(-line.y(), line.x());
        if (epiDir.norm() < 1e-12) continue;
        for (size_t i = 0; i < n; ++i) {
            const Vec2& a = hull.vertices[i];
            const Vec2& b = hull.vertices[(i + 1) % n];
            if (point_segment_dist(cp.pos, a, b) > 0.5) continue;
            if (direction_angle_deg(b - a, epiDir) <= tolDeg) {
                out.push_back(cp.pos);
                break;
            }
        }
    }
    return out;
}

}  // namespace

std::vector<FrontierPair> ground_truth_frontier_points(const std::vector<Mask>& masksA,
                                                       const std::vector<Mask>& masksB,
                                                       const Fundamental& fGT,
                                                       double tangentTolDeg, double distTol,
                                                       double minSeparationPx) {
    if (masksA.size() != masksB.size())
        throw DimensionMismatch("ground_truth_frontier_points: sequences differ in length");

    struct Scored {
        FrontierPair pair;
        double dist;
    };
    std::vector<Scored> found;
    for (size_t t = 0; t < masksA.size(); ++t) {
        if (masksA[t].empty_foreground() || masksB[t].empty_foreground()) continue;
        const auto ptsA = tangent_filtered_points(masksA[t], fGT.e, tangentTolDeg);
        if (ptsA.empty()) continue;
        const auto ptsB = tangent_filtered_points(masksB[t], fGT.ePrime, tangentTolDeg);
        for (const auto& a : ptsA) {
            double best = std::numeric_limits<double>::infinity();
            Vec2 bestB;
            for (const auto& b : ptsB) {
                const double d = symmetric_epipolar_distance(
                    fGT, {HomogPoint::pixel(a.x(), a.y()), HomogPoint::pixel(b.x(), b.y())});
                if (d < best) {
                    best = d;
                    bestB = b;
                }
            }
            if (best < distTol) {
                Scored s;
                s.pair = {HomogPoint::pixel(a.x(), a.y()),
                          HomogPoint::pixel(bestB.x(), bestB.y()), static_cast<int>(t)};
                s.dist = best;
                found.push_back(s);
            }
        }
    }

    std::stable_sort(found.begin(), found.end(),
                     [](const Scored& x, const Scored& y) { return x.dist < y.dist; });
    std::vector<FrontierPair> kept;
    for (const auto& s : found) {
        bool far = true;
        for (const auto& k : kept) {
            if ((s.pair.a.dehomog() - k.a.dehomog()).norm() < minSeparationPx ||
                (s.pair.b.dehomog() - k.b.dehomog()).norm() < minSeparationPx) {
                far = false;
                break;
            }
        }
        if (far) kept.push_back(s.pair);
    }
    if (kept.empty())
        throw NoFrontierPoints("ground_truth_frontier_points: no pair passed the filters");
    return kept;
}

std::vector<PointPair> frontier_point_pairs(const std::vector<FrontierPair>& pairs) {
    std::vector<PointPair> out;
    out.reserve(pairs.size());
    for (const auto& fp : pairs) out.push_back({fp.a, fp.b});
    return out;
}

// --- serialization ---

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("scene spec: expected 3-vector");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& spec) {
    json j;
    j["azimuths_deg"] = spec.azimuthsDeg;
    j["circle_radius"] = spec.circleRadius;
    j["camera_height"] = spec.cameraHeight;
    j["focal_px"] = spec.focalPx;
    j["image_size"] = {spec.imageSize.x(), spec.imageSize.y()};
    j["frames"] = spec.frames;
    j["spheres"] = json::array();
    for (const auto& s : spec.spheres)
        j["spheres"].push_back({{"base", vec3_json(s.base)},
                                {"amplitude", vec3_json(s.amplitude)},
                                {"frequency", vec3_json(s.frequency)},
                                {"phase", vec3_json(s.phase)},
                                {"radius", s.radius}});
    j["noise"] = {{"dilate_px", spec.noise.dilatePx},
                  {"dropout", spec.noise.dropout},
                  {"seed", spec.noise.seed}};
    return j.dump(2);
}

SceneSpec scene_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("scene spec: ") + e.what());
    }
    SceneSpec spec = default_scene_spec();
    spec.spheres.clear();
    try {
        if (j.contains("azimuths_deg")) spec.azimuthsDeg = j["azimuths_deg"].get<std::vector<double>>();
        if (j.contains("circle_radius")) spec.circleRadius = j["circle_radius"].get<double>();
        if (j.contains("camera_height")) spec.cameraHeight = j["camera_height"].get<double>();
        if (j.contains("focal_px")) spec.focalPx = j["focal_px"].get<double>();
        if (j.contains("image_size"))
            spec.imageSize = Vec2(j["image_size"][0].get<double>(), j["image_size"][1].get<double>());
        if (j.contains("frames")) spec.frames = j["frames"].get<int>();
        if (j.contains("spheres"))
            for (const auto& js : j["spheres"]) {
                SphereTrack s;
                if (js.contains("base")) s.base = vec3_from(js["base"]);
                if (js.contains("amplitude")) s.amplitude = vec3_from(js["amplitude"]);
                if (js.contains("frequency")) s.frequency = vec3_from(js["frequency"]);
                if (js.contains("phase")) s.phase = vec3_from(js["phase"]);
                if (js.contains("radius")) s.radius = js["radius"].get<double>();
                spec.spheres.push_back(s);
            }
        if (j.contains("noise")) {
            const auto& jn = j["noise"];
            if (jn.contains("dilate_px")) spec.noise.dilatePx = jn["dilate_px"].get<int>();
            if (jn.contains("dropout")) spec.noise.dropout = jn["dropout"].get<double>();
            if (jn.contains("seed")) spec.noise.seed = jn["seed"].get<uint64_t>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("scene spec: ") + e.what());
    }
    if (spec.spheres.empty()) spec.spheres = default_scene_spec().spheres;
    return spec;
}

void save_scene(const Scene& scene, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    json manifest;
    manifest["spec"] = json::parse(scene_spec_to_json(scene.spec));
    manifest["cameras"] = json::array();
    for (const auto& cam : scene.cameras) {
        json jc;
        jc["center"] = vec3_json(cam.center);
        jc["k"] = json::array();
        jc["r"] = json::array();
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 3; ++c) {
                jc["k"].push_back(cam.k(i, c));
                jc["r"].push_back(cam.r(i, c));
            }
        manifest["cameras"].push_back(jc);
    }
    const Fundamental fGT = scene_fundamental(scene);
    manifest["gt_fundamental"] = json::parse(fundamental_to_json(fGT));

    std::vector<std::vector<Mask>> clean;  // GT extraction ignores noise
    char name[32];
    for (size_t c = 0; c < scene.cameras.size(); ++c) {
        const std::string camDir = dir + "/cam" + static_cast<char>('A' + c);
        fs::create_directories(camDir);
        const auto noisy = render_sequence(scene, c);
        std::vector<Mask> pure;
        for (size_t t = 0; t < noisy.size(); ++t) {
            std::snprintf(name, sizeof(name), "/frame_%04zu.pgm", t);
            save_mask_file(noisy[t], camDir + name);
            pure.push_back(render_silhouette(scene.cameras[c], scene.spheresAtFrame[t],
                                             scene.spec.imageSize, static_cast<int>(t)));
        }
        clean.push_back(std::move(pure));
    }

    std::ofstream csv(dir + "/frontier_points.csv");
    csv << "frame,xA,yA,xB,yB\n";
    try {
        for (const auto& fp : ground_truth_frontier_points(clean[0], clean[1], fGT)) {
            const Vec2 a = fp.a.dehomog(), b = fp.b.dehomog();
            csv << fp.frame << ',' << a.x() << ',' << a.y() << ',' << b.x() << ',' << b.y()
                << '\n';
        }
        manifest["frontier_points"] = "frontier_points.csv";
    } catch (const NoFrontierPoints&) {
        manifest["frontier_points"] = nullptr;
    }

    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(2) << '\n';
}

}  // namespace mbcal
