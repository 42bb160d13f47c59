#include "panosplat/service.hpp"

#include "panosplat/error.hpp"
#include "panosplat/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace panosplat {
namespace {

double parse_number(const std::map<std::string, std::string>& q, const std::string& key) {
    const auto it = q.find(key);
    if (it == q.end()) throw InvalidParameterError("missing parameter '" + key + "'");
    const std::string& s = it->second;
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v))
        throw InvalidParameterError("parameter '" + key + "' is not a finite number: '" + s + "'");
    return v;
}

int parse_int(const std::map<std::string, std::string>& q, const std::string& key) {
    const auto it = q.find(key);
    if (it == q.end()) throw InvalidParameterError("missing parameter '" + key + "'");
    const std::string& s = it->second;
    int v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size())
        throw InvalidParameterError("parameter '" + key + "' is not an integer: '" + s + "'");
    return v;
}

nlohmann::json vec_json(const auto& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

} // namespace

RenderRequest parse_render_request(const std::map<std::string, std::string>& query) {
    static const std::set<std::string> known = {"qw", "qx", "qy", "qz", "tx", "ty", "tz",
                                                "h",  "w",  "format", "quality"};
    for (const auto& [k, v] : query)
        if (!known.contains(k)) throw InvalidParameterError("unknown parameter '" + k + "'");

    RenderRequest r;
    r.quaternion = Vec4(parse_number(query, "qw"), parse_number(query, "qx"), parse_number(query, "qy"),
                        parse_number(query, "qz"));
    const double norm = r.quaternion.norm();
    if (std::abs(norm - 1.0) > 1e-3)
        throw InvalidParameterError("quaternion must have unit norm, got " + std::to_string(norm));
    r.translation = Vec3(parse_number(query, "tx"), parse_number(query, "ty"), parse_number(query, "tz"));
    r.height = parse_int(query, "h");
    r.width = parse_int(query, "w");
    if (r.height < 2 || r.height > kMaxRenderHeight)
        throw InvalidParameterError("parameter 'h' must be in [2, " + std::to_string(kMaxRenderHeight) + "]");
    if (r.width != 2 * r.height)
        throw InvalidParameterError("equirectangular output requires w == 2*h, got " + std::to_string(r.height) +
                                    "x" + std::to_string(r.width));
    if (const auto it = query.find("format"); it != query.end()) {
        if (it->second == "png") r.format = ImageFormat::png;
        else if (it->second == "jpeg" || it->second == "jpg") r.format = ImageFormat::jpeg;
        else throw InvalidParameterError("parameter 'format' must be png or jpeg");
    }
    if (query.contains("quality")) {
        r.quality = parse_int(query, "quality");
        if (r.quality < 1 || r.quality > 100) throw InvalidParameterError("parameter 'quality' must be in [1, 100]");
    }
    return r;
}

PanoramaCamera request_camera(const RenderRequest& req) {
    return PanoramaCamera::from_pose(req.quaternion.normalized(), req.translation, req.height, req.width);
}

std::string render_frame(const GaussianScene& scene, const RenderRequest& req, const RenderSettings& settings) {
    const RenderOutput out = render(scene, request_camera(req), settings);
    return req.format == ImageFormat::png ? encode_png(out.color) : encode_jpeg(out.color, req.quality);
}

std::string mime_type(ImageFormat f) { return f == ImageFormat::png ? "image/png" : "image/jpeg"; }

nlohmann::json scene_meta(const Checkpoint& ckpt) {
    const GaussianScene& s = ckpt.state.scene;
    Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
    if (!s.empty()) {
        lo = hi = s.position(0);
        for (std::size_t i = 1; i < s.size(); ++i) {
            lo = lo.cwiseMin(Vec3(s.position(i)));
            hi = hi.cwiseMax(Vec3(s.position(i)));
        }
    }
    return {{"gaussian_count", s.size()},
            {"sh_degree", s.sh_degree},
            {"iteration", ckpt.state.iteration},
            {"bbox", {{"min", vec_json(lo)}, {"max", vec_json(hi)}}},
            {"suggested_start_pose",
             {{"quaternion", vec_json(ckpt.start_pose.quaternion)},
              {"translation", vec_json(ckpt.start_pose.translation)}}}};
}

FrameStats frame_stats(std::vector<double> times_ms) {
    if (times_ms.empty()) throw InvalidParameterError("frame statistics need at least one frame");
    std::sort(times_ms.begin(), times_ms.end());
    const std::size_t n = times_ms.size();
    FrameStats s;
    s.frames = n;
    double sum = 0.0;
    for (double t : times_ms) sum += t;
    s.mean_ms = sum / static_cast<double>(n);
    s.median_ms = n % 2 ? times_ms[n / 2] : 0.5 * (times_ms[n / 2 - 1] + times_ms[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
    s.p99_ms = times_ms[std::max<std::size_t>(rank, 1) - 1];
    s.fps = s.mean_ms > 0.0 ? 1000.0 / s.mean_ms : 0.0;
    return s;
}

FrameStats bench_render(const GaussianScene& scene, const PanoramaCamera& cam, const RenderSettings& settings,
                        std::size_t frames) {
    if (frames == 0) throw InvalidParameterError("benchmark needs at least one frame");
    std::vector<double> times;
    times.reserve(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const auto t0 = std::chrono::steady_clock::now();
        const RenderOutput out = render(scene, cam, settings);
        const auto t1 = std::chrono::steady_clock::now();
        if (out.color.empty()) throw Error("render produced an empty image");
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return frame_stats(std::move(times));
}

nlohmann::json equirect_test_vectors(int height, int width, std::uint64_t seed, int random_count) {
    if (height <= 0 || width != 2 * height)
        throw InvalidParameterError("test vectors require width == 2*height");
    constexpr double pi = std::numbers::pi;

    nlohmann::json pixels = nlohmann::json::array();
    auto add_pixel = [&](double row, double col) {
        const SphericalAngles a = pixel_to_angles(row, col, height, width);
        pixels.push_back({{"row", row},
                          {"col", col},
                          {"theta", a.theta},
                          {"phi", a.phi},
                          {"direction", vec_json(angles_to_direction(a.theta, a.phi))}});
    };
    const double h = height, w = width;
    for (double row : {0.5, 0.25 * h, 0.5 * h, 0.75 * h, h - 0.5})
        for (double col : {0.0, 0.5, 0.25 * w, 0.5 * w, 0.75 * w, w - 0.5}) add_pixel(row, col);

    nlohmann::json points = nlohmann::json::array();
    auto add_point = [&](const Vec3& t) {
        const Vec3 d = project_to_sphere(t);
        const SphericalAngles a = spherical_map(d);
        const PixelCoord p = angles_to_pixel(a.theta, a.phi, height, width);
        points.push_back({{"camera_point", vec_json(t)},
                          {"direction", vec_json(d)},
                          {"theta", a.theta},
                          {"phi", a.phi},
                          {"row", p.row},
                          {"col", p.col}});
    };
    // Axes, the seam behind the camera and points just either side of it.
    for (const Vec3& t : {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 0, -1), Vec3(0, -1, 0),
                          Vec3(0, 1, 0), Vec3(1e-3, 0, -1), Vec3(-1e-3, 0, -1), Vec3(2, -1, 3)})
        add_point(t);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < random_count; ++i) {
        Vec3 t(u(rng), u(rng), u(rng));
        if (t.norm() < 0.05) t += Vec3(0, 0, 0.5);
        add_point(4.0 * t);
    }

    return {{"convention",
             {{"camera_axes", "x right, y down, z forward"},
              {"theta", "latitude, positive above the horizon"},
              {"phi", "longitude in (-pi, pi], zero at +z, increasing towards +x"},
              {"pixel_center", "integer pixel (i, j) has its center at (i + 0.5, j + 0.5)"},
              {"pose", "t = R(q) x + translation maps world to camera, q = (w, x, y, z)"}}},
            {"height", height},
            {"width", width},
            {"pi", pi},
            {"pixels", pixels},
            {"points", points}};
}

} // namespace panosplat
