// Acceptance runner: one pass/fail line per criterion, nonzero exit if any fails.
// Usage: panosplat_acceptance [--only 1,5,...]

#include "panosplat/checkpoint.hpp"
#include "panosplat/pipeline.hpp"
#include "panosplat/service.hpp"
#include "panosplat/synthetic.hpp"
#include "panosplat/trainer.hpp"

#include "gradcheck.hpp"
#include "naive_renderer.hpp"
#include "scenes.hpp"
#include "temp_dir.hpp"

#include <fmt/core.h>
#include <tbb/info.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>

using namespace panosplat;
using namespace panosplat::testing;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 -------------------------------------------------------------------------------------------

Outcome jacobian_check() {
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    int configs = 0;
    while (configs < 1000) {
        const Vec3 t = random_unit(rng) * uniform(rng, 0.1, 20.0);
        // Half the configurations linearize at the Gaussian's own direction, as the renderer does.
        const Vec3 mu = configs % 2 == 0 ? t.normalized() : (t.normalized() + 0.8 * random_unit(rng)).normalized();
        if (mu.dot(t.normalized()) < 0.3) continue;
        const Mat3 j = tangent_jacobian(t, mu);
        const double h = 1e-6 * t.norm();
        Mat3 fd;
        for (int k = 0; k < 3; ++k) {
            Vec3 tp = t, tm = t;
            tp[k] += h;
            tm[k] -= h;
            fd.col(k) = (tangent_project(tp, mu) - tangent_project(tm, mu)) / (2.0 * h);
        }
        worst = std::max(worst, (j - fd).norm() / j.norm());
        ++configs;
    }
    return {worst < 1e-5, fmt::format("max relative error {:.2e} over {} configurations (tol 1e-5)", worst, configs)};
}

// 2 -------------------------------------------------------------------------------------------

Outcome rasterizer_oracle() {
    std::mt19937_64 rng(2002);
    double worst = 0.0;
    int wrapping = 0;
    for (int trial = 0; trial < 50; ++trial) {
        RandomSceneOptions o;
        o.count = 1 + static_cast<int>(rng() % 100);
        o.sh_degree = trial % 4;
        o.min_distance = 0.5;
        o.max_distance = 6.0;
        o.min_scale = 0.02;
        o.max_scale = 0.8;
        o.max_opacity_logit = 5.0;
        const GaussianScene scene = random_scene(rng, o);
        const PanoramaCamera cam = PanoramaCamera::from_pose(
            random_quaternion(rng), Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)), 64,
            128);
        RenderSettings rs;
        rs.background = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
        rs.tile_size = trial % 3 == 0 ? 8 : 16;
        for (const auto& s : splat_all(scene, cam, rs)) wrapping += s.pixel_bbox.wraps(cam.width) ? 1 : 0;
        worst = std::max(worst, max_abs_diff(render(scene, cam, rs).color, naive_render(scene, cam, rs)));
    }
    return {worst <= 1e-6, fmt::format("max |tiled - naive| {:.2e} per channel on 50 scenes, {} seam-wrapping "
                                       "footprints (tol 1e-6)",
                                       worst, wrapping)};
}

// 3 -------------------------------------------------------------------------------------------

Outcome seam_equivariance() {
    std::mt19937_64 rng(3003);
    const int h = 64, w = 128;
    double worst = 0.0;
    int straddling = 0, checks = 0;
    for (int trial = 0; trial < 10; ++trial) {
        RandomSceneOptions o;
        o.count = 60;
        o.sh_degree = trial % 4;
        o.max_opacity_logit = 3.0;
        GaussianScene scene = random_scene(rng, o);
        const PanoramaCamera cam = PanoramaCamera::from_pose(
            random_quaternion(rng), Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2)), h, w);
        // Gaussians centred just either side of phi = +-pi.
        for (int k = 0; k < 8; ++k) {
            Gaussian3D g = scene.get(static_cast<std::size_t>(k));
            const double lat = uniform(rng, -1.0, 1.0);
            const double lon = kPi + uniform(rng, -0.08, 0.08);
            g.position = cam.to_world(angles_to_direction(lat, lon) * uniform(rng, 1.0, 4.0));
            g.log_scale = Vec3::Constant(std::log(uniform(rng, 0.1, 0.4)));
            scene.push_back(g);
        }
        for (const auto& s : splat_all(scene, cam)) straddling += s.pixel_bbox.wraps(w) ? 1 : 0;
        const Image base = render(scene, cam).color;
        for (int k : {1, 3, w / 4, w / 2, w - 1, 1 + static_cast<int>(rng() % (w - 1))}) {
            PanoramaCamera turned = cam;
            const Mat3 yaw = yaw_rotation(2.0 * kPi * k / w);
            turned.rotation = yaw * cam.rotation;
            turned.translation = yaw * cam.translation; // same camera center
            worst = std::max(worst, max_abs_diff(render(scene, turned).color, roll_columns(base, k)));
            ++checks;
        }
    }
    const bool pass = worst <= 1e-5 && straddling > 0;
    return {pass, fmt::format("max |render(yaw k) - roll(render, k)| {:.2e} over {} rotations, {} seam-straddling "
                              "footprints (tol 1e-5)",
                              worst, checks, straddling)};
}

// 4 -------------------------------------------------------------------------------------------

Outcome end_to_end_gradient() {
    std::mt19937_64 rng(4004);
    const LossWeights weights{0.8, 0.2, 0.1};
    double worst = 0.0;
    std::size_t checked = 0;
    std::string worst_param;
    for (int degree : {0, 1, 3}) {
        RandomSceneOptions o;
        o.count = 5;
        o.sh_degree = degree;
        o.min_distance = 1.5;
        o.max_distance = 3.0;
        o.min_scale = 0.15;
        o.max_scale = 0.6;
        o.max_opacity_logit = 1.5;
        const GaussianScene scene = random_scene(rng, o);
        std::vector<LayoutAnchor> anchors;
        for (std::size_t i = 0; i < 3; ++i) {
            const Vec3 n = random_unit(rng);
            anchors.push_back({i, Vec3(scene.position(i)) + 0.05 * random_unit(rng), n});
        }
        const PanoramaCamera cam = PanoramaCamera::at(Vec3::Zero(), 32, 64);
        Image target(32, 64, 3);
        for (double& v : target.data) v = uniform(rng, 0.0, 1.0);
        RenderSettings rs;
        rs.cutoff_sigma = 8.0; // no pixel crosses the footprint edge under a finite-difference step

        ForwardState st;
        const Image img = render(scene, cam, rs, &st).color;
        Image grad_image;
        GaussianScene grads = scene.zeros_like();
        total_loss(img, target, scene, anchors, weights, {}, &grad_image, &grads);
        const BackwardResult back = render_backward(scene, st, grad_image);
        for (ParamGroup g : kAllParamGroups) {
            auto dst = grads.group(g);
            const auto src = back.grads.group(g);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
        const GradCheckReport rep = check_gradients(scene, grads, [&](const GaussianScene& s) {
            return total_loss(render(s, cam, rs).color, target, s, anchors, weights).total;
        });
        checked += rep.checked;
        if (rep.max_rel_error > worst) {
            worst = rep.max_rel_error;
            worst_param = rep.worst;
        }
    }
    return {worst < 1e-3 && checked > 0,
            fmt::format("max relative error {:.2e} over {} parameters with |grad| > 1e-6 (tol 1e-3; worst {})", worst,
                        checked, worst_param)};
}

// 5 -------------------------------------------------------------------------------------------

Outcome synthetic_overfit() {
    const int h = 128, w = 256, iterations = 1000;
    const BoxRoom room;
    const auto inputs = make_box_inputs(room, default_box_centers(), h, w, 2);
    std::vector<TrainView> views;
    for (std::size_t i = 0; i < inputs.size(); ++i) views.push_back({"v" + std::to_string(i), inputs[i].camera, inputs[i].rgb});

    PipelineOptions po;
    po.layout_density = 150.0;
    po.voxel = 0.08;
    const InitCloud ic = build_init_cloud(inputs, po);
    InitResult init = init_from_cloud(ic.cloud);
    TrainState state = make_train_state(std::move(init.scene), std::move(init.anchors));
    TrainConfig cfg;
    cfg.iterations = iterations;
    cfg.psnr_interval = 0;
    train(state, views, cfg);

    double min_train = 1e9, sum_train = 0.0;
    for (const auto& v : views) {
        const double p = psnr(render(state.scene, v.camera, cfg.render).color, v.image);
        min_train = std::min(min_train, p);
        sum_train += p;
    }
    const PanoramaCamera novel = PanoramaCamera::at(Vec3::Zero(), h, w);
    const double novel_psnr = psnr(render(state.scene, novel, cfg.render).color, render_box_room(room, novel, 2).color);
    return {min_train >= 30.0 && novel_psnr >= 22.0,
            fmt::format("training views min {:.2f} / mean {:.2f} dB (need >= 30), novel mid-room {:.2f} dB (need >= 22); "
                        "{} iterations, {} Gaussians",
                        min_train, sum_train / views.size(), novel_psnr, iterations, state.scene.size())};
}

// 6 -------------------------------------------------------------------------------------------

double mean_out_of_plane(const TrainState& st) {
    double sum = 0.0;
    for (const auto& a : st.anchors) sum += std::abs(a.n.dot(Vec3(st.scene.position(a.gaussian_index)) - a.u0));
    return st.anchors.empty() ? 0.0 : sum / static_cast<double>(st.anchors.size());
}

Outcome layout_regularization() {
    const int h = 64, w = 128;
    const BoxRoom room;
    // Targets come from a room whose walls sit 15 cm further out than the layout prior says.
    BoxRoom dilated = room;
    for (int axis : {0, 2}) {
        dilated.lo[axis] -= 0.15;
        dilated.hi[axis] += 0.15;
    }
    const auto inputs = make_box_inputs(room, default_box_centers(), h, w, 2);
    std::vector<TrainView> views;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        views.push_back({"v" + std::to_string(i), inputs[i].camera, render_box_room(dilated, inputs[i].camera, 2).color});

    PipelineOptions po;
    po.layout_density = 100.0;
    po.voxel = 0.08;
    const InitResult init = init_from_cloud(build_init_cloud(inputs, po).cloud);

    double disp[2] = {0.0, 0.0};
    std::size_t anchors[2] = {0, 0};
    const double lambdas[2] = {0.0, 0.1};
    for (int k = 0; k < 2; ++k) {
        TrainState st = make_train_state(init.scene, init.anchors);
        TrainConfig cfg;
        cfg.iterations = 1000;
        cfg.psnr_interval = 0;
        cfg.weights.layout = lambdas[k];
        train(st, views, cfg);
        disp[k] = mean_out_of_plane(st);
        anchors[k] = st.anchors.size();
    }
    const double reduction = disp[0] > 0.0 ? 1.0 - disp[1] / disp[0] : 0.0;
    return {disp[0] > 0.0 && reduction >= 0.5,
            fmt::format("mean |n.(mu - u0)|: {:.3e} m with lambda3 = 0 ({} anchors), {:.3e} m with lambda3 = 0.1 "
                        "({} anchors); reduction {:.1f}% (need >= 50%)",
                        disp[0], anchors[0], disp[1], anchors[1], 100.0 * reduction)};
}

// 7 -------------------------------------------------------------------------------------------

/// Horizontal distance from `c` to the box walls along world direction (dx, dz).
double wall_distance(const BoxRoom& room, const Vec3& c, double dx, double dz) {
    double t = std::numeric_limits<double>::infinity();
    if (dx > 0) t = std::min(t, (room.hi.x() - c.x()) / dx);
    if (dx < 0) t = std::min(t, (room.lo.x() - c.x()) / dx);
    if (dz > 0) t = std::min(t, (room.hi.z() - c.z()) / dz);
    if (dz < 0) t = std::min(t, (room.lo.z() - c.z()) / dz);
    return t;
}

/// Horizontal distance from `c` to the polygon boundary along (dx, dz), by ray-segment intersection.
double polygon_distance(const std::vector<Vec2>& poly, const Vec3& c, double dx, double dz) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 a = poly[i], b = poly[(i + 1) % poly.size()];
        const Vec2 e = b - a, o(c.x() - a.x(), c.z() - a.y());
        const double den = dx * e.y() - dz * e.x();
        if (std::abs(den) < 1e-15) continue;
        const double t = (e.x() * o.y() - e.y() * o.x()) / den;
        const double s = (dx * o.y() - dz * o.x()) / den;
        if (t > 0 && s >= -1e-12 && s <= 1 + 1e-12) best = std::min(best, t);
    }
    return best;
}

Outcome layout_exactness() {
    const BoxRoom room;
    const int h = 256, w = 512;
    double plane_err = 0.0, reproj_err = 0.0;
    std::size_t samples = 0;
    int cameras = 0;
    for (const Vec3& c : {Vec3(0, 0, 0), Vec3(-1.0, 0.0, -0.7), Vec3(1.3, 0.2, 0.9), Vec3(0.4, -0.3, -1.1)}) {
        for (double yaw : {0.0, 0.7, -2.1}) {
            PanoramaCamera cam = PanoramaCamera::at(c, h, w);
            cam.rotation = yaw_rotation(yaw);
            cam.translation = -(cam.rotation * c);
            ++cameras;

            // Analytic boundary: each column's ray hits the box walls at a closed-form distance.
            LayoutBoundary b;
            b.camera_height = room.hi.y() - c.y();
            for (int col = 0; col < w; ++col) {
                const double phi = pixel_to_angles(0.0, col + 0.5, h, w).phi;
                const Vec3 d = cam.rotation.transpose() * Vec3(std::sin(phi), 0.0, std::cos(phi));
                const double r = wall_distance(room, c, d.x(), d.z());
                b.floor_lat.push_back(-std::atan2(room.hi.y() - c.y(), r));
                b.ceil_lat.push_back(std::atan2(c.y() - room.lo.y(), r));
            }

            const RoomLayout3D lifted = lift_boundary(b, cam);
            for (int col = 0; col < w; ++col) {
                const double phi = pixel_to_angles(0.0, col + 0.5, h, w).phi;
                const Vec3 d = cam.rotation.transpose() * Vec3(std::sin(phi), 0.0, std::cos(phi));
                const double r = polygon_distance(lifted.floor_polygon, c, d.x(), d.z());
                const double f = -std::atan2(lifted.floor_y - c.y(), r);
                const double u = std::atan2(c.y() - lifted.ceil_y, r);
                const auto k = static_cast<std::size_t>(col);
                reproj_err = std::max({reproj_err, std::abs(f - b.floor_lat[k]), std::abs(u - b.ceil_lat[k])});
            }

            const PointCloud cloud = sample_layout(lifted, 50.0, 7);
            for (const Vec3& p : cloud.points) {
                double e = std::numeric_limits<double>::infinity();
                for (int axis = 0; axis < 3; ++axis)
                    e = std::min({e, std::abs(p[axis] - room.lo[axis]), std::abs(p[axis] - room.hi[axis])});
                const bool inside = (p.array() >= room.lo.array() - 1e-6).all() && (p.array() <= room.hi.array() + 1e-6).all();
                plane_err = std::max(plane_err, inside ? e : std::numeric_limits<double>::infinity());
            }
            samples += cloud.size();
        }
    }
    return {plane_err <= 1e-6 && reproj_err < 1e-6 && samples > 0,
            fmt::format("max point-to-box-plane distance {:.2e} m over {} samples (tol 1e-6), max boundary "
                        "re-projection error {:.2e} rad (tol 1e-6), {} cameras",
                        plane_err, samples, reproj_err, cameras)};
}

// 8 -------------------------------------------------------------------------------------------

double surface_area(const RoomLayout3D& layout) {
    double perimeter = 0.0;
    const auto& poly = layout.floor_polygon;
    for (std::size_t i = 0; i < poly.size(); ++i) perimeter += (poly[(i + 1) % poly.size()] - poly[i]).norm();
    return 2.0 * layout.area() + perimeter * (layout.floor_y - layout.ceil_y);
}

GaussianScene bench_scene(std::size_t count) {
    // Layout-initialized box room, the way a scene looks before training.
    const BoxRoom room;
    const RoomLayout3D layout = room.layout();
    PointCloud cloud = sample_layout(layout, 1.1 * static_cast<double>(count) / surface_area(layout), 8);
    std::mt19937_64 rng(8008);
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(count, order.size()));
    std::sort(order.begin(), order.end());
    PointCloud picked;
    for (std::size_t i : order) {
        const Vec3& p = cloud.points[i];
        const Vec3 color(0.5 + 0.4 * std::sin(3.0 * p.x()), 0.5 + 0.4 * std::sin(3.0 * p.y()), 0.5 + 0.4 * std::sin(3.0 * p.z()));
        picked.push_back(p, cloud.normals[i], color, PointSource::layout);
    }
    InitOptions io;
    io.sh_degree = 3;
    return init_from_cloud(picked, io).scene;
}

Outcome throughput() {
    TempDir dir;
    const std::string path = dir.file("bench.ply");
    Checkpoint ck;
    ck.state = make_train_state(bench_scene(100000), {});
    ck.start_pose = default_start_pose(ck.state.scene);
    save_checkpoint(path, ck);
    const Checkpoint loaded = load_checkpoint(path);

    RenderRequest req;
    req.quaternion = loaded.start_pose.quaternion;
    req.translation = loaded.start_pose.translation;
    req.height = 512;
    req.width = 1024;
    const PanoramaCamera cam = request_camera(req);
    const RenderSettings rs = loaded.config.render;
    (void)render(loaded.state.scene, cam, rs); // warm-up
    const FrameStats s = bench_render(loaded.state.scene, cam, rs, 10);

    // Throughput against scene size, on subsets of the same room.
    std::vector<double> fps;
    for (std::size_t n : {10000, 50000}) fps.push_back(bench_render(bench_scene(n), cam, rs, 3).fps);
    fps.push_back(s.fps);
    const bool monotone = fps[0] >= fps[1] && fps[1] >= fps[2];

    return {s.fps >= 1.0 && s.frames == 10 && s.p99_ms >= s.median_ms,
            fmt::format("{} Gaussians at 1024x512: mean {:.1f} ms, median {:.1f} ms, p99 {:.1f} ms, {:.2f} FPS (need "
                        ">= 1); FPS at 10k/50k/100k {:.2f}/{:.2f}/{:.2f} ({})",
                        loaded.state.scene.size(), s.mean_ms, s.median_ms, s.p99_ms, s.fps, fps[0], fps[1], fps[2],
                        monotone ? "non-increasing" : "NOT non-increasing")};
}

// 9 -------------------------------------------------------------------------------------------

std::string metrics_log(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& r : rows)
        os << r.iteration << ',' << r.view << ',' << r.loss.total << ',' << r.loss.l1 << ',' << r.loss.dssim << ','
           << r.loss.layout << ',' << r.psnr << ',' << r.gaussians << ',' << r.skipped_gradients << '\n';
    return os.str();
}

Outcome determinism() {
    const int h = 64, w = 128;
    const auto inputs = make_box_inputs(BoxRoom{}, default_box_centers(), h, w, 1);
    std::vector<TrainView> views;
    for (std::size_t i = 0; i < inputs.size(); ++i) views.push_back({"v" + std::to_string(i), inputs[i].camera, inputs[i].rgb});
    PipelineOptions po;
    po.layout_density = 40.0;
    po.voxel = 0.12;
    const InitResult init = init_from_cloud(build_init_cloud(inputs, po).cloud);

    TrainConfig cfg;
    cfg.iterations = 300;
    cfg.seed = 99;
    cfg.psnr_interval = 10;
    cfg.densify_from = 50;
    cfg.densify_interval = 50;
    cfg.sh_increase_interval = 100;
    cfg.render.workers = 2;

    std::string logs[2];
    GaussianScene scenes[2];
    for (int run = 0; run < 2; ++run) {
        TrainState st = make_train_state(init.scene, init.anchors);
        logs[run] = metrics_log(train(st, views, cfg));
        scenes[run] = st.scene;
    }
    bool same_scene = scenes[0].size() == scenes[1].size();
    for (ParamGroup g : kAllParamGroups) {
        if (!same_scene) break;
        const auto a = scenes[0].group(g), b = scenes[1].group(g);
        same_scene = std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    }
    const bool same_log = logs[0] == logs[1];
    return {same_log && same_scene,
            fmt::format("metric logs {} ({} bytes, {} iterations with densification), final scenes {} ({} Gaussians), "
                        "{} render workers requested, machine concurrency {}",
                        same_log ? "bit-identical" : "DIFFER", logs[0].size(), cfg.iterations,
                        same_scene ? "bit-identical" : "DIFFER", scenes[0].size(), cfg.render.workers,
                        tbb::info::default_concurrency())};
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string item;
            while (std::getline(ss, item, ',')) only.insert(std::atoi(item.c_str()));
        } else {
            fmt::print(stderr, "usage: {} [--only 1,2,...]\n", argv[0]);
            return 2;
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "jacobian", 5.0, jacobian_check},
        {2, "rasterizer-oracle", 60.0, rasterizer_oracle},
        {3, "seam-equivariance", 30.0, seam_equivariance},
        {4, "gradient-check", 120.0, end_to_end_gradient},
        {5, "synthetic-overfit", 1800.0, synthetic_overfit},
        {6, "layout-regularization", 3600.0, layout_regularization},
        {7, "layout-exactness", 10.0, layout_exactness},
        {8, "throughput", 300.0, throughput},
        {9, "determinism", 600.0, determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = seconds_since(t0);
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        fmt::print("[{}] {} {}: {}; {:.1f} s (budget {:.0f} s{})\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail, secs,
                   c.budget_s, in_time ? "" : ", EXCEEDED");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
