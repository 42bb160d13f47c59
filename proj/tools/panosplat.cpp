// panosplat: initialize, train, render, evaluate, benchmark and serve panoramic Gaussian scenes.

#include "panosplat/checkpoint.hpp"
#include "panosplat/config.hpp"
#include "panosplat/error.hpp"
#include "panosplat/io.hpp"
#include "panosplat/manifest.hpp"
#include "panosplat/pipeline.hpp"
#include "panosplat/server.hpp"
#include "panosplat/service.hpp"
#include "panosplat/synthetic.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace panosplat;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

/// Query map for a render request from a "qw,qx,qy,qz,tx,ty,tz" pose string.
std::map<std::string, std::string> pose_query(const std::string& pose) {
    const auto parts = split_csv(pose);
    if (parts.size() != 7) throw InvalidParameterError("--pose needs 7 comma-separated values qw,qx,qy,qz,tx,ty,tz");
    static const char* keys[] = {"qw", "qx", "qy", "qz", "tx", "ty", "tz"};
    std::map<std::string, std::string> q;
    for (int i = 0; i < 7; ++i) q[keys[i]] = parts[static_cast<std::size_t>(i)];
    return q;
}

std::map<std::string, std::string> start_pose_query(const StartPose& p) {
    std::map<std::string, std::string> q;
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    q["qw"] = num(p.quaternion[0]);
    q["qx"] = num(p.quaternion[1]);
    q["qy"] = num(p.quaternion[2]);
    q["qz"] = num(p.quaternion[3]);
    q["tx"] = num(p.translation[0]);
    q["ty"] = num(p.translation[1]);
    q["tz"] = num(p.translation[2]);
    return q;
}

RenderSettings checkpoint_settings(const Checkpoint& ck, int workers) {
    RenderSettings s = ck.config.render;
    s.compute_depth = false;
    if (workers >= 0) s.workers = workers;
    return s;
}

StartPose pose_of(const ManifestView& v) { return {v.quaternion, v.translation}; }

// ---------------------------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    int height = 128;
    int samples = 2;
};

int run_synth(const SynthArgs& a) {
    const BoxRoom room;
    std::vector<Vec3> centers = default_box_centers();
    const std::size_t train_count = centers.size();
    centers.push_back(Vec3::Zero());
    const auto inputs = make_box_inputs(room, centers, a.height, 2 * a.height, a.samples);

    for (const char* sub : {"images", "depth", "layouts"}) fs::create_directories(fs::path(a.out) / sub);
    SceneManifest m;
    m.camera_height = inputs.front().layout->camera_height;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::string id = i < train_count ? "train" + std::to_string(i) : "test" + std::to_string(i - train_count);
        ManifestView v;
        v.id = id;
        v.image = (fs::path(a.out) / "images" / (id + ".png")).string();
        v.depth = (fs::path(a.out) / "depth" / (id + ".pfm")).string();
        v.layout = (fs::path(a.out) / "layouts" / (id + ".json")).string();
        v.quaternion = rotation_to_quaternion(inputs[i].camera.rotation);
        v.translation = inputs[i].camera.translation.array() + 0.0; // no negative zeros
        save_png(v.image, inputs[i].rgb);
        save_depth_pfm(*v.depth, *inputs[i].depth);
        save_layout(*v.layout, *inputs[i].layout);
        m.splits[i < train_count ? "train" : "test"].push_back(id);
        m.views.push_back(std::move(v));
    }
    const std::string manifest = (fs::path(a.out) / "manifest.json").string();
    save_manifest(manifest, m);
    spdlog::info("wrote {} views to {}", m.views.size(), manifest);
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct InitArgs {
    std::string manifest;
    std::string out;
    std::string split = "train";
    PipelineOptions pipe;
    bool no_align = false;
};

int run_init(InitArgs a) {
    const SceneManifest m = load_manifest(a.manifest);
    const auto which = m.split(a.split);
    if (which.empty()) throw ValidationError(a.manifest + ": split '" + a.split + "' has no views");
    a.pipe.align_depth = !a.no_align;
    const InitCloud init = build_init_cloud(load_inputs(m, which), a.pipe);
    if (init.cloud.empty()) throw ValidationError(a.manifest + ": initialization produced no points");
    save_point_cloud(a.out, init.cloud);
    std::size_t layout_points = 0;
    for (std::size_t i = 0; i < init.cloud.size(); ++i) layout_points += init.cloud.source[i] == PointSource::layout ? 1 : 0;
    spdlog::info("wrote {} points ({} on the layout) to {}", init.cloud.size(), layout_points, a.out);
    for (std::size_t k = 0; k < init.depth_scales.size(); ++k) spdlog::info("depth scale {}: {:.4f}", k, init.depth_scales[k]);
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string init;
    std::string resume;
    std::string config;
    std::string out;
    std::string metrics;
    std::string split = "train";
    int iterations = -1;
    int stop_after = 0;
    int sh_degree = 3;
    double init_opacity = 0.1;
    int workers = -1;
};

class MetricsCsv {
public:
    MetricsCsv(const std::string& path, bool append) {
        if (path.empty()) return;
        const bool header = !append || !fs::exists(path) || fs::file_size(path) == 0;
        file_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!file_) throw IoError(path + ": cannot open for writing");
        if (header) file_ << "iteration,view,total,l1,dssim,layout,psnr,gaussians\n";
        file_.precision(9);
    }
    void write(const MetricsRow& r) {
        if (!file_.is_open()) return;
        file_ << r.iteration << ',' << r.view << ',' << r.loss.total << ',' << r.loss.l1 << ',' << r.loss.dssim << ','
              << r.loss.layout << ',';
        if (!std::isnan(r.psnr)) file_ << r.psnr;
        file_ << ',' << r.gaussians << '\n';
        if (!std::isnan(r.psnr)) file_.flush();
    }

private:
    std::ofstream file_;
};

int run_train(const TrainArgs& a) {
    if (a.init.empty() == a.resume.empty()) throw InvalidParameterError("give exactly one of --init and --resume");
    const SceneManifest m = load_manifest(a.manifest);
    const auto which = m.split(a.split);
    if (which.empty()) throw ValidationError(a.manifest + ": split '" + a.split + "' has no views");
    const auto views = load_train_views(m, which);

    Checkpoint ck;
    if (!a.resume.empty()) {
        ck = load_checkpoint(a.resume);
        if (!a.config.empty()) ck.config = load_train_config(a.config);
        spdlog::info("resuming {} at iteration {} with {} Gaussians", a.resume, ck.state.iteration,
                     ck.state.scene.size());
    } else {
        if (!a.config.empty()) ck.config = load_train_config(a.config);
        InitOptions io;
        io.sh_degree = a.sh_degree;
        io.opacity = a.init_opacity;
        InitResult init = init_from_cloud(load_point_cloud(a.init), io);
        if (init.scene.empty()) throw ValidationError(a.init + ": point cloud is empty");
        ck.state = make_train_state(std::move(init.scene), std::move(init.anchors), ck.config.adam);
        ck.start_pose = pose_of(m.views[which.front()]);
    }
    if (a.iterations >= 0) ck.config.iterations = a.iterations;
    if (a.workers >= 0) ck.config.render.workers = a.workers;
    ck.config.validate();
    if (a.stop_after > 0 && (ck.config.checkpoint_interval <= 0 || a.stop_after % ck.config.checkpoint_interval != 0))
        throw InvalidParameterError("--stop-after must be a multiple of checkpoint_interval (" +
                                    std::to_string(ck.config.checkpoint_interval) + ")");

    struct Stop {};
    MetricsCsv csv(a.metrics, !a.resume.empty());
    TrainHooks hooks;
    hooks.on_metrics = [&](const MetricsRow& r) {
        csv.write(r);
        if (!std::isnan(r.psnr))
            spdlog::info("iteration {} loss {:.5f} psnr {:.2f} gaussians {}", r.iteration, r.loss.total, r.psnr,
                         r.gaussians);
    };
    hooks.on_checkpoint = [&](const TrainState& s) {
        save_checkpoint(a.out, {s, ck.config, ck.start_pose});
        spdlog::info("checkpoint at iteration {} -> {}", s.iteration, a.out);
        if (a.stop_after > 0 && s.iteration >= a.stop_after) throw Stop{};
    };
    try {
        train(ck.state, views, ck.config, hooks);
    } catch (const Stop&) {
        spdlog::info("stopped after iteration {}; continue with --resume {}", ck.state.iteration, a.out);
        return 0;
    }
    save_checkpoint(a.out, ck);
    spdlog::info("wrote {} ({} Gaussians, iteration {})", a.out, ck.state.scene.size(), ck.state.iteration);
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct RenderArgs {
    std::string checkpoint;
    std::string pose;
    int height = 512;
    int width = 1024;
    std::string out;
    int quality = 90;
    int workers = -1;
};

int run_render(const RenderArgs& a) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    auto q = a.pose.empty() ? start_pose_query(ck.start_pose) : pose_query(a.pose);
    q["h"] = std::to_string(a.height);
    q["w"] = std::to_string(a.width);
    const std::string ext = fs::path(a.out).extension().string();
    if (ext == ".jpg" || ext == ".jpeg") {
        q["format"] = "jpeg";
        q["quality"] = std::to_string(a.quality);
    } else if (ext != ".png") {
        throw InvalidParameterError(a.out + ": output must end in .png, .jpg or .jpeg");
    }
    const RenderRequest req = parse_render_request(q);
    write_file(a.out, render_frame(ck.state.scene, req, checkpoint_settings(ck, a.workers)));
    spdlog::info("wrote {}", a.out);
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
    std::string out;
    int workers = -1;
};

int run_eval(const EvalArgs& a) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const SceneManifest m = load_manifest(a.manifest);
    const auto which = m.split(a.split);
    if (which.empty()) throw ValidationError(a.manifest + ": split '" + a.split + "' has no views");
    const auto views = load_train_views(m, which);
    const RenderSettings settings = checkpoint_settings(ck, a.workers);

    std::ostringstream csv;
    csv.precision(9);
    csv << "view,psnr,ssim\n";
    double sum_psnr = 0.0, sum_ssim = 0.0;
    for (const TrainView& v : views) {
        const Image img = render(ck.state.scene, v.camera, settings).color;
        const double p = psnr(img, v.image);
        const double s = ssim(img, v.image, ck.config.ssim);
        sum_psnr += p;
        sum_ssim += s;
        csv << v.id << ',' << p << ',' << s << '\n';
        spdlog::info("{}: psnr {:.2f} ssim {:.4f}", v.id, p, s);
    }
    const double n = static_cast<double>(views.size());
    csv << "mean," << sum_psnr / n << ',' << sum_ssim / n << '\n';
    if (a.out.empty()) std::cout << csv.str();
    else write_file(a.out, csv.str());
    spdlog::info("mean psnr {:.2f} ssim {:.4f} over {} views", sum_psnr / n, sum_ssim / n, views.size());
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct BenchArgs {
    std::string checkpoint;
    std::string pose;
    int height = 512;
    int width = 1024;
    int frames = 10;
    int warmup = 1;
    int workers = -1;
    bool json = false;
};

int run_bench(const BenchArgs& a) {
    if (a.frames <= 0) throw InvalidParameterError("--frames must be positive");
    if (a.warmup < 0) throw InvalidParameterError("--warmup must be non-negative");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    auto q = a.pose.empty() ? start_pose_query(ck.start_pose) : pose_query(a.pose);
    q["h"] = std::to_string(a.height);
    q["w"] = std::to_string(a.width);
    const PanoramaCamera cam = request_camera(parse_render_request(q));
    const RenderSettings settings = checkpoint_settings(ck, a.workers);
    for (int i = 0; i < a.warmup; ++i) (void)render(ck.state.scene, cam, settings);
    const FrameStats s = bench_render(ck.state.scene, cam, settings, static_cast<std::size_t>(a.frames));
    if (a.json) {
        std::cout << nlohmann::json{{"gaussians", ck.state.scene.size()},
                                    {"height", a.height},
                                    {"width", a.width},
                                    {"frames", s.frames},
                                    {"mean_ms", s.mean_ms},
                                    {"median_ms", s.median_ms},
                                    {"p99_ms", s.p99_ms},
                                    {"fps", s.fps}}
                         .dump(2)
                  << '\n';
    } else {
        std::cout << fmt::format("{} Gaussians, {}x{}, {} frames: mean {:.1f} ms, median {:.1f} ms, p99 {:.1f} ms, "
                                 "{:.2f} FPS\n",
                                 ck.state.scene.size(), a.width, a.height, s.frames, s.mean_ms, s.median_ms, s.p99_ms,
                                 s.fps);
    }
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct ServeArgs {
    std::string checkpoint;
    ServerOptions server;
    int workers = -1;
};

int run_serve(const ServeArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    const RenderSettings settings = checkpoint_settings(ck, a.workers);
    const std::size_t count = ck.state.scene.size();
    SceneServer server(std::move(ck), settings, a.server);
    const int port = server.bind();

    // Signals are taken synchronously by a watcher thread; the server threads inherit the mask.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });

    spdlog::info("serving {} Gaussians on http://{}:{}/", count, a.server.host, port);
    server.listen();
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    spdlog::info("server stopped");
    return 0;
}

// ---------------------------------------------------------------------------------------------

struct FixturesArgs {
    std::string out;
    int height = 8;
    int width = 16;
    std::uint64_t seed = 7;
    int count = 64;
};

int run_fixtures(const FixturesArgs& a) {
    if (a.count < 0) throw InvalidParameterError("--count must be non-negative");
    const std::string text = equirect_test_vectors(a.height, a.width, a.seed, a.count).dump(2) + "\n";
    if (a.out.empty()) std::cout << text;
    else write_file(a.out, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Panoramic 3D Gaussian splatting"};
    app.require_subcommand(1);
    app.fallthrough();
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Write a synthetic box-room dataset with a manifest");
    c_synth->add_option("-o,--out", synth.out, "Output directory")->required();
    c_synth->add_option("--height", synth.height, "Panorama height (width is twice this)")->check(CLI::Range(4, 4096));
    c_synth->add_option("--samples", synth.samples, "Supersampling per axis")->check(CLI::Range(1, 8));

    InitArgs init;
    auto* c_init = app.add_subcommand("init", "Build the initial point cloud from layouts and depths");
    c_init->add_option("manifest", init.manifest, "Scene manifest")->required();
    c_init->add_option("-o,--out", init.out, "Output point cloud (.ply)")->required();
    c_init->add_option("--split", init.split, "Views to use");
    c_init->add_option("--density", init.pipe.layout_density, "Layout samples per square meter")
        ->check(CLI::PositiveNumber);
    c_init->add_option("--voxel", init.pipe.voxel, "Fusion voxel size (m)")->check(CLI::NonNegativeNumber);
    c_init->add_option("--depth-stride", init.pipe.depth_stride, "Depth pixel stride")->check(CLI::PositiveNumber);
    c_init->add_flag("--no-align-depth", init.no_align, "Keep depth maps at their stored scale");
    c_init->add_option("--seed", init.pipe.seed, "Sampling seed");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Optimize a scene; resumes from a checkpoint with --resume");
    c_train->add_option("manifest", tr.manifest, "Scene manifest")->required();
    c_train->add_option("--init", tr.init, "Initial point cloud from `init`");
    c_train->add_option("--resume", tr.resume, "Checkpoint to continue");
    c_train->add_option("-c,--config", tr.config, "Training configuration (JSON)");
    c_train->add_option("-o,--out", tr.out, "Output checkpoint (.ply)")->required();
    c_train->add_option("--metrics", tr.metrics, "Per-iteration metrics CSV");
    c_train->add_option("--split", tr.split, "Training views");
    c_train->add_option("--iterations", tr.iterations, "Override the configured iteration count")
        ->check(CLI::NonNegativeNumber);
    c_train->add_option("--stop-after", tr.stop_after,
                        "Save and exit once this many iterations are complete (a checkpoint_interval multiple)")
        ->check(CLI::PositiveNumber);
    c_train->add_option("--sh-degree", tr.sh_degree, "Spherical-harmonic degree")->check(CLI::Range(0, kMaxShDegree));
    c_train->add_option("--init-opacity", tr.init_opacity, "Initial opacity")->check(CLI::Range(1e-6, 1.0 - 1e-6));
    c_train->add_option("--workers", tr.workers, "Render threads (0 = automatic)")->check(CLI::NonNegativeNumber);

    RenderArgs rd;
    auto* c_render = app.add_subcommand("render", "Render a panorama from a checkpoint");
    c_render->add_option("checkpoint", rd.checkpoint, "Checkpoint (.ply)")->required();
    c_render->add_option("--pose", rd.pose, "qw,qx,qy,qz,tx,ty,tz world-to-camera (default: suggested start pose)");
    c_render->add_option("--height", rd.height, "Output height");
    c_render->add_option("--width", rd.width, "Output width (twice the height)");
    c_render->add_option("-o,--out", rd.out, "Output image (.png, .jpg)")->required();
    c_render->add_option("--quality", rd.quality, "JPEG quality")->check(CLI::Range(1, 100));
    c_render->add_option("--workers", rd.workers, "Render threads (0 = automatic)")->check(CLI::NonNegativeNumber);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "PSNR and SSIM of a checkpoint on a manifest split");
    c_eval->add_option("checkpoint", ev.checkpoint, "Checkpoint (.ply)")->required();
    c_eval->add_option("manifest", ev.manifest, "Scene manifest")->required();
    c_eval->add_option("--split", ev.split, "Split to evaluate");
    c_eval->add_option("-o,--out", ev.out, "Output CSV (default: stdout)");
    c_eval->add_option("--workers", ev.workers, "Render threads (0 = automatic)")->check(CLI::NonNegativeNumber);

    BenchArgs bn;
    auto* c_bench = app.add_subcommand("bench", "Time repeated renders");
    c_bench->add_option("checkpoint", bn.checkpoint, "Checkpoint (.ply)")->required();
    c_bench->add_option("--pose", bn.pose, "qw,qx,qy,qz,tx,ty,tz (default: suggested start pose)");
    c_bench->add_option("--height", bn.height, "Frame height");
    c_bench->add_option("--width", bn.width, "Frame width");
    c_bench->add_option("-n,--frames", bn.frames, "Timed frames");
    c_bench->add_option("--warmup", bn.warmup, "Untimed frames first");
    c_bench->add_option("--workers", bn.workers, "Render threads (0 = automatic)")->check(CLI::NonNegativeNumber);
    c_bench->add_flag("--json", bn.json, "Print JSON");

    ServeArgs sv;
    auto* c_serve = app.add_subcommand("serve", "HTTP render service and static file server");
    c_serve->add_option("checkpoint", sv.checkpoint, "Checkpoint (.ply)")->required();
    c_serve->add_option("--host", sv.server.host, "Bind address");
    c_serve->add_option("-p,--port", sv.server.port, "Port (0 = any free port)")->check(CLI::Range(0, 65535));
    c_serve->add_option("--web-root", sv.server.web_root, "Directory of static files served at /");
    c_serve->add_option("--threads", sv.server.threads, "Connection threads")->check(CLI::PositiveNumber);
    c_serve->add_option("--workers", sv.workers, "Render threads per request (0 = automatic)")
        ->check(CLI::NonNegativeNumber);

    FixturesArgs fx;
    auto* c_fix = app.add_subcommand("fixtures", "Write equirectangular convention test vectors (JSON)");
    c_fix->add_option("-o,--out", fx.out, "Output file (default: stdout)");
    c_fix->add_option("--height", fx.height, "Panorama height");
    c_fix->add_option("--width", fx.width, "Panorama width");
    c_fix->add_option("--seed", fx.seed, "Seed for the random points");
    c_fix->add_option("--count", fx.count, "Random points");

    CLI11_PARSE(app, argc, argv);

    auto logger = spdlog::stderr_color_mt("panosplat");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (c_synth->parsed()) return run_synth(synth);
        if (c_init->parsed()) return run_init(init);
        if (c_train->parsed()) return run_train(tr);
        if (c_render->parsed()) return run_render(rd);
        if (c_eval->parsed()) return run_eval(ev);
        if (c_bench->parsed()) return run_bench(bn);
        if (c_serve->parsed()) return run_serve(sv);
        if (c_fix->parsed()) return run_fixtures(fx);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "panosplat: error: " << msg << '\n';
        return 1;
    }
    return 1;
}
