#include "panosplat/trainer.hpp"

#include "panosplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace panosplat {

namespace {

std::mt19937_64 iteration_rng(std::uint64_t seed, std::int64_t iteration, std::uint32_t stream) {
    const auto it = static_cast<std::uint64_t>(iteration);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(it), static_cast<std::uint32_t>(it >> 32), stream};
    return std::mt19937_64(seq);
}

void add_into(GaussianScene& dst, const GaussianScene& src) {
    for (ParamGroup g : kAllParamGroups) {
        auto d = dst.group(g);
        const auto s = src.group(g);
        for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
    }
}

} // namespace

void TrainConfig::validate() const {
    weights.validate();
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    for (double r : {lr.position, lr.position_final, lr.sh, lr.opacity, lr.scale, lr.rotation}) {
        if (!(r >= 0.0)) throw ConfigError("learning rates must be non-negative");
    }
    if (densify_interval <= 0) throw ConfigError("densify_interval must be positive");
    if (!(densify_until_fraction >= 0.0 && densify_until_fraction <= 1.0)) {
        throw ConfigError("densify_until_fraction must be in [0, 1]");
    }
    if (sh_increase_interval < 0 || psnr_interval < 0 || checkpoint_interval < 0) {
        throw ConfigError("intervals must be non-negative");
    }
    if (ssim.window <= 0 || ssim.window % 2 == 0 || !(ssim.sigma > 0.0)) {
        throw ConfigError("ssim window must be odd and positive with positive sigma");
    }
    if (!(extent >= 0.0)) throw ConfigError("extent must be non-negative");
    if (render.tile_size <= 0 || render.workers < 0) throw ConfigError("render tile size must be positive and workers non-negative");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.epsilon > 0.0)) {
        throw ConfigError("adam betas must be in [0, 1) and epsilon positive");
    }
    if (!(densify.grad_threshold >= 0.0) || !(densify.min_opacity >= 0.0) || densify.split_children < 1 ||
        !(densify.split_scale_divisor > 0.0)) {
        throw ConfigError("invalid densification parameters");
    }
}

TrainState make_train_state(GaussianScene scene, std::vector<LayoutAnchor> anchors, const AdamOptions& adam) {
    TrainState s;
    s.adam = Adam(scene, adam);
    s.scene = std::move(scene);
    s.anchors = std::move(anchors);
    return s;
}

std::size_t pick_view(std::uint64_t seed, std::int64_t iteration, std::size_t view_count) {
    if (view_count == 0) throw InvalidParameterError("no training views");
    auto rng = iteration_rng(seed, iteration, 0);
    return static_cast<std::size_t>(rng() % view_count);
}

double scene_extent(const GaussianScene& scene) {
    if (scene.empty()) return 1.0;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        lo = lo.cwiseMin(Vec3(scene.position(i)));
        hi = hi.cwiseMax(Vec3(scene.position(i)));
    }
    const double e = 0.5 * (hi - lo).norm();
    return e > 0.0 ? e : 1.0;
}

std::vector<MetricsRow> train(TrainState& state, const std::vector<TrainView>& views,
                              const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (views.empty()) throw InvalidParameterError("train: no training views");
    for (const auto& v : views) {
        v.camera.validate();
        if (v.image.height != v.camera.height || v.image.width != v.camera.width || v.image.channels != 3) {
            throw ShapeMismatchError("train: image of view '" + v.id + "' does not match its camera");
        }
    }
    if (state.adam.size() != state.scene.size()) state.adam = Adam(state.scene, cfg.adam);
    if (state.extent <= 0.0) state.extent = cfg.extent > 0.0 ? cfg.extent : scene_extent(state.scene);

    LearningRates lr = cfg.lr;
    lr.position_scale = state.extent;
    DensifyOptions dens = cfg.densify;
    dens.scene_extent = state.extent;
    const auto densify_until = static_cast<std::int64_t>(cfg.densify_until_fraction * cfg.iterations);

    DensityStats stats;
    stats.reset(state.scene.size());
    std::vector<MetricsRow> log;

    for (std::int64_t it = state.iteration; it < cfg.iterations; ++it) {
        const TrainView& view = views[pick_view(cfg.seed, it, views.size())];
        RenderSettings rs = cfg.render;
        rs.active_sh_degree = cfg.sh_increase_interval > 0
                                  ? static_cast<int>(std::min<std::int64_t>(state.scene.sh_degree, it / cfg.sh_increase_interval))
                                  : state.scene.sh_degree;

        ForwardState fs;
        const RenderOutput out = render(state.scene, view.camera, rs, &fs);
        Image grad_image;
        GaussianScene grads = state.scene.zeros_like();
        const LossTerms terms = total_loss(out.color, view.image, state.scene, state.anchors, cfg.weights,
                                           cfg.ssim, &grad_image, &grads);
        if (!std::isfinite(terms.total)) {
            std::ostringstream os;
            os << "non-finite loss at iteration " << it << " on view '" << view.id << "' (l1=" << terms.l1
               << ", dssim=" << terms.dssim << ", layout=" << terms.layout
               << ", gaussians=" << state.scene.size() << ")";
            throw TrainingError(os.str());
        }
        const BackwardResult back = render_backward(state.scene, fs, grad_image);
        add_into(grads, back.grads);
        if (it < densify_until) stats.add(back);

        const StepReport step = state.adam.step(state.scene, grads, lr, lr.position_at(it, cfg.iterations));

        MetricsRow row;
        row.iteration = it;
        row.view = view.id;
        row.loss = terms;
        row.skipped_gradients = step.skipped_nonfinite;
        if (cfg.psnr_interval > 0 && (it % cfg.psnr_interval == 0 || it + 1 == cfg.iterations)) {
            row.psnr = psnr(out.color, view.image);
        }
        state.iteration = it + 1;

        const std::int64_t done = it + 1;
        if (done >= cfg.densify_from && done < densify_until && done % cfg.densify_interval == 0) {
            auto rng = iteration_rng(cfg.seed, it, 1);
            const DensifyReport rep = densify_and_prune(state.scene, state.anchors, stats, dens, rng);
            state.adam.remap(rep.source);
            stats.reset(state.scene.size());
        }
        row.gaussians = state.scene.size();
        if (hooks.on_metrics) hooks.on_metrics(row);
        log.push_back(std::move(row));
        if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0) {
            hooks.on_checkpoint(state);
        }
    }
    return log;
}

} // namespace panosplat
