#include "panosplat/density.hpp"

#include "panosplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace panosplat {

void DensityStats::reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    views.assign(n, 0);
}

void DensityStats::add(const BackwardResult& back) {
    if (back.tangent_grad_norm.size() != grad_sum.size()) {
        throw ShapeMismatchError("density stats: gradient count differs from tracked Gaussians");
    }
    for (std::size_t i = 0; i < grad_sum.size(); ++i) {
        if (back.touched_pixels[i] == 0) continue;
        grad_sum[i] += back.tangent_grad_norm[i];
        ++views[i];
    }
}

namespace {

Vec3 project_to_plane(const Vec3& p, const LayoutAnchor& a) {
    const Vec3 n = a.n.normalized();
    return p - n * n.dot(p - a.u0);
}

} // namespace

std::vector<std::int64_t> prune_gaussians(GaussianScene& scene, std::vector<LayoutAnchor>& anchors,
                                          const std::vector<bool>& keep) {
    if (keep.size() != scene.size()) throw ShapeMismatchError("prune mask size differs from scene");
    std::vector<std::int64_t> new_index(scene.size(), -1);
    std::vector<std::int64_t> source;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        new_index[i] = static_cast<std::int64_t>(source.size());
        source.push_back(static_cast<std::int64_t>(i));
    }
    scene.filter(keep);
    std::vector<LayoutAnchor> kept;
    kept.reserve(anchors.size());
    for (auto a : anchors) {
        if (a.gaussian_index >= new_index.size() || new_index[a.gaussian_index] < 0) continue;
        a.gaussian_index = static_cast<std::size_t>(new_index[a.gaussian_index]);
        kept.push_back(a);
    }
    anchors = std::move(kept);
    return source;
}

DensifyReport densify_and_prune(GaussianScene& scene, std::vector<LayoutAnchor>& anchors,
                                const DensityStats& stats, const DensifyOptions& opt,
                                std::mt19937_64& rng) {
    const std::size_t n = scene.size();
    if (stats.grad_sum.size() != n) throw ShapeMismatchError("density stats do not match the scene");

    // Candidates in descending gradient order, so a Gaussian budget keeps the strongest.
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < n; ++i) {
        if (stats.views[i] > 0 && stats.mean(i) >= opt.grad_threshold) cand.push_back(i);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return stats.mean(a) > stats.mean(b); });

    const double split_limit = opt.split_fraction * opt.scene_extent;
    std::vector<char> clone(n, 0), split(n, 0);
    std::size_t budget = opt.max_gaussians > n ? opt.max_gaussians - n : 0;
    for (std::size_t i : cand) {
        const bool large = scene.log_scale(i).maxCoeff() > std::log(split_limit);
        const std::size_t extra = large ? static_cast<std::size_t>(opt.split_children - 1) : 1;
        if (extra > budget) continue;
        budget -= extra;
        (large ? split : clone)[i] = 1;
    }

    std::vector<std::vector<std::size_t>> anchors_of(n);
    for (std::size_t k = 0; k < anchors.size(); ++k) {
        if (anchors[k].gaussian_index >= n) throw InvalidParameterError("anchor refers to a missing Gaussian");
        anchors_of[anchors[k].gaussian_index].push_back(k);
    }

    DensifyReport report;
    GaussianScene next(scene.sh_degree);
    std::vector<LayoutAnchor> next_anchors;
    std::vector<std::int64_t> source;
    auto emit = [&](const Gaussian3D& g, std::size_t from, bool kept) {
        const std::size_t idx = next.size();
        next.push_back(g);
        source.push_back(kept ? static_cast<std::int64_t>(from) : -1);
        for (std::size_t k : anchors_of[from]) {
            LayoutAnchor a = anchors[k];
            a.gaussian_index = idx;
            if (!kept) a.u0 = project_to_plane(g.position, anchors[k]);
            next_anchors.push_back(a);
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        if (!split[i]) emit(scene.get(i), i, true);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (clone[i]) {
            emit(scene.get(i), i, false);
            ++report.cloned;
        }
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!split[i]) continue;
        ++report.split;
        const Gaussian3D parent = scene.get(i);
        const Mat3 rot = quaternion_to_rotation(parent.rotation);
        const Vec3 s = parent.scale();
        for (int c = 0; c < opt.split_children; ++c) {
            Gaussian3D child = parent;
            const Vec3 z(normal(rng), normal(rng), normal(rng));
            child.position = parent.position + rot * s.cwiseProduct(z);
            child.log_scale = (s / opt.split_scale_divisor).array().log();
            emit(child, i, false);
        }
    }

    std::vector<bool> keep(next.size());
    for (std::size_t i = 0; i < next.size(); ++i) keep[i] = sigmoid(next.opacity_logits[i]) >= opt.min_opacity;
    report.pruned = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), false));
    const auto survivors = prune_gaussians(next, next_anchors, keep);
    report.source.reserve(survivors.size());
    for (std::int64_t k : survivors) report.source.push_back(source[static_cast<std::size_t>(k)]);

    scene = std::move(next);
    anchors = std::move(next_anchors);
    return report;
}

} // namespace panosplat
