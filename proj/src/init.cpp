#include "panosplat/init.hpp"

#include "panosplat/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace panosplat {

namespace {

struct KeyHash {
    std::size_t operator()(const std::array<long long, 3>& k) const {
        std::size_t h = 1469598103934665603ULL;
        for (long long v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
        return h;
    }
};

} // namespace

std::vector<double> knn_rms_distance(const std::vector<Vec3>& points, int k) {
    const std::size_t n = points.size();
    std::vector<double> out(n, 0.0);
    if (n < 2 || k < 1) return out;
    Vec3 lo = points[0], hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = (hi - lo).cwiseMax(1e-9);
    // Roughly k points per cell for surface-like clouds.
    const double area = ext.x() * ext.y() + ext.y() * ext.z() + ext.x() * ext.z();
    const double cell = std::max(1e-6, std::sqrt(2.0 * area * (k + 1) / static_cast<double>(n)));
    auto key_of = [&](const Vec3& p) {
        return std::array<long long, 3>{static_cast<long long>(std::floor((p.x() - lo.x()) / cell)),
                                        static_cast<long long>(std::floor((p.y() - lo.y()) / cell)),
                                        static_cast<long long>(std::floor((p.z() - lo.z()) / cell))};
    };
    std::unordered_map<std::array<long long, 3>, std::vector<std::size_t>, KeyHash> grid;
    for (std::size_t i = 0; i < n; ++i) grid[key_of(points[i])].push_back(i);
    const long long max_ring = static_cast<long long>(std::ceil(ext.maxCoeff() / cell)) + 1;

    const auto kk = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(k), n - 1));
    std::vector<double> best;
    for (std::size_t i = 0; i < n; ++i) {
        const auto key = key_of(points[i]);
        best.clear();
        for (long long r = 0; r <= max_ring; ++r) {
            for (long long dx = -r; dx <= r; ++dx) {
                for (long long dy = -r; dy <= r; ++dy) {
                    for (long long dz = -r; dz <= r; ++dz) {
                        if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != r) continue;
                        const auto it = grid.find({key[0] + dx, key[1] + dy, key[2] + dz});
                        if (it == grid.end()) continue;
                        for (std::size_t j : it->second) {
                            if (j == i) continue;
                            best.push_back((points[j] - points[i]).squaredNorm());
                        }
                    }
                }
            }
            if (best.size() >= kk) {
                std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(kk), best.end());
                best.resize(kk);
                // Every unvisited point is at least r * cell away.
                const double reach = static_cast<double>(r) * cell;
                if (best.back() <= reach * reach) break;
            }
        }
        double s = 0.0;
        for (double d : best) s += d;
        out[i] = best.empty() ? 0.0 : std::sqrt(s / static_cast<double>(best.size()));
    }
    return out;
}

InitResult init_from_cloud(const PointCloud& cloud, const InitOptions& opt) {
    cloud.validate();
    if (opt.sh_degree < 0 || opt.sh_degree > kMaxShDegree) throw InvalidParameterError("init: SH degree must be 0..3");
    if (!(opt.opacity > 0.0 && opt.opacity < 1.0)) throw InvalidParameterError("init: opacity must be in (0, 1)");
    InitResult res;
    res.scene = GaussianScene(opt.sh_degree);
    const auto dist = knn_rms_distance(cloud.points, opt.neighbors);
    const double logit_op = logit(opt.opacity);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Gaussian3D g;
        g.position = cloud.points[i];
        g.log_scale = Vec3::Constant(std::log(std::max(dist[i], opt.min_scale)));
        g.opacity_logit = logit_op;
        const Vec3 dc = rgb_to_sh_dc(cloud.colors[i]);
        g.sh = {dc.x(), dc.y(), dc.z()};
        if (cloud.source[i] == PointSource::layout) {
            res.anchors.push_back({res.scene.size(), cloud.points[i], cloud.normals[i].normalized()});
        }
        res.scene.push_back(g);
    }
    return res;
}

} // namespace panosplat
