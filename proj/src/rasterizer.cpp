#include "panosplat/rasterizer.hpp"

#include "panosplat/error.hpp"
#include "panosplat/parallel.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace panosplat {

namespace {

constexpr double kPi = std::numbers::pi;

/// Compact per-splat record touched by the per-pixel loops.
struct Prim {
    Vec3 mu;
    Vec3 bu;
    Vec3 bv;
    double a, b, c;
    double opacity;
    Vec3 color;
    double depth;
    PixelRect rect;
};

/// Per-pixel view directions, separable into row and column factors.
struct DirectionTable {
    std::vector<double> cos_theta, sin_theta, sin_phi, cos_phi;

    DirectionTable(int h, int w) : cos_theta(h), sin_theta(h), sin_phi(w), cos_phi(w) {
        for (int r = 0; r < h; ++r) {
            const auto a = pixel_to_angles(r + 0.5, 0.0, h, w);
            cos_theta[r] = std::cos(a.theta);
            sin_theta[r] = std::sin(a.theta);
        }
        for (int c = 0; c < w; ++c) {
            const auto a = pixel_to_angles(0.0, c + 0.5, h, w);
            sin_phi[c] = std::sin(a.phi);
            cos_phi[c] = std::cos(a.phi);
        }
    }
    [[nodiscard]] Vec3 at(int r, int c) const {
        return {cos_theta[r] * sin_phi[c], -sin_theta[r], cos_theta[r] * cos_phi[c]};
    }
};

PixelRect footprint_rect(const Vec3& mu_prime, double tangent_radius, int h, int w) {
    const double gamma = std::atan(tangent_radius);
    const auto ang = spherical_map(mu_prime);
    const double theta_pole = kPi / 2.0 - 4.0 * kPi / h;

    PixelRect rect;
    const double r_top = -(ang.theta + gamma) * h / kPi + h / 2.0;
    const double r_bot = -(ang.theta - gamma) * h / kPi + h / 2.0;
    rect.row_min = std::clamp(static_cast<int>(std::ceil(r_top - 0.5)) - 1, 0, h - 1);
    rect.row_max = std::clamp(static_cast<int>(std::floor(r_bot - 0.5)) + 1, 0, h - 1);

    const bool full = gamma >= kPi / 2.0 || std::abs(ang.theta) > theta_pole ||
                      std::abs(ang.theta) + gamma >= kPi / 2.0;
    if (full) {
        rect.col_start = 0;
        rect.col_count = w;
        return rect;
    }
    const double dphi = std::asin(std::min(1.0, std::sin(gamma) / std::cos(ang.theta)));
    const double c_lo = (ang.phi - dphi) * w / (2.0 * kPi) + w / 2.0;
    const double c_hi = (ang.phi + dphi) * w / (2.0 * kPi) + w / 2.0;
    const int j_lo = static_cast<int>(std::ceil(c_lo - 0.5)) - 1;
    const int j_hi = static_cast<int>(std::floor(c_hi - 0.5)) + 1;
    const int count = j_hi - j_lo + 1;
    if (count >= w) {
        rect.col_start = 0;
        rect.col_count = w;
    } else {
        rect.col_start = ((j_lo % w) + w) % w;
        rect.col_count = count;
    }
    return rect;
}

std::optional<SplattedGaussian> splat_one(const GaussianScene& scene, std::size_t i,
                                          const PanoramaCamera& cam, const Vec3& cam_center,
                                          int degree, double floor, double cutoff) {
    const Vec3 mu = scene.position(i);
    const Vec3 t = cam.to_camera(mu);
    const auto mp = try_project_to_sphere(t);
    if (!mp) return std::nullopt;
    const double rho = t.norm();
    if (!(mp->dot(t) > kFrontEpsilon)) return std::nullopt;

    SplattedGaussian s;
    s.gaussian_index = static_cast<std::uint32_t>(i);
    s.t_cam = t;
    s.depth = rho;
    s.frame = make_tangent_frame(*mp);
    s.pole_fallback = Vec3(-mp->z(), 0.0, mp->x()).norm() < kPoleBasisEpsilon;

    const Mat3 sigma = build_covariance(scene.log_scale(i).array().exp(), scene.rotation(i));
    s.cov2d = splat_covariance(sigma, cam.rotation, tangent_jacobian(t, *mp), s.frame, floor);
    const double a = s.cov2d(0, 0), b = s.cov2d(0, 1), c = s.cov2d(1, 1);
    const double det = a * c - b * b;
    if (!(det > 0.0)) return std::nullopt;
    s.conic_a = c / det;
    s.conic_b = -b / det;
    s.conic_c = a / det;
    const double lambda_max = 0.5 * (a + c) + std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    s.pixel_bbox = footprint_rect(*mp, cutoff * std::sqrt(lambda_max), cam.height, cam.width);

    s.opacity = sigmoid(scene.opacity_logits[i]);
    const Vec3 dir = (mu - cam_center).normalized();
    const Vec3 raw = eval_sh(degree, scene.sh_of(i), dir);
    for (int ch = 0; ch < 3; ++ch) {
        s.color_clamped[ch] = raw[ch] < 0.0 || raw[ch] > 1.0;
        s.color[ch] = std::clamp(raw[ch], 0.0, 1.0);
    }
    return s;
}

int resolve_degree(const GaussianScene& scene, const RenderSettings& settings) {
    if (settings.active_sh_degree < 0) return scene.sh_degree;
    return std::min(settings.active_sh_degree, scene.sh_degree);
}

template <typename Fn>
void for_each_tile(const SplattedGaussian& s, const TileGrid& grid, int width,
                   std::vector<char>& col_mask, Fn&& fn) {
    const int ts = grid.tile_size;
    std::fill(col_mask.begin(), col_mask.end(), 0);
    const PixelRect& r = s.pixel_bbox;
    if (r.col_count <= 0 || r.row_max < r.row_min) return;
    auto mark = [&](int lo, int hi) { // columns [lo, hi)
        if (hi <= lo) return;
        for (int tx = lo / ts; tx <= (hi - 1) / ts; ++tx) col_mask[static_cast<std::size_t>(tx)] = 1;
    };
    const int end = r.col_start + r.col_count;
    mark(r.col_start, std::min(end, width));
    if (end > width) mark(0, end - width);
    for (int ty = r.row_min / ts; ty <= r.row_max / ts; ++ty) {
        for (int tx = 0; tx < grid.tiles_x; ++tx) {
            if (col_mask[static_cast<std::size_t>(tx)]) fn(static_cast<std::size_t>(ty) * grid.tiles_x + tx);
        }
    }
}

std::vector<Prim> make_prims(const std::vector<SplattedGaussian>& splats) {
    std::vector<Prim> prims(splats.size());
    for (std::size_t k = 0; k < splats.size(); ++k) {
        const auto& s = splats[k];
        prims[k] = Prim{s.frame.mu_prime, s.frame.basis_u, s.frame.basis_v, s.conic_a, s.conic_b,
                        s.conic_c, s.opacity, s.color, s.depth, s.pixel_bbox};
    }
    return prims;
}

struct TileBounds {
    int r0, r1, c0, c1; // half-open
};

TileBounds tile_bounds(const TileGrid& grid, std::size_t t, int h, int w) {
    const int ty = static_cast<int>(t / static_cast<std::size_t>(grid.tiles_x));
    const int tx = static_cast<int>(t % static_cast<std::size_t>(grid.tiles_x));
    const int ts = grid.tile_size;
    return {ty * ts, std::min(h, (ty + 1) * ts), tx * ts, std::min(w, (tx + 1) * ts)};
}

/// Copies a tile's depth-ordered prims and buckets their positions by the tile rows they cover.
void gather_tile(std::span<const TileEntry> entries, const std::vector<Prim>& prims, const TileBounds& tb,
                 std::vector<Prim>& local, std::vector<std::vector<std::uint32_t>>& rows) {
    local.clear();
    rows.resize(static_cast<std::size_t>(tb.r1 - tb.r0));
    for (auto& row : rows) row.clear();
    for (const auto& e : entries) {
        const Prim& p = prims[e.splat];
        const int lo = std::max(tb.r0, p.rect.row_min), hi = std::min(tb.r1 - 1, p.rect.row_max);
        for (int r = lo; r <= hi; ++r) {
            rows[static_cast<std::size_t>(r - tb.r0)].push_back(static_cast<std::uint32_t>(local.size()));
        }
        local.push_back(p);
    }
}

/// Per-entry reverse-pass accumulator slots.
enum Acc : int {
    kQ00 = 0, kQ01, kQ11,
    kMuX, kMuY, kMuZ,
    kBuX, kBuY, kBuZ,
    kBvX, kBvY, kBvZ,
    kOpacity,
    kColR, kColG, kColB,
    kXu, kXv,
    kAccCount
};

} // namespace

TileGrid TileGrid::for_image(int height, int width, int tile_size) {
    if (tile_size <= 0) throw InvalidParameterError("tile size must be positive");
    TileGrid g;
    g.tile_size = tile_size;
    g.tiles_x = (width + tile_size - 1) / tile_size;
    g.tiles_y = (height + tile_size - 1) / tile_size;
    g.offsets.assign(g.tile_count() + 1, 0);
    return g;
}

std::vector<SplattedGaussian> splat_all(const GaussianScene& scene, const PanoramaCamera& cam,
                                        const RenderSettings& settings) {
    cam.validate();
    const int degree = resolve_degree(scene, settings);
    const double floor = lowpass_floor(cam.height);
    const Vec3 center = cam.center();
    std::vector<std::optional<SplattedGaussian>> tmp(scene.size());
    parallel_for(scene.size(), settings.workers, [&](std::size_t i) {
        tmp[i] = splat_one(scene, i, cam, center, degree, floor, settings.cutoff_sigma);
    }, 256);
    std::vector<SplattedGaussian> out;
    out.reserve(scene.size());
    for (auto& s : tmp) {
        if (s) out.push_back(std::move(*s));
    }
    return out;
}

TileGrid sort_and_bin(const std::vector<SplattedGaussian>& splats, TileGrid grid, int width) {
    grid.offsets.assign(grid.tile_count() + 1, 0);
    std::vector<char> mask(static_cast<std::size_t>(grid.tiles_x));
    for (const auto& s : splats) {
        for_each_tile(s, grid, width, mask, [&](std::size_t t) { ++grid.offsets[t + 1]; });
    }
    for (std::size_t t = 0; t < grid.tile_count(); ++t) grid.offsets[t + 1] += grid.offsets[t];
    grid.entries.assign(grid.offsets.back(), TileEntry{});
    std::vector<std::uint32_t> cursor(grid.offsets.begin(), grid.offsets.end() - 1);
    for (std::size_t k = 0; k < splats.size(); ++k) {
        for_each_tile(splats[k], grid, width, mask, [&](std::size_t t) {
            grid.entries[cursor[t]++] = TileEntry{splats[k].depth, static_cast<std::uint32_t>(k)};
        });
    }
    parallel_for(grid.tile_count(), 0, [&](std::size_t t) {
        std::sort(grid.entries.begin() + grid.offsets[t], grid.entries.begin() + grid.offsets[t + 1],
                  [](const TileEntry& x, const TileEntry& y) {
                      return x.depth < y.depth || (x.depth == y.depth && x.splat < y.splat);
                  });
    });
    return grid;
}

RenderOutput render_splats(const ForwardState& state) {
    const auto& cam = state.camera;
    const auto& st = state.settings;
    const int h = cam.height, w = cam.width;
    RenderOutput out;
    out.color = Image(h, w, 3);
    out.alpha = Image(h, w, 1);
    if (st.compute_depth) out.depth = Image(h, w, 1);

    const DirectionTable dirs(h, w);
    const std::vector<Prim> prims = make_prims(state.splats);
    const double cut2 = st.cutoff_sigma * st.cutoff_sigma;

    parallel_for(state.grid.tile_count(), st.workers, [&](std::size_t t) {
        const auto entries = state.grid.tile(t);
        const TileBounds tb = tile_bounds(state.grid, t, h, w);
        thread_local std::vector<Prim> local;
        thread_local std::vector<std::vector<std::uint32_t>> rows;
        gather_tile(entries, prims, tb, local, rows);

        const int tw = tb.c1 - tb.c0;
        thread_local std::vector<double> trans, depth;
        thread_local std::vector<Vec3> col;
        for (int r = tb.r0; r < tb.r1; ++r) {
            trans.assign(static_cast<std::size_t>(tw), 1.0);
            depth.assign(static_cast<std::size_t>(tw), 0.0);
            col.assign(static_cast<std::size_t>(tw), Vec3::Zero());
            int live = tw;
            // Prim-major sweep: each pixel still sees its prims front to back.
            for (const std::uint32_t k : rows[static_cast<std::size_t>(r - tb.r0)]) {
                const Prim& p = local[k];
                const int end = p.rect.col_start + p.rect.col_count;
                const int spans[2][2] = {{p.rect.col_start, std::min(end, w)}, {0, end > w ? end - w : 0}};
                for (const auto& span : spans) {
                    const int lo = std::max(span[0], tb.c0), hi = std::min(span[1], tb.c1);
                    for (int c = lo; c < hi; ++c) {
                        const auto j = static_cast<std::size_t>(c - tb.c0);
                        if (trans[j] < st.min_transmittance) continue;
                        const Vec3 d = dirs.at(r, c);
                        const double md = p.mu.dot(d);
                        if (md <= kFrontEpsilon) continue;
                        const double inv = 1.0 / md;
                        const double xu = p.bu.dot(d) * inv;
                        const double xv = p.bv.dot(d) * inv;
                        const double m = p.a * xu * xu + 2.0 * p.b * xu * xv + p.c * xv * xv;
                        if (m > cut2) continue;
                        const double alpha = std::min(st.alpha_clamp, p.opacity * std::exp(-0.5 * m));
                        const double wgt = alpha * trans[j];
                        col[j] += wgt * p.color;
                        depth[j] += wgt * p.depth;
                        trans[j] *= 1.0 - alpha;
                        if (trans[j] < st.min_transmittance) --live;
                    }
                }
                if (live == 0) break;
            }
            for (int c = tb.c0; c < tb.c1; ++c) {
                const auto j = static_cast<std::size_t>(c - tb.c0);
                const Vec3 v = col[j] + trans[j] * st.background;
                for (int ch = 0; ch < 3; ++ch) out.color.at(r, c, ch) = v[ch];
                out.alpha.at(r, c) = 1.0 - trans[j];
                if (st.compute_depth) out.depth.at(r, c) = depth[j];
            }
        }
    });
    return out;
}

RenderOutput render(const GaussianScene& scene, const PanoramaCamera& cam,
                    const RenderSettings& settings, ForwardState* state) {
    ForwardState local;
    ForwardState& s = state ? *state : local;
    s.camera = cam;
    s.settings = settings;
    s.sh_degree = resolve_degree(scene, settings);
    s.splats = splat_all(scene, cam, settings);
    s.grid = sort_and_bin(s.splats, TileGrid::for_image(cam.height, cam.width, settings.tile_size),
                          cam.width);
    return render_splats(s);
}

namespace {

struct Contributor {
    std::uint32_t entry;
    double alpha, trans, gauss, xu, xv, inv_md;
    bool clamped;
};

void splat_backward(const GaussianScene& scene, const SplattedGaussian& s, const PanoramaCamera& cam,
                    int degree, const double* acc, GaussianScene& grads) {
    const std::size_t i = s.gaussian_index;
    const Mat3& W = cam.rotation;
    const Vec3& mu_p = s.frame.mu_prime;
    const Vec3& bu = s.frame.basis_u;
    const Vec3& bv = s.frame.basis_v;
    const double rho = s.depth;

    // Conic -> covariance.
    Mat2 q;
    q << s.conic_a, s.conic_b, s.conic_b, s.conic_c;
    Mat2 gq;
    gq << acc[kQ00], acc[kQ01], acc[kQ01], acc[kQ11];
    const Mat2 gcov = -q * gq * q;

    // cov2d = T Sigma T^T / rho^2 + floor I with T = B^T W.
    const Vec4 quat_raw = scene.rotation(i);
    const double qn = quat_raw.norm();
    const Vec4 qh = quat_raw / qn;
    const Mat3 rot = quaternion_to_rotation(quat_raw);
    const Vec3 scale = scene.log_scale(i).array().exp();
    const Mat3 m = rot * scale.asDiagonal();
    const Mat3 sigma = m * m.transpose();
    Eigen::Matrix<double, 2, 3> tmat;
    tmat.row(0) = bu.transpose() * W;
    tmat.row(1) = bv.transpose() * W;
    const Mat2 a = tmat * sigma * tmat.transpose();
    const double g_rho_cov = gcov.cwiseProduct(a).sum() * (-2.0 / (rho * rho * rho));
    const Mat2 ga = gcov / (rho * rho);
    const Eigen::Matrix<double, 2, 3> gt_mat = 2.0 * ga * tmat * sigma;
    const Mat3 gsigma = tmat.transpose() * ga * tmat;

    Vec3 g_bu = Vec3(acc[kBuX], acc[kBuY], acc[kBuZ]) + W * gt_mat.row(0).transpose();
    const Vec3 g_bv = Vec3(acc[kBvX], acc[kBvY], acc[kBvZ]) + W * gt_mat.row(1).transpose();
    Vec3 g_mu = Vec3(acc[kMuX], acc[kMuY], acc[kMuZ]);

    // basis_v = mu' x basis_u
    g_mu += bu.cross(g_bv);
    g_bu += g_bv.cross(mu_p);
    // basis_u = normalize(w)
    const Vec3 w_raw = s.pole_fallback ? Vec3(0.0, -mu_p.z(), mu_p.y()) : Vec3(-mu_p.z(), 0.0, mu_p.x());
    const Vec3 g_w = (g_bu - g_bu.dot(bu) * bu) / w_raw.norm();
    if (s.pole_fallback) {
        g_mu.y() += g_w.z();
        g_mu.z() -= g_w.y();
    } else {
        g_mu.x() += g_w.z();
        g_mu.z() -= g_w.x();
    }
    // mu' = t / |t|
    const Vec3 g_t = (g_mu - g_mu.dot(mu_p) * mu_p) / rho + g_rho_cov * mu_p;
    Vec3 g_pos = W.transpose() * g_t;

    // View-dependent color.
    Vec3 g_col(acc[kColR], acc[kColG], acc[kColB]);
    for (int ch = 0; ch < 3; ++ch) {
        if (s.color_clamped[ch]) g_col[ch] = 0.0;
    }
    const Vec3 view = scene.position(i) - cam.center();
    const double vlen = view.norm();
    const Vec3 dir = view / vlen;
    std::array<double, 16> basis{};
    sh_basis(degree, dir, basis);
    auto g_sh = grads.sh_of(i);
    const auto coeffs = scene.sh_of(i);
    const int k_count = sh_coeff_count(degree);
    for (int k = 0; k < k_count; ++k) {
        for (int ch = 0; ch < 3; ++ch) {
            g_sh[static_cast<std::size_t>(3 * k + ch)] += g_col[ch] * basis[static_cast<std::size_t>(k)];
        }
    }
    if (degree > 0) {
        std::array<Vec3, 16> dbasis;
        sh_basis_gradient(degree, dir, dbasis);
        Vec3 g_dir = Vec3::Zero();
        for (int k = 1; k < k_count; ++k) {
            double wk = 0.0;
            for (int ch = 0; ch < 3; ++ch) wk += g_col[ch] * coeffs[static_cast<std::size_t>(3 * k + ch)];
            g_dir += wk * dbasis[static_cast<std::size_t>(k)];
        }
        g_pos += (g_dir - g_dir.dot(dir) * dir) / vlen;
    }
    grads.position(i) += g_pos;

    // Sigma = M M^T, M = R diag(s)
    const Mat3 gm = 2.0 * gsigma * m;
    Vec3 g_scale;
    for (int j = 0; j < 3; ++j) g_scale[j] = gm.col(j).dot(rot.col(j));
    grads.log_scale(i) += g_scale.cwiseProduct(scale);
    const Mat3 gr = gm * scale.asDiagonal();
    const double w = qh[0], x = qh[1], y = qh[2], z = qh[3];
    Vec4 gqh;
    gqh[0] = 2.0 * (-z * gr(0, 1) + y * gr(0, 2) + z * gr(1, 0) - x * gr(1, 2) - y * gr(2, 0) + x * gr(2, 1));
    gqh[1] = 2.0 * (y * gr(0, 1) + z * gr(0, 2) + y * gr(1, 0) - 2.0 * x * gr(1, 1) - w * gr(1, 2) +
                    z * gr(2, 0) + w * gr(2, 1) - 2.0 * x * gr(2, 2));
    gqh[2] = 2.0 * (-2.0 * y * gr(0, 0) + x * gr(0, 1) + w * gr(0, 2) + x * gr(1, 0) + z * gr(1, 2) -
                    w * gr(2, 0) + z * gr(2, 1) - 2.0 * y * gr(2, 2));
    gqh[3] = 2.0 * (-2.0 * z * gr(0, 0) - w * gr(0, 1) + x * gr(0, 2) + w * gr(1, 0) - 2.0 * z * gr(1, 1) +
                    y * gr(1, 2) + x * gr(2, 0) + y * gr(2, 1));
    grads.rotation(i) += (gqh - gqh.dot(qh) * qh) / qn;

    grads.opacity_logits[i] += acc[kOpacity] * s.opacity * (1.0 - s.opacity);
}

} // namespace

BackwardResult render_backward(const GaussianScene& scene, const ForwardState& state,
                               const Image& grad_output) {
    const auto& cam = state.camera;
    const auto& st = state.settings;
    const int h = cam.height, w = cam.width;
    if (grad_output.height != h || grad_output.width != w || grad_output.channels != 3) {
        throw ShapeMismatchError("render_backward: grad_output must be H x W x 3");
    }

    const DirectionTable dirs(h, w);
    const std::vector<Prim> prims = make_prims(state.splats);
    const double cut2 = st.cutoff_sigma * st.cutoff_sigma;
    const std::size_t n_entries = state.grid.entries.size();
    std::vector<double> acc(n_entries * kAccCount, 0.0);
    std::vector<std::uint32_t> touched(n_entries, 0);

    parallel_for(state.grid.tile_count(), st.workers, [&](std::size_t t) {
        const auto entries = state.grid.tile(t);
        const std::uint32_t base = state.grid.offsets[t];
        const TileBounds tb = tile_bounds(state.grid, t, h, w);
        thread_local std::vector<Prim> local;
        thread_local std::vector<Contributor> contrib;
        thread_local std::vector<std::vector<std::uint32_t>> rows;
        gather_tile(entries, prims, tb, local, rows);

        for (int r = tb.r0; r < tb.r1; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r - tb.r0)];
            for (int c = tb.c0; c < tb.c1; ++c) {
                const Vec3 g(grad_output.at(r, c, 0), grad_output.at(r, c, 1), grad_output.at(r, c, 2));
                if (g.isZero(0.0)) continue;
                const Vec3 d = dirs.at(r, c);
                contrib.clear();
                double trans = 1.0;
                for (const std::uint32_t k : row) {
                    const Prim& p = local[k];
                    if (!p.rect.contains(r, c, w)) continue;
                    const double md = p.mu.dot(d);
                    if (md <= kFrontEpsilon) continue;
                    const double inv = 1.0 / md;
                    const double xu = p.bu.dot(d) * inv;
                    const double xv = p.bv.dot(d) * inv;
                    const double m = p.a * xu * xu + 2.0 * p.b * xu * xv + p.c * xv * xv;
                    if (m > cut2) continue;
                    const double gauss = std::exp(-0.5 * m);
                    const double raw = p.opacity * gauss;
                    const bool clamped = raw > st.alpha_clamp;
                    const double alpha = clamped ? st.alpha_clamp : raw;
                    contrib.push_back({k, alpha, trans, gauss, xu, xv, inv, clamped});
                    trans *= 1.0 - alpha;
                    if (trans < st.min_transmittance) break;
                }
                Vec3 behind = trans * st.background;
                for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
                    const Prim& p = local[it->entry];
                    double* a = &acc[(base + it->entry) * kAccCount];
                    ++touched[base + it->entry];
                    const double wgt = it->alpha * it->trans;
                    a[kColR] += g[0] * wgt;
                    a[kColG] += g[1] * wgt;
                    a[kColB] += g[2] * wgt;
                    const double dl_dalpha =
                        it->trans * g.dot(p.color) - g.dot(behind) / (1.0 - it->alpha);
                    behind += wgt * p.color;
                    if (it->clamped) continue;
                    a[kOpacity] += dl_dalpha * it->gauss;
                    const double dl_dm = -0.5 * dl_dalpha * p.opacity * it->gauss;
                    const double xu = it->xu, xv = it->xv;
                    const double g_xu = dl_dm * 2.0 * (p.a * xu + p.b * xv);
                    const double g_xv = dl_dm * 2.0 * (p.b * xu + p.c * xv);
                    a[kQ00] += dl_dm * xu * xu;
                    a[kQ01] += dl_dm * xu * xv;
                    a[kQ11] += dl_dm * xv * xv;
                    const Vec3 dd = d * it->inv_md;
                    a[kBuX] += g_xu * dd.x();
                    a[kBuY] += g_xu * dd.y();
                    a[kBuZ] += g_xu * dd.z();
                    a[kBvX] += g_xv * dd.x();
                    a[kBvY] += g_xv * dd.y();
                    a[kBvZ] += g_xv * dd.z();
                    const double s = -(g_xu * xu + g_xv * xv);
                    a[kMuX] += s * dd.x();
                    a[kMuY] += s * dd.y();
                    a[kMuZ] += s * dd.z();
                    a[kXu] += g_xu;
                    a[kXv] += g_xv;
                }
            }
        }
    });

    // Fixed-order reduction keeps the result independent of the thread count.
    const std::size_t n_splats = state.splats.size();
    std::vector<double> splat_acc(n_splats * kAccCount, 0.0);
    std::vector<std::uint32_t> splat_touched(n_splats, 0);
    for (std::size_t e = 0; e < n_entries; ++e) {
        const std::size_t k = state.grid.entries[e].splat;
        const double* src = &acc[e * kAccCount];
        double* dst = &splat_acc[k * kAccCount];
        for (int j = 0; j < kAccCount; ++j) dst[j] += src[j];
        splat_touched[k] += touched[e];
    }

    BackwardResult result;
    result.grads = scene.zeros_like();
    result.tangent_grad_norm.assign(scene.size(), 0.0);
    result.touched_pixels.assign(scene.size(), 0);
    parallel_for(n_splats, st.workers, [&](std::size_t k) {
        const auto& s = state.splats[k];
        const double* a = &splat_acc[k * kAccCount];
        splat_backward(scene, s, cam, state.sh_degree, a, result.grads);
        result.tangent_grad_norm[s.gaussian_index] = std::hypot(a[kXu], a[kXv]);
        result.touched_pixels[s.gaussian_index] = splat_touched[k];
    }, 64);
    return result;
}

} // namespace panosplat
