#include "panosplat/losses.hpp"

#include "panosplat/error.hpp"

#include <algorithm>
#include <cmath>

namespace panosplat {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeMismatchError(std::string(what) + ": images differ in shape");
}

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double mid = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double x = i - mid;
        k[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Single-channel plane stored row-major.
using Plane = std::vector<double>;

/// Separable "same" convolution with zero padding. The kernel is symmetric, so this is also
/// its own adjoint.
Plane blur(const Plane& in, int h, int w, const std::vector<double>& k) {
    const int half = static_cast<int>(k.size()) / 2;
    Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int r = 0; r < h; ++r) {
        const double* row = &in[static_cast<std::size_t>(r) * w];
        double* dst = &tmp[static_cast<std::size_t>(r) * w];
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            const int lo = std::max(0, half - c), hi = std::min<int>(static_cast<int>(k.size()), w - c + half);
            for (int j = lo; j < hi; ++j) s += k[static_cast<std::size_t>(j)] * row[c + j - half];
            dst[c] = s;
        }
    }
    for (int r = 0; r < h; ++r) {
        const int lo = std::max(0, half - r), hi = std::min<int>(static_cast<int>(k.size()), h - r + half);
        double* dst = &out[static_cast<std::size_t>(r) * w];
        for (int j = lo; j < hi; ++j) {
            const double kj = k[static_cast<std::size_t>(j)];
            const double* src = &tmp[static_cast<std::size_t>(r + j - half) * w];
            for (int c = 0; c < w; ++c) dst[c] += kj * src[c];
        }
    }
    return out;
}

Plane channel(const Image& img, int ch) {
    Plane p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + ch];
    return p;
}

} // namespace

double l1_loss(const Image& rendered, const Image& target, Image* grad) {
    require_same_shape(rendered, target, "l1_loss");
    const std::size_t n = rendered.data.size();
    if (grad) *grad = Image(rendered.height, rendered.width, rendered.channels);
    if (n == 0) return 0.0;
    double sum = 0.0;
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        if (grad) grad->data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return sum * inv;
}

double ssim(const Image& x, const Image& y, const SsimOptions& opt, Image* grad) {
    require_same_shape(x, y, "ssim");
    if (opt.window <= 0 || opt.window % 2 == 0 || !(opt.sigma > 0.0)) {
        throw InvalidParameterError("ssim: window must be odd and positive, sigma positive");
    }
    const int h = x.height, w = x.width;
    if (grad) *grad = Image(h, w, x.channels);
    if (x.data.empty()) return 1.0;
    const auto k = gaussian_kernel(opt.window, opt.sigma);
    const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
    const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
    const std::size_t np = x.pixel_count();
    const double inv_n = 1.0 / static_cast<double>(x.data.size());

    double total = 0.0;
    for (int ch = 0; ch < x.channels; ++ch) {
        const Plane px = channel(x, ch), py = channel(y, ch);
        Plane xx(np), yy(np), xy(np);
        for (std::size_t i = 0; i < np; ++i) {
            xx[i] = px[i] * px[i];
            yy[i] = py[i] * py[i];
            xy[i] = px[i] * py[i];
        }
        const Plane mx = blur(px, h, w, k), my = blur(py, h, w, k);
        const Plane ex2 = blur(xx, h, w, k), ey2 = blur(yy, h, w, k), exy = blur(xy, h, w, k);
        Plane g_mu, g_ex2, g_exy;
        if (grad) {
            g_mu.resize(np);
            g_ex2.resize(np);
            g_exy.resize(np);
        }
        for (std::size_t i = 0; i < np; ++i) {
            const double a1 = 2.0 * mx[i] * my[i] + c1;
            const double a2 = 2.0 * (exy[i] - mx[i] * my[i]) + c2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
            const double b2 = (ex2[i] - mx[i] * mx[i]) + (ey2[i] - my[i] * my[i]) + c2;
            const double den = b1 * b2;
            const double s = a1 * a2 / den;
            total += s;
            if (!grad) continue;
            const double d_num = 2.0 * my[i] * (a2 - a1);
            const double d_den = 2.0 * mx[i] * (b2 - b1);
            g_mu[i] = inv_n * (d_num - s * d_den) / den;
            g_exy[i] = inv_n * 2.0 * a1 / den;
            g_ex2[i] = -inv_n * s / b2;
        }
        if (!grad) continue;
        const Plane bm = blur(g_mu, h, w, k), bx2 = blur(g_ex2, h, w, k), bxy = blur(g_exy, h, w, k);
        for (std::size_t i = 0; i < np; ++i) {
            grad->data[i * x.channels + ch] = bm[i] + 2.0 * px[i] * bx2[i] + py[i] * bxy[i];
        }
    }
    return total * inv_n;
}

double dssim_loss(const Image& rendered, const Image& target, const SsimOptions& opt, Image* grad) {
    const double s = ssim(rendered, target, opt, grad);
    if (grad) {
        for (double& v : grad->data) v = -v;
    }
    return 1.0 - s;
}

double layout_loss(const GaussianScene& scene, const std::vector<LayoutAnchor>& anchors,
                   GaussianScene* grad) {
    if (anchors.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(anchors.size());
    double sum = 0.0;
    for (const auto& a : anchors) {
        if (a.gaussian_index >= scene.size()) {
            throw InvalidParameterError("layout anchor refers to a missing Gaussian");
        }
        const Vec3 delta = scene.position(a.gaussian_index) - a.u0;
        const double len = delta.norm();
        if (len < kMoveEpsilon) continue;
        const Vec3 nh = a.n.normalized();
        const double c = nh.dot(delta) / len;
        sum += std::abs(c);
        if (grad && c != 0.0) {
            const Vec3 dc = (nh - c * delta / len) / len;
            grad->position(a.gaussian_index) += (c > 0.0 ? inv : -inv) * dc;
        }
    }
    return sum * inv;
}

void LossWeights::validate() const {
    if (!(l1 >= 0.0) || !(dssim >= 0.0) || !(layout >= 0.0)) {
        throw ConfigError("loss weights must be non-negative");
    }
    if (!(l1 + dssim > 0.0)) throw ConfigError("lambda1 + lambda2 must be positive");
}

double combine(const LossWeights& w, double l1, double dssim, double layout) {
    return w.l1 * l1 + w.dssim * dssim + w.layout * layout;
}

LossTerms total_loss(const Image& rendered, const Image& target, const GaussianScene& scene,
                     const std::vector<LayoutAnchor>& anchors, const LossWeights& weights,
                     const SsimOptions& ssim_opt, Image* grad_image, GaussianScene* grad_scene) {
    LossTerms t;
    Image g_l1, g_ssim;
    t.l1 = l1_loss(rendered, target, grad_image ? &g_l1 : nullptr);
    t.dssim = dssim_loss(rendered, target, ssim_opt, grad_image ? &g_ssim : nullptr);
    if (grad_scene) {
        GaussianScene g = scene.zeros_like();
        t.layout = layout_loss(scene, anchors, &g);
        for (std::size_t i = 0; i < g.positions.size(); ++i) {
            grad_scene->positions[i] += weights.layout * g.positions[i];
        }
    } else {
        t.layout = layout_loss(scene, anchors);
    }
    t.total = combine(weights, t.l1, t.dssim, t.layout);
    if (grad_image) {
        *grad_image = Image(rendered.height, rendered.width, rendered.channels);
        for (std::size_t i = 0; i < grad_image->data.size(); ++i) {
            grad_image->data[i] = weights.l1 * g_l1.data[i] + weights.dssim * g_ssim.data[i];
        }
    }
    return t;
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    if (a.data.empty()) return 99.0;
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, -10.0 * std::log10(mse));
}

} // namespace panosplat
