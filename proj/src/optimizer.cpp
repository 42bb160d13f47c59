#include "panosplat/optimizer.hpp"

#include "panosplat/error.hpp"

#include <algorithm>
#include <cmath>

namespace panosplat {

double LearningRates::position_at(std::int64_t step, std::int64_t total) const {
    const double t = total > 0 ? std::clamp(static_cast<double>(step) / static_cast<double>(total), 0.0, 1.0) : 0.0;
    const double lo = position_final * position_scale, hi = position * position_scale;
    if (!(lo > 0.0) || !(hi > 0.0)) return hi * (1.0 - t) + lo * t;
    return std::exp((1.0 - t) * std::log(hi) + t * std::log(lo));
}

double LearningRates::rate(ParamGroup g) const {
    switch (g) {
    case ParamGroup::position: return position * position_scale;
    case ParamGroup::log_scale: return scale;
    case ParamGroup::rotation: return rotation;
    case ParamGroup::opacity: return opacity;
    case ParamGroup::sh: return sh;
    }
    return 0.0;
}

Adam::Adam(const GaussianScene& like, AdamOptions opt)
    : opt_(opt), m_(like.zeros_like()), v_(like.zeros_like()) {}

StepReport Adam::step(GaussianScene& scene, const GaussianScene& grads, const LearningRates& lr,
                      double position_lr) {
    if (grads.size() != scene.size() || m_.size() != scene.size() || grads.sh_degree != scene.sh_degree ||
        m_.sh_degree != scene.sh_degree) {
        throw ShapeMismatchError("optimizer: gradient, state and scene sizes differ");
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
    StepReport report;
    for (ParamGroup g : kAllParamGroups) {
        const double rate = g == ParamGroup::position ? position_lr : lr.rate(g);
        auto p = scene.group(g);
        const auto gr = grads.group(g);
        auto m = m_.group(g);
        auto v = v_.group(g);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = gr[k];
            if (!std::isfinite(gk)) {
                ++report.skipped_nonfinite;
                continue;
            }
            m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * gk;
            v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * gk * gk;
            const double mh = m[k] / bc1;
            const double vh = v[k] / bc2;
            p[k] -= rate * mh / (std::sqrt(vh) + opt_.epsilon);
        }
    }
    scene.normalize_rotations();
    return report;
}

void Adam::set_moments(GaussianScene m, GaussianScene v) {
    if (m.size() != v.size() || m.sh_degree != v.sh_degree || m.positions.size() != 3 * m.size() ||
        v.positions.size() != 3 * v.size() || m.sh.size() != m.size() * static_cast<std::size_t>(m.sh_stride()) ||
        v.sh.size() != v.size() * static_cast<std::size_t>(v.sh_stride())) {
        throw ShapeMismatchError("optimizer: moment shapes differ");
    }
    m_ = std::move(m);
    v_ = std::move(v);
}

void Adam::remap(const std::vector<std::int64_t>& source) {
    auto rebuild = [&](const GaussianScene& old) {
        GaussianScene out(old.sh_degree);
        out.resize(source.size());
        for (std::size_t i = 0; i < source.size(); ++i) {
            if (source[i] < 0) {
                out.rotation(i).setZero();
                continue;
            }
            const auto s = static_cast<std::size_t>(source[i]);
            if (s >= old.size()) throw InvalidParameterError("optimizer remap: source out of range");
            out.position(i) = old.position(s);
            out.log_scale(i) = old.log_scale(s);
            out.rotation(i) = old.rotation(s);
            out.opacity_logits[i] = old.opacity_logits[s];
            const auto src = old.sh_of(s);
            std::copy(src.begin(), src.end(), out.sh_of(i).begin());
        }
        return out;
    };
    m_ = rebuild(m_);
    v_ = rebuild(v_);
}

} // namespace panosplat
