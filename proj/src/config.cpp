#include "panosplat/config.hpp"

#include "panosplat/error.hpp"
#include "panosplat/io.hpp"

#include <functional>
#include <set>

namespace panosplat {

using json = nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        const bool ok = std::is_integral_v<T> ? v.is_number_integer() : v.is_number();
        if (!ok) throw ConfigError(path(key) + ": expected " + (std::is_integral_v<T> ? "an integer" : "a number"));
        if constexpr (std::is_unsigned_v<T>) {
            if (v.get<long long>() < 0) throw ConfigError(path(key) + ": must be non-negative");
        }
        out = v.get<T>();
    }

    void get(const char* key, Vec3& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != 3) throw ConfigError(path(key) + ": expected an array of 3 numbers");
        for (int k = 0; k < 3; ++k) {
            if (!v[static_cast<std::size_t>(k)].is_number()) throw ConfigError(path(key) + ": expected numbers");
            out[k] = v[static_cast<std::size_t>(k)].get<double>();
        }
    }

    /// Nested object reader, or nullptr-equivalent when the key is absent.
    bool child(const char* key, const std::function<void(Reader&)>& fn) {
        seen_.insert(key);
        if (!j_.contains(key)) return false;
        Reader r(j_.at(key), path(key));
        fn(r);
        r.finish();
        return true;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError(path(k) + ": unknown key");
        }
    }

private:
    [[nodiscard]] std::string path(const std::string& key) const { return where_ + "." + key; }

    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

} // namespace

json to_json(const TrainConfig& c) {
    const auto& bg = c.render.background;
    return {
        {"lambda1", c.weights.l1},
        {"lambda2", c.weights.dssim},
        {"lambda3", c.weights.layout},
        {"iterations", c.iterations},
        {"seed", c.seed},
        {"extent", c.extent},
        {"sh_increase_interval", c.sh_increase_interval},
        {"psnr_interval", c.psnr_interval},
        {"checkpoint_interval", c.checkpoint_interval},
        {"lr",
         {{"position", c.lr.position},
          {"position_final", c.lr.position_final},
          {"sh", c.lr.sh},
          {"opacity", c.lr.opacity},
          {"scale", c.lr.scale},
          {"rotation", c.lr.rotation}}},
        {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
        {"ssim", {{"window", c.ssim.window}, {"sigma", c.ssim.sigma}, {"k1", c.ssim.k1}, {"k2", c.ssim.k2}}},
        {"densify",
         {{"from", c.densify_from},
          {"until_fraction", c.densify_until_fraction},
          {"interval", c.densify_interval},
          {"grad_threshold", c.densify.grad_threshold},
          {"split_fraction", c.densify.split_fraction},
          {"min_opacity", c.densify.min_opacity},
          {"max_gaussians", c.densify.max_gaussians},
          {"split_scale_divisor", c.densify.split_scale_divisor},
          {"split_children", c.densify.split_children}}},
        {"render",
         {{"tile_size", c.render.tile_size},
          {"background", {bg.x(), bg.y(), bg.z()}},
          {"workers", c.render.workers}}},
    };
}

TrainConfig train_config_from_json(const json& j, const std::string& source) {
    TrainConfig c;
    Reader r(j, source);
    r.get("lambda1", c.weights.l1);
    r.get("lambda2", c.weights.dssim);
    r.get("lambda3", c.weights.layout);
    r.get("iterations", c.iterations);
    r.get("seed", c.seed);
    r.get("extent", c.extent);
    r.get("sh_increase_interval", c.sh_increase_interval);
    r.get("psnr_interval", c.psnr_interval);
    r.get("checkpoint_interval", c.checkpoint_interval);
    r.child("lr", [&](Reader& s) {
        s.get("position", c.lr.position);
        s.get("position_final", c.lr.position_final);
        s.get("sh", c.lr.sh);
        s.get("opacity", c.lr.opacity);
        s.get("scale", c.lr.scale);
        s.get("rotation", c.lr.rotation);
    });
    r.child("adam", [&](Reader& s) {
        s.get("beta1", c.adam.beta1);
        s.get("beta2", c.adam.beta2);
        s.get("epsilon", c.adam.epsilon);
    });
    r.child("ssim", [&](Reader& s) {
        s.get("window", c.ssim.window);
        s.get("sigma", c.ssim.sigma);
        s.get("k1", c.ssim.k1);
        s.get("k2", c.ssim.k2);
    });
    r.child("densify", [&](Reader& s) {
        s.get("from", c.densify_from);
        s.get("until_fraction", c.densify_until_fraction);
        s.get("interval", c.densify_interval);
        s.get("grad_threshold", c.densify.grad_threshold);
        s.get("split_fraction", c.densify.split_fraction);
        s.get("min_opacity", c.densify.min_opacity);
        s.get("max_gaussians", c.densify.max_gaussians);
        s.get("split_scale_divisor", c.densify.split_scale_divisor);
        s.get("split_children", c.densify.split_children);
    });
    r.child("render", [&](Reader& s) {
        s.get("tile_size", c.render.tile_size);
        s.get("background", c.render.background);
        s.get("workers", c.render.workers);
    });
    r.finish();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

TrainConfig load_train_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return train_config_from_json(j, path);
}

} // namespace panosplat
