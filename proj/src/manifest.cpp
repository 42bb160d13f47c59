#include "panosplat/manifest.hpp"

#include "panosplat/error.hpp"
#include "panosplat/io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <set>

namespace panosplat {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string resolve(const fs::path& base, const std::string& rel) {
    const fs::path p(rel);
    return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

template <int N>
Eigen::Matrix<double, N, 1> fixed_array(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != N) {
        throw ValidationError(where + ": expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int k = 0; k < N; ++k) {
        const auto& v = j[static_cast<std::size_t>(k)];
        if (!v.is_number()) throw ValidationError(where + "[" + std::to_string(k) + "]: expected a number");
        out[k] = v.get<double>();
    }
    return out;
}

std::string string_field(const json& j, const char* key, const std::string& where, bool required) {
    if (!j.contains(key)) {
        if (required) throw ValidationError(where + "." + key + ": missing");
        return {};
    }
    if (!j[key].is_string() || j[key].get<std::string>().empty()) {
        throw ValidationError(where + "." + key + ": expected a non-empty string");
    }
    return j[key].get<std::string>();
}

std::string existing_file(const fs::path& base, const std::string& rel, const std::string& where) {
    const std::string p = resolve(base, rel);
    if (!fs::is_regular_file(p)) throw ValidationError(where + ": file not found: " + p);
    return p;
}

} // namespace

std::vector<std::size_t> SceneManifest::split(const std::string& name) const {
    std::vector<std::size_t> out;
    if (name == "all" || (name == "train" && !splits.count("train"))) {
        for (std::size_t i = 0; i < views.size(); ++i) out.push_back(i);
        return out;
    }
    const auto it = splits.find(name);
    if (it == splits.end()) throw ValidationError(path + ": unknown split '" + name + "'");
    for (const auto& id : it->second) {
        for (std::size_t i = 0; i < views.size(); ++i) {
            if (views[i].id == id) out.push_back(i);
        }
    }
    return out;
}

SceneManifest load_manifest(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ValidationError(path + ": manifest must be a JSON object");
    const std::set<std::string> known = {"camera_height_m", "linear_color", "views", "splits"};
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ValidationError(path + ": ." + k + ": unknown key");
    }
    const fs::path base = fs::path(path).parent_path();
    SceneManifest m;
    m.path = path;
    if (j.contains("camera_height_m")) {
        if (!j["camera_height_m"].is_number() || !(j["camera_height_m"].get<double>() > 0.0)) {
            throw ValidationError(path + ": .camera_height_m: expected a positive number");
        }
        m.camera_height = j["camera_height_m"].get<double>();
    }
    if (j.contains("linear_color")) {
        if (!j["linear_color"].is_boolean()) throw ValidationError(path + ": .linear_color: expected a boolean");
        m.linear_color = j["linear_color"].get<bool>();
    }
    if (!j.contains("views") || !j["views"].is_array() || j["views"].empty()) {
        throw ValidationError(path + ": .views: expected a non-empty array");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j["views"].size(); ++i) {
        const json& v = j["views"][i];
        const std::string where = path + ": .views[" + std::to_string(i) + "]";
        if (!v.is_object()) throw ValidationError(where + ": expected an object");
        ManifestView mv;
        mv.id = string_field(v, "id", where, true);
        if (!ids.insert(mv.id).second) throw ValidationError(where + ".id: duplicate view id '" + mv.id + "'");
        mv.image = existing_file(base, string_field(v, "image", where, true), where + ".image");
        if (!v.contains("pose") || !v["pose"].is_object()) throw ValidationError(where + ".pose: expected an object");
        mv.quaternion = fixed_array<4>(v["pose"].value("quaternion", json()), where + ".pose.quaternion");
        mv.translation = fixed_array<3>(v["pose"].value("translation", json()), where + ".pose.translation");
        if (std::abs(mv.quaternion.norm() - 1.0) > 1e-6) {
            throw ValidationError(where + ".pose.quaternion: not unit length (norm " +
                                  std::to_string(mv.quaternion.norm()) + ")");
        }
        const std::string layout = string_field(v, "layout", where, false);
        if (!layout.empty()) mv.layout = existing_file(base, layout, where + ".layout");
        const std::string depth = string_field(v, "depth", where, false);
        if (!depth.empty()) mv.depth = existing_file(base, depth, where + ".depth");
        m.views.push_back(std::move(mv));
    }
    if (j.contains("splits")) {
        if (!j["splits"].is_object()) throw ValidationError(path + ": .splits: expected an object");
        std::map<std::string, std::string> owner;
        for (const auto& [name, list] : j["splits"].items()) {
            const std::string where = path + ": .splits." + name;
            if (name == "all") throw ValidationError(where + ": 'all' is reserved");
            if (!list.is_array()) throw ValidationError(where + ": expected an array of view ids");
            std::vector<std::string> members;
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (!list[i].is_string()) throw ValidationError(where + "[" + std::to_string(i) + "]: expected a string");
                const std::string id = list[i].get<std::string>();
                if (!ids.count(id)) throw ValidationError(where + ": unknown view id '" + id + "'");
                const auto [it, fresh] = owner.emplace(id, name);
                if (!fresh) {
                    throw ValidationError(where + ": view '" + id + "' is already in split '" + it->second + "'");
                }
                members.push_back(id);
            }
            m.splits[name] = std::move(members);
        }
    }
    return m;
}

void save_manifest(const std::string& path, const SceneManifest& m) {
    const fs::path base = fs::absolute(fs::path(path)).parent_path();
    auto rel = [&](const std::string& p) { return fs::absolute(p).lexically_relative(base).string(); };
    json views = json::array();
    for (const auto& v : m.views) {
        json jv = {{"id", v.id},
                   {"image", rel(v.image)},
                   {"pose",
                    {{"quaternion", {v.quaternion[0], v.quaternion[1], v.quaternion[2], v.quaternion[3]}},
                     {"translation", {v.translation[0], v.translation[1], v.translation[2]}}}}};
        if (v.layout) jv["layout"] = rel(*v.layout);
        if (v.depth) jv["depth"] = rel(*v.depth);
        views.push_back(std::move(jv));
    }
    json j = {{"camera_height_m", m.camera_height}, {"linear_color", m.linear_color}, {"views", views}};
    if (!m.splits.empty()) j["splits"] = m.splits;
    write_file(path, j.dump(2) + "\n");
}

PanoramaCamera view_camera(const ManifestView& v, int height, int width) {
    PanoramaCamera cam = PanoramaCamera::from_pose(v.quaternion, v.translation, height, width);
    cam.validate();
    return cam;
}

std::vector<PanoramaInput> load_inputs(const SceneManifest& m, const std::vector<std::size_t>& which,
                                       bool with_priors) {
    std::vector<PanoramaInput> out;
    for (std::size_t i : which) {
        const ManifestView& v = m.views.at(i);
        PanoramaInput in;
        in.rgb = load_equirect(v.image, m.linear_color);
        in.camera = view_camera(v, in.rgb.height, in.rgb.width);
        if (with_priors && v.layout) {
            in.layout = load_layout(*v.layout);
            if (in.layout->width() != in.rgb.width) {
                throw ValidationError(*v.layout + ": layout width " + std::to_string(in.layout->width()) +
                                      " differs from image width " + std::to_string(in.rgb.width));
            }
        }
        if (with_priors && v.depth) {
            in.depth = load_depth(*v.depth);
            if (in.depth->height != in.rgb.height || in.depth->width != in.rgb.width) {
                throw ValidationError(*v.depth + ": depth size differs from image size");
            }
        }
        out.push_back(std::move(in));
    }
    return out;
}

std::vector<TrainView> load_train_views(const SceneManifest& m, const std::vector<std::size_t>& which) {
    std::vector<TrainView> out;
    const auto inputs = load_inputs(m, which, false);
    for (std::size_t k = 0; k < which.size(); ++k) {
        out.push_back({m.views[which[k]].id, inputs[k].camera, inputs[k].rgb});
    }
    return out;
}

} // namespace panosplat
