#include "panosplat/checkpoint.hpp"

#include "panosplat/config.hpp"
#include "panosplat/error.hpp"
#include "panosplat/io.hpp"
#include "ply.hpp"

#include <cstdio>
#include <filesystem>

namespace panosplat {

using json = nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Property names of one Gaussian row, in the common splatting layout: SH rest coefficients
/// are channel-major (all red, then green, then blue).
std::vector<std::string> gaussian_columns(int degree) {
    std::vector<std::string> cols = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    const int rest = sh_coeff_count(degree) - 1;
    for (int k = 0; k < 3 * rest; ++k) cols.push_back("f_rest_" + std::to_string(k));
    for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        cols.emplace_back(n);
    }
    return cols;
}

void append_row(std::vector<double>& out, const GaussianScene& s, std::size_t i) {
    const auto p = s.position(i);
    out.insert(out.end(), {p.x(), p.y(), p.z(), 0.0, 0.0, 0.0});
    const auto sh = s.sh_of(i);
    for (int ch = 0; ch < 3; ++ch) out.push_back(sh[static_cast<std::size_t>(ch)]);
    const int rest = sh_coeff_count(s.sh_degree) - 1;
    for (int ch = 0; ch < 3; ++ch) {
        for (int k = 1; k <= rest; ++k) out.push_back(sh[static_cast<std::size_t>(3 * k + ch)]);
    }
    out.push_back(s.opacity_logits[i]);
    const auto ls = s.log_scale(i);
    out.insert(out.end(), {ls.x(), ls.y(), ls.z()});
    const auto q = s.rotation(i);
    out.insert(out.end(), {q[0], q[1], q[2], q[3]});
}

void read_row(const ply::Element& e, std::size_t i, GaussianScene& s) {
    std::size_t c = 0;
    auto next = [&] { return e.at(i, c++); };
    for (int k = 0; k < 3; ++k) s.position(i)[k] = next();
    c += 3; // normals
    auto sh = s.sh_of(i);
    for (int ch = 0; ch < 3; ++ch) sh[static_cast<std::size_t>(ch)] = next();
    const int rest = sh_coeff_count(s.sh_degree) - 1;
    for (int ch = 0; ch < 3; ++ch) {
        for (int k = 1; k <= rest; ++k) sh[static_cast<std::size_t>(3 * k + ch)] = next();
    }
    s.opacity_logits[i] = next();
    for (int k = 0; k < 3; ++k) s.log_scale(i)[k] = next();
    for (int k = 0; k < 4; ++k) s.rotation(i)[k] = next();
}

ply::Element gaussian_element(const std::string& name, const GaussianScene& s) {
    ply::Element e;
    e.name = name;
    for (const auto& c : gaussian_columns(s.sh_degree)) e.properties.push_back({c, ply::Type::f64});
    e.values.reserve(s.size() * e.width());
    for (std::size_t i = 0; i < s.size(); ++i) append_row(e.values, s, i);
    return e;
}

GaussianScene read_gaussians(const ply::Element& e, int degree, const std::string& source) {
    const auto cols = gaussian_columns(degree);
    if (e.width() != cols.size()) {
        throw ParseError(source + ": element '" + e.name + "' has " + std::to_string(e.width()) +
                         " properties, expected " + std::to_string(cols.size()) + " for SH degree " +
                         std::to_string(degree));
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
        if (e.properties[k].name != cols[k]) {
            throw ParseError(source + ": element '" + e.name + "' property " + std::to_string(k) + " is '" +
                             e.properties[k].name + "', expected '" + cols[k] + "'");
        }
    }
    GaussianScene s(degree);
    s.resize(e.count());
    for (std::size_t i = 0; i < e.count(); ++i) read_row(e, i, s);
    return s;
}

json pose_json(const StartPose& p) {
    return {{"quaternion", {p.quaternion[0], p.quaternion[1], p.quaternion[2], p.quaternion[3]}},
            {"translation", {p.translation[0], p.translation[1], p.translation[2]}}};
}

template <typename T>
T required(const json& j, const char* key, const std::string& source) {
    if (!j.contains(key)) throw ParseError(source + ": missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(source + ": '" + key + "' has the wrong type");
    }
}

} // namespace

std::string sidecar_path(const std::string& checkpoint_path) {
    return std::filesystem::path(checkpoint_path).replace_extension(".json").string();
}

StartPose default_start_pose(const GaussianScene& scene) {
    StartPose p;
    if (scene.empty()) return p;
    Vec3 lo = scene.position(0), hi = lo;
    for (std::size_t i = 1; i < scene.size(); ++i) {
        lo = lo.cwiseMin(Vec3(scene.position(i)));
        hi = hi.cwiseMax(Vec3(scene.position(i)));
    }
    p.translation = -0.5 * (lo + hi); // identity rotation: t = x - center
    return p;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const TrainState& st = ckpt.state;
    const GaussianScene& s = st.scene;
    ply::File f;
    f.comments.push_back("panosplat checkpoint");
    f.elements.push_back(gaussian_element("vertex", s));

    ply::Element anchors;
    anchors.name = "anchor";
    anchors.properties.push_back({"gaussian_index", ply::Type::u32});
    for (const char* n : {"u0_x", "u0_y", "u0_z", "n_x", "n_y", "n_z"}) anchors.properties.push_back({n, ply::Type::f64});
    for (const auto& a : st.anchors) {
        if (a.gaussian_index >= s.size()) throw InvalidParameterError("checkpoint: anchor refers to a missing Gaussian");
        anchors.values.insert(anchors.values.end(), {static_cast<double>(a.gaussian_index), a.u0.x(), a.u0.y(),
                                                     a.u0.z(), a.n.x(), a.n.y(), a.n.z()});
    }
    f.elements.push_back(std::move(anchors));

    const bool has_moments = st.adam.size() == s.size() && st.adam.first_moment().sh_degree == s.sh_degree;
    if (has_moments) {
        f.elements.push_back(gaussian_element("adam_m", st.adam.first_moment()));
        f.elements.push_back(gaussian_element("adam_v", st.adam.second_moment()));
    }

    const std::string bytes = ply::encode(f);
    const json side = {
        {"format_version", kCheckpointVersion},
        {"sh_degree", s.sh_degree},
        {"gaussian_count", s.size()},
        {"anchor_count", st.anchors.size()},
        {"iteration", st.iteration},
        {"extent", st.extent},
        {"ply_bytes", bytes.size()},
        {"checksum", "fnv1a64:" + hex(fnv1a(bytes))},
        {"optimizer",
         {{"type", "adam"},
          {"steps", st.adam.steps()},
          {"beta1", st.adam.options().beta1},
          {"beta2", st.adam.options().beta2},
          {"epsilon", st.adam.options().epsilon},
          {"moments", has_moments}}},
        {"config", to_json(ckpt.config)},
        {"suggested_start_pose", pose_json(ckpt.start_pose)},
    };
    write_file(path, bytes);
    write_file(sidecar_path(path), side.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string side_path = sidecar_path(path);
    const std::string bytes = read_file(path);
    json side;
    try {
        side = json::parse(read_file(side_path));
    } catch (const json::parse_error& e) {
        throw ParseError(side_path + ": invalid JSON: " + e.what());
    }
    if (!side.is_object()) throw ParseError(side_path + ": expected an object");
    const int version = required<int>(side, "format_version", side_path);
    if (version != kCheckpointVersion) {
        throw VersionError(side_path + ": checkpoint format_version " + std::to_string(version) +
                           " is not supported (this build reads version " + std::to_string(kCheckpointVersion) +
                           "); re-export the checkpoint with a matching build");
    }
    const auto expected_size = required<std::size_t>(side, "ply_bytes", side_path);
    if (bytes.size() != expected_size) {
        throw IntegrityError(path + ": size " + std::to_string(bytes.size()) + " bytes, sidecar records " +
                             std::to_string(expected_size) + " (truncated or replaced file)");
    }
    if (required<std::string>(side, "checksum", side_path) != "fnv1a64:" + hex(fnv1a(bytes))) {
        throw IntegrityError(path + ": checksum mismatch");
    }
    const int degree = required<int>(side, "sh_degree", side_path);
    if (degree < 0 || degree > kMaxShDegree) throw ParseError(side_path + ": invalid sh_degree");

    const ply::File f = ply::decode(bytes, path);
    const ply::Element* vertex = f.find("vertex");
    const ply::Element* anchor = f.find("anchor");
    if (!vertex || !anchor) throw ParseError(path + ": missing vertex or anchor element");

    Checkpoint ck;
    ck.state.scene = read_gaussians(*vertex, degree, path);
    if (ck.state.scene.size() != required<std::size_t>(side, "gaussian_count", side_path)) {
        throw IntegrityError(path + ": Gaussian count differs from the sidecar");
    }
    const std::vector<std::string> anchor_cols = {"gaussian_index", "u0_x", "u0_y", "u0_z", "n_x", "n_y", "n_z"};
    for (std::size_t k = 0; k < anchor_cols.size(); ++k) {
        if (anchor->width() != anchor_cols.size() || anchor->properties[k].name != anchor_cols[k]) {
            throw ParseError(path + ": unexpected anchor properties");
        }
    }
    for (std::size_t i = 0; i < anchor->count(); ++i) {
        LayoutAnchor a;
        a.gaussian_index = static_cast<std::size_t>(anchor->at(i, 0));
        if (a.gaussian_index >= ck.state.scene.size()) {
            throw IntegrityError(path + ": anchor " + std::to_string(i) + " refers to a missing Gaussian");
        }
        a.u0 = Vec3(anchor->at(i, 1), anchor->at(i, 2), anchor->at(i, 3));
        a.n = Vec3(anchor->at(i, 4), anchor->at(i, 5), anchor->at(i, 6));
        ck.state.anchors.push_back(a);
    }

    if (!side.contains("config")) throw ParseError(side_path + ": missing 'config'");
    ck.config = train_config_from_json(side["config"], side_path + ": config");
    ck.state.iteration = required<std::int64_t>(side, "iteration", side_path);
    ck.state.extent = required<double>(side, "extent", side_path);

    const json opt = side.value("optimizer", json::object());
    AdamOptions ao;
    ao.beta1 = opt.value("beta1", ao.beta1);
    ao.beta2 = opt.value("beta2", ao.beta2);
    ao.epsilon = opt.value("epsilon", ao.epsilon);
    ck.state.adam = Adam(ck.state.scene, ao);
    ck.state.adam.set_steps(opt.value("steps", std::int64_t{0}));
    const ply::Element* m = f.find("adam_m");
    const ply::Element* v = f.find("adam_v");
    if (m && v) {
        GaussianScene mm = read_gaussians(*m, degree, path), vv = read_gaussians(*v, degree, path);
        if (mm.size() != ck.state.scene.size() || vv.size() != ck.state.scene.size()) {
            throw IntegrityError(path + ": optimizer moments do not match the Gaussian count");
        }
        ck.state.adam.set_moments(std::move(mm), std::move(vv));
    }

    if (side.contains("suggested_start_pose")) {
        const json& p = side["suggested_start_pose"];
        try {
            const auto q = p.at("quaternion").get<std::vector<double>>();
            const auto t = p.at("translation").get<std::vector<double>>();
            if (q.size() != 4 || t.size() != 3) throw ParseError(side_path + ": malformed suggested_start_pose");
            ck.start_pose.quaternion = Vec4(q[0], q[1], q[2], q[3]);
            ck.start_pose.translation = Vec3(t[0], t[1], t[2]);
        } catch (const json::exception&) {
            throw ParseError(side_path + ": malformed suggested_start_pose");
        }
    } else {
        ck.start_pose = default_start_pose(ck.state.scene);
    }
    return ck;
}

} // namespace panosplat
