#pragma once

// Scene manifest: posed panoramas with optional layout and depth files, and named splits.
//
// {
//   "camera_height_m": 1.6,
//   "linear_color": false,
//   "views": [{"id": "v0", "image": "images/v0.png",
//              "pose": {"quaternion": [w, x, y, z], "translation": [x, y, z]},
//              "layout": "layouts/v0.json", "depth": "depth/v0.pfm"}],
//   "splits": {"train": ["v0"], "test": []}
// }
//
// The pose maps world to camera: t = R(q) x + translation. Relative paths resolve against the
// manifest's directory.

#include "panosplat/camera.hpp"
#include "panosplat/pipeline.hpp"
#include "panosplat/trainer.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace panosplat {

struct ManifestView {
    std::string id;
    std::string image; ///< resolved path
    Vec4 quaternion = Vec4(1, 0, 0, 0);
    Vec3 translation = Vec3::Zero();
    std::optional<std::string> layout;
    std::optional<std::string> depth;
};

struct SceneManifest {
    std::string path;
    /// Nominal camera height; layout files carry their own per-view height.
    double camera_height = 1.6;
    bool linear_color = false;
    std::vector<ManifestView> views;
    std::map<std::string, std::vector<std::string>> splits;

    /// Indices of the views in a split; "all" names every view, and "train" defaults to every
    /// view when the manifest has no train split. Unknown names raise ValidationError.
    [[nodiscard]] std::vector<std::size_t> split(const std::string& name) const;
};

/// Parses and validates: unique ids, unit quaternions (1e-6), existing files, disjoint splits
/// naming known views. Messages name the offending JSON path and file.
SceneManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SceneManifest& m);

/// Camera of a view for an image of the given size (validated).
PanoramaCamera view_camera(const ManifestView& v, int height, int width);

/// Loads images (and layouts/depths when present) for the given view indices.
std::vector<PanoramaInput> load_inputs(const SceneManifest& m, const std::vector<std::size_t>& which,
                                       bool with_priors = true);
std::vector<TrainView> load_train_views(const SceneManifest& m, const std::vector<std::size_t>& which);

} // namespace panosplat
