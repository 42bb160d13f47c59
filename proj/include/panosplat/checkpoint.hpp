#pragma once

// Checkpoints: a binary PLY with every Gaussian parameter (doubles), the layout anchors and the
// optimizer moments, plus a JSON sidecar with the format version, checksum, iteration, extent,
// optimizer metadata, training configuration and a suggested viewer start pose.

#include "panosplat/trainer.hpp"

#include <optional>
#include <string>

namespace panosplat {

inline constexpr int kCheckpointVersion = 1;

struct StartPose {
    Vec4 quaternion = Vec4(1, 0, 0, 0); ///< world to camera, (w, x, y, z)
    Vec3 translation = Vec3::Zero();
};

struct Checkpoint {
    TrainState state;
    TrainConfig config;
    StartPose start_pose;
};

/// Sidecar location: the checkpoint path with its extension replaced by ".json".
std::string sidecar_path(const std::string& checkpoint_path);

/// Writes the PLY and then the sidecar. Parameters round-trip bit-exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws VersionError for an unknown format_version, IntegrityError for truncated or altered
/// files (size or checksum mismatch), ParseError for malformed content.
Checkpoint load_checkpoint(const std::string& path);

/// Start pose looking from the center of the Gaussians' bounding box with identity rotation.
StartPose default_start_pose(const GaussianScene& scene);

} // namespace panosplat
