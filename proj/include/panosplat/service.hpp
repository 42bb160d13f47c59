#pragma once

// Rendering service shared by the command-line tools and the HTTP server: request parsing,
// encoded frames, scene metadata, frame timing statistics and equirectangular test vectors.

#include "panosplat/checkpoint.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace panosplat {

enum class ImageFormat { png, jpeg };

struct RenderRequest {
    Vec4 quaternion = Vec4(1, 0, 0, 0); ///< world to camera, (w, x, y, z), unit
    Vec3 translation = Vec3::Zero();
    int height = 512;
    int width = 1024;
    ImageFormat format = ImageFormat::png;
    int quality = 90; ///< JPEG only
};

inline constexpr int kMaxRenderHeight = 4096;

/// Parses qw qx qy qz tx ty tz h w [format] [quality]. Throws InvalidParameterError naming the
/// field for missing or malformed values, quaternions whose norm is off by more than 1e-3,
/// sizes other than w == 2h with 2 <= h <= kMaxRenderHeight, or quality outside [1, 100].
/// Unknown keys are rejected.
RenderRequest parse_render_request(const std::map<std::string, std::string>& query);

/// The quaternion is renormalized before use.
PanoramaCamera request_camera(const RenderRequest& req);

/// Encoded image bytes for a request. Deterministic for a fixed scene and settings.
std::string render_frame(const GaussianScene& scene, const RenderRequest& req, const RenderSettings& settings);

std::string mime_type(ImageFormat f);

/// {"gaussian_count", "sh_degree", "iteration", "bbox": {"min", "max"},
///  "suggested_start_pose": {"quaternion", "translation"}}.
nlohmann::json scene_meta(const Checkpoint& ckpt);

struct FrameStats {
    std::size_t frames = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p99_ms = 0.0; ///< nearest rank
    double fps = 0.0;    ///< 1000 / mean_ms
};

/// Throws InvalidParameterError for an empty sample.
FrameStats frame_stats(std::vector<double> times_ms);

/// Times `frames` renders from `cam`. Throws InvalidParameterError when frames == 0.
FrameStats bench_render(const GaussianScene& scene, const PanoramaCamera& cam, const RenderSettings& settings,
                        std::size_t frames);

/// Pixel, angle and direction triples plus camera-space point projections for a panorama of the
/// given size, covering the seam, the poles and pseudo-random samples.
nlohmann::json equirect_test_vectors(int height, int width, std::uint64_t seed = 7, int random_count = 64);

} // namespace panosplat
