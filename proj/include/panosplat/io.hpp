#pragma once

// File formats: PNG/JPEG images, PFM/PNG16 depth maps, layout boundary JSON, point-cloud PLY.

#include "panosplat/image.hpp"
#include "panosplat/layout.hpp"

#include <string>

namespace panosplat {

/// Whole file as bytes; throws IoError naming the path.
std::string read_file(const std::string& path);
/// Writes through a temporary file and a rename so readers never see a partial file.
void write_file(const std::string& path, const std::string& bytes);

/// PNG (8 or 16 bit, gray/RGB, alpha dropped) or JPEG, as an H x W x 3 image in [0, 1].
Image load_image(const std::string& path);
/// load_image plus the 2:1 equirectangular aspect check (ValidationError).
/// `linear` converts sRGB-encoded values to linear light.
Image load_equirect(const std::string& path, bool linear = false);

/// PNG bytes of a 1- or 3-channel image, values clamped to [0, 1] and rounded.
std::string encode_png(const Image& img, int bit_depth = 8);
std::string encode_jpeg(const Image& img, int quality = 90);
void save_png(const std::string& path, const Image& img, int bit_depth = 8);

double srgb_to_linear(double v);
double linear_to_srgb(double v);

/// Single-channel depth in meters; 0 or NaN marks invalid pixels. PFM, or 16-bit PNG whose
/// `depth_scale` text entry gives meters per unit (ParseError when it is missing).
Image load_depth(const std::string& path);
void save_depth_pfm(const std::string& path, const Image& depth);
/// Stores round(depth / scale); values beyond the 16-bit range raise InvalidParameterError.
void save_depth_png16(const std::string& path, const Image& depth, double scale = 1e-3);

/// {"width", "camera_height_m", "floor_lat": [...], "ceil_lat": [...]}, radians.
LayoutBoundary load_layout(const std::string& path);
void save_layout(const std::string& path, const LayoutBoundary& b);

/// Binary PLY with double x, y, z, nx, ny, nz, uchar red, green, blue and uchar source
/// (0 = layout, 1 = depth). A missing source property reads as depth.
void save_point_cloud(const std::string& path, const PointCloud& cloud);
PointCloud load_point_cloud(const std::string& path);

} // namespace panosplat
