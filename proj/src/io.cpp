#include "panosplat/io.hpp"

#include "panosplat/error.hpp"
#include "ply.hpp"

#include <json.hpp>
#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace panosplat {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError(path + ": read failed");
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    const fs::path target(path);
    if (target.has_parent_path() && !fs::exists(target.parent_path())) {
        throw IoError(path + ": directory does not exist");
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(path + ": cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError(path + ": write failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError(path + ": rename failed: " + ec.message());
}

double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

namespace {

// ---- PNG ----

struct PngReadBuffer {
    const std::string* bytes;
    std::size_t pos;
};

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
    auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
    if (buf->pos + n > buf->bytes->size()) png_error(png, "unexpected end of data");
    std::memcpy(out, buf->bytes->data() + buf->pos, n);
    buf->pos += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
    static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), n);
}

void png_flush_fn(png_structp) {}

struct DecodedPng {
    int height = 0, width = 0, channels = 0, bit_depth = 0;
    std::vector<std::uint16_t> samples; ///< interleaved, native range of the bit depth
    std::vector<std::pair<std::string, std::string>> text;
};

bool is_png(const std::string& bytes) {
    return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

bool is_jpeg(const std::string& bytes) {
    return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
           static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF;
}

DecodedPng decode_png(const std::string& bytes, const std::string& source) {
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw IoError(source + ": cannot initialize PNG reader");
    png_infop info = png_create_info_struct(png);
    DecodedPng out;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(source + ": invalid PNG: " + err);
    }
    PngReadBuffer buf{&bytes, 0};
    png_set_read_fn(png, &buf, png_read_fn);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_swap(png); // little-endian samples
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int r = 0; r < out.height; ++r) rows[static_cast<std::size_t>(r)] = raw.data() + rowbytes * r;
    png_read_image(png, rows.data());
    png_read_end(png, info);
    png_textp text = nullptr;
    int n_text = 0;
    png_get_text(png, info, &text, &n_text);
    for (int i = 0; i < n_text; ++i) out.text.emplace_back(text[i].key, text[i].text ? text[i].text : "");
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
    out.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (depth == 16) {
            std::uint16_t v;
            std::memcpy(&v, raw.data() + 2 * k, 2);
            out.samples[k] = v;
        } else {
            out.samples[k] = raw[k];
        }
    }
    return out;
}

/// libpng calls only; keeps C++ objects out of the setjmp frame. Returns false on failure.
bool write_png_rows(std::string* out, std::string* err, png_uint_32 w, png_uint_32 h, int bit_depth, int color,
                    png_bytep* rows, png_textp text, int n_text) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_fn, png_warning_fn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, out, png_write_fn, png_flush_fn);
    png_set_IHDR(png, info, w, h, bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    if (n_text > 0) png_set_text(png, info, text, n_text);
    png_write_info(png, info);
    png_write_image(png, rows);
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return true;
}

std::string encode_png_samples(int h, int w, int channels, int bit_depth, const std::vector<std::uint16_t>& s,
                               const std::vector<std::pair<std::string, std::string>>& text) {
    const std::size_t bps = bit_depth == 16 ? 2 : 1;
    std::vector<unsigned char> raw(s.size() * bps);
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (bps == 2) {
            raw[2 * k] = static_cast<unsigned char>(s[k] >> 8); // PNG stores big-endian
            raw[2 * k + 1] = static_cast<unsigned char>(s[k] & 0xFF);
        } else {
            raw[k] = static_cast<unsigned char>(s[k]);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    const std::size_t rowbytes = static_cast<std::size_t>(w) * channels * bps;
    for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = raw.data() + rowbytes * r;
    std::vector<png_text> chunks(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        chunks[i] = png_text{};
        chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
        chunks[i].key = const_cast<char*>(text[i].first.c_str());
        chunks[i].text = const_cast<char*>(text[i].second.c_str());
    }
    std::string out, err;
    if (!write_png_rows(&out, &err, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
                        channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows.data(), chunks.data(),
                        static_cast<int>(chunks.size()))) {
        throw IoError("PNG encoding failed: " + err);
    }
    return out;
}

// ---- JPEG ----

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* e = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, e->message);
    std::longjmp(e->jump, 1);
}

Image decode_jpeg(const std::string& bytes, const std::string& source) {
    jpeg_decompress_struct cinfo{};
    JpegError jerr{};
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_error_exit;
    Image img;
    std::vector<unsigned char> row;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ParseError(source + ": invalid JPEG: " + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    img = Image(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width), 3);
    row.resize(static_cast<std::size_t>(cinfo.output_width) * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        const int r = static_cast<int>(cinfo.output_scanline);
        unsigned char* p = row.data();
        jpeg_read_scanlines(&cinfo, &p, 1);
        for (int c = 0; c < img.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = row[static_cast<std::size_t>(3 * c + ch)] / 255.0;
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

std::uint16_t quantize(double v, double max) {
    if (!std::isfinite(v)) v = 0.0;
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * max));
}

std::vector<std::uint16_t> quantize_image(const Image& img, int bit_depth) {
    if (img.channels != 1 && img.channels != 3) throw InvalidParameterError("PNG output needs 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16) throw InvalidParameterError("PNG bit depth must be 8 or 16");
    const double max = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<std::uint16_t> s(img.data.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = quantize(img.data[k], max);
    return s;
}

json parse_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": invalid JSON: " + e.what());
    }
}

std::vector<double> real_array(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_array()) throw ValidationError(where + ": '" + key + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j[key].size(); ++i) {
        const auto& v = j[key][i];
        if (!v.is_number()) {
            throw ValidationError(where + ": '" + key + "[" + std::to_string(i) + "]' must be a number");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace

Image load_image(const std::string& path) {
    const std::string bytes = read_file(path);
    if (is_jpeg(bytes)) return decode_jpeg(bytes, path);
    if (!is_png(bytes)) throw ParseError(path + ": not a PNG or JPEG image");
    const DecodedPng p = decode_png(bytes, path);
    const double max = p.bit_depth == 16 ? 65535.0 : 255.0;
    Image img(p.height, p.width, 3);
    const int color_channels = p.channels >= 3 ? 3 : 1;
    for (int r = 0; r < p.height; ++r) {
        for (int c = 0; c < p.width; ++c) {
            const std::size_t base = (static_cast<std::size_t>(r) * p.width + c) * p.channels;
            for (int ch = 0; ch < 3; ++ch) {
                img.at(r, c, ch) = p.samples[base + static_cast<std::size_t>(color_channels == 3 ? ch : 0)] / max;
            }
        }
    }
    return img;
}

Image load_equirect(const std::string& path, bool linear) {
    Image img = load_image(path);
    if (img.width != 2 * img.height) {
        throw ValidationError(path + ": equirectangular image must be 2:1, got " + std::to_string(img.height) + "x" +
                              std::to_string(img.width));
    }
    if (linear) {
        for (double& v : img.data) v = srgb_to_linear(v);
    }
    return img;
}

std::string encode_png(const Image& img, int bit_depth) {
    return encode_png_samples(img.height, img.width, img.channels, bit_depth, quantize_image(img, bit_depth), {});
}

void save_png(const std::string& path, const Image& img, int bit_depth) { write_file(path, encode_png(img, bit_depth)); }

std::string encode_jpeg(const Image& img, int quality) {
    if (img.channels != 3) throw InvalidParameterError("JPEG output needs 3 channels");
    if (quality < 1 || quality > 100) throw InvalidParameterError("JPEG quality must be in [1, 100]");
    jpeg_compress_struct cinfo{};
    JpegError jerr{};
    cinfo.err = jpeg_std_error(&jerr.mgr);
    jerr.mgr.error_exit = jpeg_error_exit;
    unsigned char* mem = nullptr;
    unsigned long size = 0;
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(mem);
        throw IoError(std::string("JPEG encoding failed: ") + jerr.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &mem, &size);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        const int r = static_cast<int>(cinfo.next_scanline);
        for (int c = 0; c < img.width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                row[static_cast<std::size_t>(3 * c + ch)] = static_cast<unsigned char>(quantize(img.at(r, c, ch), 255.0));
            }
        }
        unsigned char* p = row.data();
        jpeg_write_scanlines(&cinfo, &p, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::string out(reinterpret_cast<const char*>(mem), size);
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    return out;
}

// ---- depth ----

Image load_depth(const std::string& path) {
    const std::string bytes = read_file(path);
    if (is_png(bytes)) {
        const DecodedPng p = decode_png(bytes, path);
        if (p.bit_depth != 16 || p.channels != 1) throw ParseError(path + ": depth PNG must be 16-bit single channel");
        double scale = 0.0;
        for (const auto& [k, v] : p.text) {
            if (k == "depth_scale") {
                try {
                    scale = std::stod(v);
                } catch (const std::exception&) {
                    throw ParseError(path + ": depth_scale '" + v + "' is not a number");
                }
            }
        }
        if (!(scale > 0.0) || !std::isfinite(scale)) throw ParseError(path + ": missing or invalid depth_scale entry");
        Image d(p.height, p.width, 1);
        for (std::size_t k = 0; k < d.data.size(); ++k) d.data[k] = p.samples[k] * scale;
        return d;
    }
    // PFM: "Pf" (gray) header, dimensions, scale (negative = little-endian), rows bottom to top.
    std::istringstream head(bytes);
    std::string magic;
    long long w = 0, h = 0;
    double scale = 0.0;
    head >> magic >> w >> h >> scale;
    if (!head || (magic != "Pf" && magic != "PF") || w <= 0 || h <= 0 || scale == 0.0) {
        throw ParseError(path + ": not a PFM or 16-bit PNG depth map");
    }
    head.get(); // single whitespace before the raster
    const auto offset = static_cast<std::size_t>(head.tellg());
    const int channels = magic == "PF" ? 3 : 1;
    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (bytes.size() - offset != count * 4) throw IntegrityError(path + ": PFM raster size does not match header");
    const bool little = scale < 0.0;
    Image d(static_cast<int>(h), static_cast<int>(w), 1);
    for (long long r = 0; r < h; ++r) {
        for (long long c = 0; c < w; ++c) {
            const std::size_t k = (static_cast<std::size_t>(h - 1 - r) * w + c) * channels;
            unsigned char b[4];
            std::memcpy(b, bytes.data() + offset + 4 * k, 4);
            if (!little) std::reverse(b, b + 4);
            float f;
            std::memcpy(&f, b, 4);
            d.at(static_cast<int>(r), static_cast<int>(c)) = f;
        }
    }
    return d;
}

void save_depth_pfm(const std::string& path, const Image& depth) {
    if (depth.channels != 1) throw InvalidParameterError("depth map must have one channel");
    std::string out = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
    for (int r = depth.height - 1; r >= 0; --r) {
        for (int c = 0; c < depth.width; ++c) {
            const auto f = static_cast<float>(depth.at(r, c));
            char b[4];
            std::memcpy(b, &f, 4);
            out.append(b, 4);
        }
    }
    write_file(path, out);
}

void save_depth_png16(const std::string& path, const Image& depth, double scale) {
    if (depth.channels != 1) throw InvalidParameterError("depth map must have one channel");
    if (!(scale > 0.0)) throw InvalidParameterError("depth scale must be positive");
    std::vector<std::uint16_t> s(depth.data.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double v = depth.data[k];
        if (!std::isfinite(v) || v <= 0.0) {
            s[k] = 0;
            continue;
        }
        const double q = std::round(v / scale);
        if (q > 65535.0) throw InvalidParameterError(path + ": depth exceeds the 16-bit range at this scale");
        s[k] = static_cast<std::uint16_t>(q);
    }
    std::ostringstream sc;
    sc.precision(17);
    sc << scale;
    write_file(path, encode_png_samples(depth.height, depth.width, 1, 16, s, {{"depth_scale", sc.str()}}));
}

// ---- layout ----

LayoutBoundary load_layout(const std::string& path) {
    const json j = parse_json(path);
    if (!j.is_object()) throw ValidationError(path + ": layout must be a JSON object");
    LayoutBoundary b;
    for (const char* key : {"width", "camera_height_m"}) {
        if (!j.contains(key) || !j[key].is_number()) {
            throw ValidationError(path + ": '" + key + "' must be a number");
        }
    }
    b.camera_height = j["camera_height_m"].get<double>();
    b.floor_lat = real_array(j, "floor_lat", path);
    b.ceil_lat = real_array(j, "ceil_lat", path);
    const auto width = j["width"].get<long long>();
    if (width != static_cast<long long>(b.floor_lat.size())) {
        throw ValidationError(path + ": 'width' is " + std::to_string(width) + " but floor_lat has " +
                              std::to_string(b.floor_lat.size()) + " entries");
    }
    try {
        b.validate();
    } catch (const InvalidBoundaryError& e) {
        throw InvalidBoundaryError(path + ": " + e.what());
    }
    return b;
}

void save_layout(const std::string& path, const LayoutBoundary& b) {
    b.validate();
    const json j = {{"width", b.width()}, {"camera_height_m", b.camera_height}, {"floor_lat", b.floor_lat},
                    {"ceil_lat", b.ceil_lat}};
    write_file(path, j.dump(1) + "\n");
}

// ---- point clouds ----

void save_point_cloud(const std::string& path, const PointCloud& cloud) {
    cloud.validate();
    ply::Element v;
    v.name = "vertex";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) v.properties.push_back({n, ply::Type::f64});
    for (const char* n : {"red", "green", "blue", "source"}) v.properties.push_back({n, ply::Type::u8});
    v.values.reserve(cloud.size() * v.width());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) v.values.push_back(cloud.points[i][k]);
        for (int k = 0; k < 3; ++k) v.values.push_back(cloud.normals[i][k]);
        for (int k = 0; k < 3; ++k) v.values.push_back(quantize(cloud.colors[i][k], 255.0));
        v.values.push_back(static_cast<double>(cloud.source[i]));
    }
    ply::File f;
    f.comments.push_back("panosplat point cloud; source 0 = layout, 1 = depth");
    f.elements.push_back(std::move(v));
    ply::write(path, f);
}

PointCloud load_point_cloud(const std::string& path) {
    const ply::File f = ply::read(path);
    const ply::Element* v = f.find("vertex");
    if (!v) throw ParseError(path + ": no vertex element");
    const std::size_t x = v->column("x"), y = v->column("y"), z = v->column("z");
    const bool has_normals = v->has("nx") && v->has("ny") && v->has("nz");
    const bool has_colors = v->has("red") && v->has("green") && v->has("blue");
    const bool has_source = v->has("source");
    const std::size_t nx = has_normals ? v->column("nx") : 0, ny = has_normals ? v->column("ny") : 0;
    const std::size_t nz = has_normals ? v->column("nz") : 0, red = has_colors ? v->column("red") : 0;
    const std::size_t green = has_colors ? v->column("green") : 0, blue = has_colors ? v->column("blue") : 0;
    const std::size_t src = has_source ? v->column("source") : 0;
    PointCloud c;
    for (std::size_t i = 0; i < v->count(); ++i) {
        const Vec3 p(v->at(i, x), v->at(i, y), v->at(i, z));
        Vec3 n(0, -1, 0);
        if (has_normals) {
            n = Vec3(v->at(i, nx), v->at(i, ny), v->at(i, nz));
            if (n.norm() > 0.0) n.normalize();
        }
        Vec3 col = Vec3::Constant(0.5);
        if (has_colors) col = Vec3(v->at(i, red), v->at(i, green), v->at(i, blue)) / 255.0;
        PointSource s = PointSource::depth;
        if (has_source) {
            const double sv = v->at(i, src);
            if (sv != 0.0 && sv != 1.0) {
                throw ValidationError(path + ": vertex " + std::to_string(i) + " has unknown source " + std::to_string(sv));
            }
            s = sv == 0.0 ? PointSource::layout : PointSource::depth;
        }
        c.push_back(p, n, col, s);
    }
    return c;
}

} // namespace panosplat
