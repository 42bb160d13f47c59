#pragma once

// Minimal binary little-endian PLY reader/writer for scalar properties.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace panosplat::ply {

enum class Type : std::uint8_t { i8, u8, i16, u16, i32, u32, f32, f64 };

struct Property {
    std::string name;
    Type type = Type::f64;
};

/// Values are held as doubles, row-major; every supported type converts exactly.
struct Element {
    std::string name;
    std::vector<Property> properties;
    std::vector<double> values;

    [[nodiscard]] std::size_t width() const { return properties.size(); }
    [[nodiscard]] std::size_t count() const { return properties.empty() ? 0 : values.size() / properties.size(); }
    /// Column index of `prop`; throws ParseError when absent.
    [[nodiscard]] std::size_t column(const std::string& prop) const;
    [[nodiscard]] bool has(const std::string& prop) const;
    [[nodiscard]] double at(std::size_t row, std::size_t col) const { return values[row * width() + col]; }
};

struct File {
    std::vector<std::string> comments;
    std::vector<Element> elements;

    /// Element by name or nullptr.
    [[nodiscard]] const Element* find(const std::string& name) const;
};

/// Serialized bytes of a PLY file.
std::string encode(const File& f);
/// Throws ParseError for malformed headers or unsupported formats, IntegrityError when the
/// body is shorter or longer than the header declares. `source` names the input in messages.
File decode(const std::string& bytes, const std::string& source);

void write(const std::string& path, const File& f);
File read(const std::string& path);

} // namespace panosplat::ply
