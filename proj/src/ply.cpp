#include "ply.hpp"

#include "panosplat/error.hpp"
#include "panosplat/io.hpp"

#include <bit>
#include <cstring>
#include <sstream>

namespace panosplat::ply {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

struct TypeInfo {
    Type type;
    const char* name;
    const char* alias;
    std::size_t size;
};

constexpr TypeInfo kTypes[] = {
    {Type::i8, "char", "int8", 1},     {Type::u8, "uchar", "uint8", 1},    {Type::i16, "short", "int16", 2},
    {Type::u16, "ushort", "uint16", 2}, {Type::i32, "int", "int32", 4},     {Type::u32, "uint", "uint32", 4},
    {Type::f32, "float", "float32", 4}, {Type::f64, "double", "float64", 8},
};

const TypeInfo& info(Type t) {
    for (const auto& i : kTypes) {
        if (i.type == t) return i;
    }
    throw InvalidParameterError("ply: unknown type");
}

template <typename T>
void put(std::string& out, double v) {
    const T x = static_cast<T>(v);
    char buf[sizeof(T)];
    std::memcpy(buf, &x, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
double get(const char* p) {
    T x;
    std::memcpy(&x, p, sizeof(T));
    return static_cast<double>(x);
}

void put_value(std::string& out, Type t, double v) {
    switch (t) {
    case Type::i8: put<std::int8_t>(out, v); break;
    case Type::u8: put<std::uint8_t>(out, v); break;
    case Type::i16: put<std::int16_t>(out, v); break;
    case Type::u16: put<std::uint16_t>(out, v); break;
    case Type::i32: put<std::int32_t>(out, v); break;
    case Type::u32: put<std::uint32_t>(out, v); break;
    case Type::f32: put<float>(out, v); break;
    case Type::f64: put<double>(out, v); break;
    }
}

double get_value(Type t, const char* p) {
    switch (t) {
    case Type::i8: return get<std::int8_t>(p);
    case Type::u8: return get<std::uint8_t>(p);
    case Type::i16: return get<std::int16_t>(p);
    case Type::u16: return get<std::uint16_t>(p);
    case Type::i32: return get<std::int32_t>(p);
    case Type::u32: return get<std::uint32_t>(p);
    case Type::f32: return get<float>(p);
    case Type::f64: return get<double>(p);
    }
    return 0.0;
}

} // namespace

std::size_t Element::column(const std::string& prop) const {
    for (std::size_t i = 0; i < properties.size(); ++i) {
        if (properties[i].name == prop) return i;
    }
    throw ParseError("ply: element '" + name + "' has no property '" + prop + "'");
}

bool Element::has(const std::string& prop) const {
    for (const auto& p : properties) {
        if (p.name == prop) return true;
    }
    return false;
}

const Element* File::find(const std::string& name) const {
    for (const auto& e : elements) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::string encode(const File& f) {
    std::ostringstream head;
    head << "ply\nformat binary_little_endian 1.0\n";
    for (const auto& c : f.comments) head << "comment " << c << "\n";
    for (const auto& e : f.elements) {
        if (!e.properties.empty() && e.values.size() % e.properties.size() != 0) {
            throw InvalidParameterError("ply: element '" + e.name + "' has a partial row");
        }
        head << "element " << e.name << " " << e.count() << "\n";
        for (const auto& p : e.properties) head << "property " << info(p.type).name << " " << p.name << "\n";
    }
    head << "end_header\n";
    std::string out = head.str();
    for (const auto& e : f.elements) {
        const std::size_t w = e.width();
        for (std::size_t k = 0; k < e.values.size(); ++k) put_value(out, e.properties[k % w].type, e.values[k]);
    }
    return out;
}

File decode(const std::string& bytes, const std::string& source) {
    const std::string end_marker = "end_header\n";
    const std::size_t end = bytes.find(end_marker);
    if (bytes.rfind("ply\n", 0) != 0 || end == std::string::npos) {
        throw ParseError(source + ": not a PLY file");
    }
    std::istringstream head(bytes.substr(0, end));
    File f;
    std::string line;
    std::getline(head, line);
    bool format_seen = false;
    while (std::getline(head, line)) {
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian") throw ParseError(source + ": unsupported PLY format '" + fmt + "'");
            format_seen = true;
        } else if (kw == "comment" || kw == "obj_info") {
            f.comments.push_back(line.size() > kw.size() + 1 ? line.substr(kw.size() + 1) : "");
        } else if (kw == "element") {
            Element e;
            long long n = -1;
            ls >> e.name >> n;
            if (e.name.empty() || n < 0) throw ParseError(source + ": bad element line '" + line + "'");
            e.values.resize(static_cast<std::size_t>(n)); // row count until properties are known
            f.elements.push_back(std::move(e));
        } else if (kw == "property") {
            if (f.elements.empty()) throw ParseError(source + ": property before any element");
            std::string type, name;
            ls >> type >> name;
            if (type == "list") throw ParseError(source + ": list properties are not supported");
            bool found = false;
            for (const auto& t : kTypes) {
                if (type == t.name || type == t.alias) {
                    f.elements.back().properties.push_back({name, t.type});
                    found = true;
                }
            }
            if (!found || name.empty()) throw ParseError(source + ": bad property line '" + line + "'");
        } else if (!kw.empty()) {
            throw ParseError(source + ": unknown PLY header keyword '" + kw + "'");
        }
    }
    if (!format_seen) throw ParseError(source + ": PLY format line missing");

    std::size_t pos = end + end_marker.size();
    for (auto& e : f.elements) {
        const std::size_t rows = e.values.size();
        std::size_t row_bytes = 0;
        for (const auto& p : e.properties) row_bytes += info(p.type).size;
        if (rows > 0 && row_bytes == 0) throw ParseError(source + ": element '" + e.name + "' has no properties");
        if (row_bytes > 0 && rows > (bytes.size() - pos) / row_bytes) {
            throw IntegrityError(source + ": truncated PLY body in element '" + e.name + "'");
        }
        e.values.assign(rows * e.properties.size(), 0.0);
        std::size_t k = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            for (const auto& p : e.properties) {
                e.values[k++] = get_value(p.type, bytes.data() + pos);
                pos += info(p.type).size;
            }
        }
    }
    if (pos != bytes.size()) throw IntegrityError(source + ": trailing bytes after PLY body");
    return f;
}

void write(const std::string& path, const File& f) { write_file(path, encode(f)); }

File read(const std::string& path) { return decode(read_file(path), path); }

} // namespace panosplat::ply
