#include "vilegal/io.hpp"

#include "vilegal/errors.hpp"
#include "vilegal/version.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "big-endian hosts would need byte swapping in io.cpp");

namespace vilegal {

void put_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out.good()) throw DataError("write failed");
}

void put_u8(std::ostream& out, std::uint8_t v) { put_bytes(out, &v, 1); }
void put_u32(std::ostream& out, std::uint32_t v) { put_bytes(out, &v, 4); }
void put_u64(std::ostream& out, std::uint64_t v) { put_bytes(out, &v, 8); }
void put_f32(std::ostream& out, float v) { put_bytes(out, &v, 4); }
void put_f64(std::ostream& out, double v) { put_bytes(out, &v, 8); }

void put_string(std::ostream& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

void get_bytes(std::istream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("truncated read");
}

std::uint8_t get_u8(std::istream& in) { std::uint8_t v; get_bytes(in, &v, 1); return v; }
std::uint32_t get_u32(std::istream& in) { std::uint32_t v; get_bytes(in, &v, 4); return v; }
std::uint64_t get_u64(std::istream& in) { std::uint64_t v; get_bytes(in, &v, 8); return v; }
float get_f32(std::istream& in) { float v; get_bytes(in, &v, 4); return v; }
double get_f64(std::istream& in) { double v; get_bytes(in, &v, 8); return v; }

std::string get_string(std::istream& in) {
    std::uint32_t n = get_u32(in);
    if (n > (1u << 30)) throw DataError("unreasonable string length in binary file");
    std::string s(n, '\0');
    if (n > 0) get_bytes(in, s.data(), n);
    return s;
}

void expect_magic(std::istream& in, const char magic[4], const std::string& what) {
    char buf[4];
    get_bytes(in, buf, 4);
    if (std::memcmp(buf, magic, 4) != 0) {
        throw DataError("bad magic, not a " + what + " file");
    }
}

std::string ArtifactMeta::to_string() const {
    std::ostringstream os;
    os << "tool=" << kToolName << " version=" << tool_version << " config=" << config_hash
       << " seed=" << seed;
    return os.str();
}

std::string ArtifactMeta::to_comment_line() const { return "# " + to_string(); }

std::optional<ArtifactMeta> ArtifactMeta::parse(std::string_view line) {
    if (line.starts_with("# ")) line.remove_prefix(2);
    if (!line.starts_with("tool=")) return std::nullopt;
    ArtifactMeta meta;
    std::istringstream is{std::string(line)};
    std::string field;
    while (is >> field) {
        auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        std::string key = field.substr(0, eq);
        std::string value = field.substr(eq + 1);
        if (key == "version") meta.tool_version = value;
        else if (key == "config") meta.config_hash = value;
        else if (key == "seed") meta.seed = std::strtoull(value.c_str(), nullptr, 10);
    }
    return meta;
}

ArtifactMeta make_meta(std::string_view config_hash, std::uint64_t seed) {
    return ArtifactMeta{kToolVersion, std::string(config_hash), seed};
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out.good()) throw DataError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace vilegal
