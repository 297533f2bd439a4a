#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vilegal {

// --- little-endian binary primitives -------------------------------------
// All on-disk formats (VLBM/VLDE/VLCI) are little-endian regardless of host.

void put_u8(std::ostream& out, std::uint8_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
void put_bytes(std::ostream& out, const void* data, std::size_t n);
void put_string(std::ostream& out, std::string_view s); // u32 length + bytes

std::uint8_t get_u8(std::istream& in);
std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);
double get_f64(std::istream& in);
void get_bytes(std::istream& in, void* data, std::size_t n);
std::string get_string(std::istream& in);

void expect_magic(std::istream& in, const char magic[4], const std::string& what);

// --- artifact metadata -----------------------------------------------------
// Every artifact the pipeline writes embeds one metadata line so a run can be
// reproduced exactly: tool version, hash of the effective configuration, seed.

struct ArtifactMeta {
    std::string tool_version;
    std::string config_hash; // hex
    std::uint64_t seed = 0;

    // "tool=vilegal version=0.1.0 config=<hex> seed=<n>"
    std::string to_string() const;
    // "# tool=vilegal ..." comment line for text artifacts.
    std::string to_comment_line() const;
    static std::optional<ArtifactMeta> parse(std::string_view line);
};

ArtifactMeta make_meta(std::string_view config_hash, std::uint64_t seed);

// --- text files --------------------------------------------------------------

// Whole file as lines, universal newlines. Throws DataError if unreadable.
std::vector<std::string> read_lines(const std::string& path);

// Open for writing, throw DataError on failure.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace vilegal
