#ifndef SCENE_LATENT_IO_H_
#define SCENE_LATENT_IO_H_

// Small text and file helpers shared by the loaders and writers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace scene_latent {

using Json = nlohmann::json;

// Seconds since the Unix epoch, UTC.
using UnixSeconds = std::int64_t;

// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional fractional part (truncated)
// and a "Z" or "+00:00" suffix. Throws ParseError otherwise.
UnixSeconds ParseIso8601(std::string_view text);
std::string FormatIso8601(UnixSeconds t);

// Shortest representation that parses back to the same double.
std::string FormatDouble(double value);
double ParseDouble(std::string_view text, std::string_view context);
long long ParseInteger(std::string_view text, std::string_view context);

std::vector<std::string_view> SplitFields(std::string_view line, char sep = ',');
std::string_view TrimLine(std::string_view line);

// RFC 4180 style: fields may be double-quoted, "" escapes a quote.
std::vector<std::string> ParseCsvRecord(std::string_view line);
std::string QuoteCsvField(std::string_view field);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view content);

// One JSON value per non-blank line.
std::vector<Json> ReadJsonLines(const std::filesystem::path& path);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string Fnv1aHex(std::string_view data);

}  // namespace scene_latent

#endif  // SCENE_LATENT_IO_H_
