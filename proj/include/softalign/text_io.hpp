#pragma once

// Small helpers for the line-delimited artifact files.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "softalign/core_math.hpp"
#include "softalign/types.hpp"

namespace softalign::text {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
/// Strict parse of a whole field; throws CorruptionError with `context` on failure.
double parse_double(std::string_view field, std::string_view context);
long long parse_int(std::string_view field, std::string_view context);

std::vector<std::string_view> split(std::string_view line, char sep);

/// Writes `content` to a sibling temp file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// First line of every artifact: "#softalign <kind> v<version> fingerprint=<fp>".
std::string header_line(std::string_view kind, int version, std::string_view fingerprint);

struct Header {
  std::string kind;
  int version = 0;
  std::string fingerprint;
};

Header parse_header(std::string_view line, std::string_view expected_kind, int expected_version);

/// Space-separated vector of shortest-form doubles.
std::string format_vector(const Vector& v);
Vector parse_vector(std::string_view field, std::string_view context);

/// Corpus file: header, then one item per line "id\tmodality\tf1 f2 ...",
/// then one "@query\tquery_id\ttarget_id" line per query. Candidates are the
/// items whose modality is not query_text.
void write_corpus(const std::filesystem::path& path, const Corpus& corpus,
                  std::string_view fingerprint);
Corpus read_corpus(const std::filesystem::path& path, std::string* fingerprint = nullptr);

}  // namespace softalign::text
