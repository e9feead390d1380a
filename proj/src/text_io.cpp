#include "softalign/text_io.hpp"

#include "softalign/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace softalign::text {

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf, end);
}

double parse_double(std::string_view field, std::string_view context) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
    throw CorruptionError(std::string(context) + ": invalid number '" + std::string(field) + "'");
  }
  return value;
}

long long parse_int(std::string_view field, std::string_view context) {
  long long value = 0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
    throw CorruptionError(std::string(context) + ": invalid integer '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string header_line(std::string_view kind, int version, std::string_view fingerprint) {
  return "#softalign " + std::string(kind) + " v" + std::to_string(version) +
         " fingerprint=" + std::string(fingerprint);
}

Header parse_header(std::string_view line, std::string_view expected_kind, int expected_version) {
  const auto parts = split(line, ' ');
  if (parts.size() != 4 || parts[0] != "#softalign" || parts[2].size() < 2 || parts[2][0] != 'v' ||
      !parts[3].starts_with("fingerprint=")) {
    throw CorruptionError("line 1: missing or malformed artifact header");
  }
  Header h;
  h.kind = std::string(parts[1]);
  if (h.kind != expected_kind) {
    throw CorruptionError("line 1: expected a '" + std::string(expected_kind) + "' file, found '" +
                          h.kind + "'");
  }
  h.version = static_cast<int>(parse_int(parts[2].substr(1), "line 1"));
  if (h.version != expected_version) {
    throw VersionError("'" + h.kind + "' file has format version " + std::to_string(h.version) +
                       ", expected " + std::to_string(expected_version));
  }
  h.fingerprint = std::string(parts[3].substr(std::string_view("fingerprint=").size()));
  return h;
}

std::string format_vector(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

Vector parse_vector(std::string_view field, std::string_view context) {
  const auto parts = split(field, ' ');
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], context);
  }
  return v;
}

namespace {
constexpr std::string_view kCorpusKind = "corpus";
constexpr int kCorpusVersion = 1;
}  // namespace

void write_corpus(const std::filesystem::path& path, const Corpus& corpus,
                  std::string_view fingerprint) {
  std::string out = header_line(kCorpusKind, kCorpusVersion, fingerprint) + "\n";
  for (const auto& item : corpus.items()) {
    out += item.id;
    out += '\t';
    out += to_string(item.modality);
    out += '\t';
    out += format_vector(item.features);
    out += '\n';
  }
  for (const auto& q : corpus.queries()) {
    out += "@query\t" + q.query_id + "\t" + q.target_id + "\n";
  }
  atomic_write(path, out);
}

Corpus read_corpus(const std::filesystem::path& path, std::string* fingerprint) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw CorruptionError(path.string() + ": empty corpus file");
  const auto header = parse_header(line, kCorpusKind, kCorpusVersion);
  if (fingerprint) *fingerprint = header.fingerprint;

  std::vector<Item> items;
  std::vector<QueryTarget> queries;
  std::vector<std::string> candidates;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.filename().string() + " line " + std::to_string(line_no);
    const auto fields = split(line, '\t');
    if (fields.size() != 3) throw CorruptionError(ctx + ": expected 3 tab-separated fields");
    if (fields[0] == "@query") {
      queries.push_back({std::string(fields[1]), std::string(fields[2])});
      continue;
    }
    Item item;
    item.id = std::string(fields[0]);
    try {
      item.modality = parse_modality(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw CorruptionError(ctx + ": " + e.what());
    }
    item.features = parse_vector(fields[2], ctx);
    if (item.modality != Modality::query_text) candidates.push_back(item.id);
    items.push_back(std::move(item));
  }
  try {
    return Corpus(std::move(items), std::move(queries), std::move(candidates));
  } catch (const std::invalid_argument& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

}  // namespace softalign::text
