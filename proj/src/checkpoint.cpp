#include "softalign/checkpoint.hpp"

#include "softalign/errors.hpp"
#include "softalign/rng.hpp"
#include "softalign/text_io.hpp"

#include <bit>
#include <cstring>
#include <type_traits>

namespace softalign {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "SOFTALGN";
constexpr std::uint32_t kEncoderKind = 1;
constexpr std::uint32_t kRerankerKind = 2;

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void bytes(std::string_view s) { buf_.append(s); }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string_view origin) : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw CorruptionError(std::string(origin_) + ": truncated (needed " + std::to_string(n) +
                            " bytes at offset " + std::to_string(pos_) + ")");
    }
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::string_view origin_;
  std::size_t pos_ = 0;
};

template <typename Params>
void write_tensors(Writer& w, const Params& params) {
  std::uint32_t count = 0;
  params.visit([&](std::string_view, const auto&) { ++count; });
  w.pod(count);
  params.visit([&](std::string_view name, const auto& t) {
    w.pod(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.pod(static_cast<std::uint64_t>(t.rows()));
    w.pod(static_cast<std::uint64_t>(t.cols()));
    w.bytes(std::string_view(reinterpret_cast<const char*>(t.data()), sizeof(double) * t.size()));
  });
}

template <typename Params>
void read_tensors(Reader& r, Params& params, std::string_view origin) {
  std::uint32_t expected = 0;
  params.visit([&](std::string_view, const auto&) { ++expected; });
  const auto count = r.pod<std::uint32_t>();
  if (count != expected) {
    throw CorruptionError(std::string(origin) + ": expected " + std::to_string(expected) +
                          " tensors, found " + std::to_string(count));
  }
  params.visit([&](std::string_view name, auto& t) {
    const auto len = r.pod<std::uint32_t>();
    const auto stored = r.take(len);
    if (stored != name) {
      throw CorruptionError(std::string(origin) + ": expected tensor '" + std::string(name) +
                            "', found '" + std::string(stored) + "'");
    }
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols())) {
      throw CorruptionError(std::string(origin) + ": tensor '" + std::string(name) +
                            "' has inconsistent shape");
    }
    const auto raw = r.take(sizeof(double) * static_cast<std::size_t>(t.size()));
    std::memcpy(t.data(), raw.data(), raw.size());
  });
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kMagic);
  w.pod(checkpoint.format_version);
  std::visit(
      [&](const auto& params) {
        using P = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<P, EncoderParams>) {
          w.pod(kEncoderKind);
          w.pod(checkpoint.rng_seed);
          w.pod(std::uint32_t{3});
          w.pod(std::int32_t{params.dims.raw});
          w.pod(std::int32_t{params.dims.hidden});
          w.pod(std::int32_t{params.dims.emb});
        } else {
          w.pod(kRerankerKind);
          w.pod(checkpoint.rng_seed);
          w.pod(std::uint32_t{2});
          w.pod(std::int32_t{params.dims.emb});
          w.pod(std::int32_t{params.dims.hidden});
        }
        w.pod(static_cast<std::uint64_t>(checkpoint.config.size()));
        w.bytes(checkpoint.config);
        write_tensors(w, params);
      },
      checkpoint.params);
  const std::uint64_t sum = fnv1a64(w.buffer());
  w.pod(sum);
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(std::string_view bytes, std::string_view origin) {
  Reader r(bytes, origin);
  if (r.take(kMagic.size()) != kMagic) {
    throw CorruptionError(std::string(origin) + ": not a checkpoint (bad magic)");
  }
  Checkpoint c;
  c.format_version = r.pod<std::uint32_t>();
  if (c.format_version != kCheckpointVersion) {
    throw VersionError(std::string(origin) + ": checkpoint format version " +
                       std::to_string(c.format_version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < sizeof(std::uint64_t)) throw CorruptionError(std::string(origin) + ": truncated");
  const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));

  const auto kind = r.pod<std::uint32_t>();
  c.rng_seed = r.pod<std::uint64_t>();
  const auto n_dims = r.pod<std::uint32_t>();
  if (n_dims > 8) throw CorruptionError(std::string(origin) + ": implausible dimension count");
  std::vector<std::int32_t> dims(n_dims);
  for (auto& d : dims) d = r.pod<std::int32_t>();
  const auto config_len = r.pod<std::uint64_t>();
  if (config_len > r.remaining()) throw CorruptionError(std::string(origin) + ": truncated config");
  c.config = std::string(r.take(static_cast<std::size_t>(config_len)));

  double param_count = 0.0;
  for (const auto d : dims) {
    if (d < 1 || d > (1 << 16)) throw CorruptionError(std::string(origin) + ": implausible dimension");
  }
  if (kind == kEncoderKind && n_dims == 3) {
    param_count = double(dims[1]) * (dims[0] + kModalityCount + 1) + double(dims[2]) * (dims[1] + 1);
  } else if (kind == kRerankerKind && n_dims == 2) {
    param_count = double(dims[1]) * (3.0 * dims[0] + 2) + 1;
  }
  if (param_count * sizeof(double) > static_cast<double>(r.remaining())) {
    throw CorruptionError(std::string(origin) + ": truncated parameter data");
  }

  try {
    if (kind == kEncoderKind && n_dims == 3) {
      auto p = EncoderParams::zeros(EncoderDims{dims[0], dims[1], dims[2]});
      read_tensors(r, p, origin);
      c.params = std::move(p);
    } else if (kind == kRerankerKind && n_dims == 2) {
      auto p = RerankerParams::zeros(RerankerDims{dims[0], dims[1]});
      read_tensors(r, p, origin);
      c.params = std::move(p);
    } else {
      throw CorruptionError(std::string(origin) + ": unknown model kind " + std::to_string(kind));
    }
  } catch (const std::invalid_argument& e) {
    throw CorruptionError(std::string(origin) + ": " + e.what());
  }

  const auto stored = r.pod<std::uint64_t>();
  if (r.remaining() != 0) throw CorruptionError(std::string(origin) + ": trailing bytes");
  if (stored != fnv1a64(body)) throw CorruptionError(std::string(origin) + ": checksum mismatch");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  text::atomic_write(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(text::read_file(path), path.string());
}

}  // namespace softalign
