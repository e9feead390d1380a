#pragma once

// Versioned binary container for encoder and reranker parameters.
//
// Layout (all integers and doubles little-endian):
//   char[8]  magic "SOFTALGN"
//   u32      format_version            (currently 1)
//   u32      kind                      (1 = encoder, 2 = reranker)
//   u64      rng_seed
//   u32      n_dims, then n_dims x i32 (encoder: raw hidden emb; reranker: emb hidden)
//   u64      config length, then that many bytes of JSON text
//   u32      n_tensors, then per tensor:
//              u32 name length, name bytes, u64 rows, u64 cols,
//              rows*cols f64 in column-major order
//   u64      FNV-1a 64 checksum of every preceding byte

#include "softalign/encoder.hpp"
#include "softalign/reranker.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

namespace softalign {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::variant<EncoderParams, RerankerParams> params;
  std::string config;  // JSON snapshot of the producing configuration
  std::uint64_t rng_seed = 0;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws VersionError on a format_version other than kCheckpointVersion and
/// CorruptionError on a bad magic, truncation or checksum mismatch.
Checkpoint deserialize_checkpoint(std::string_view bytes, std::string_view origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace softalign
