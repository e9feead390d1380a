#pragma once

#include "softalign/core_math.hpp"
#include "softalign/params.hpp"
#include "softalign/types.hpp"

#include <cstdint>
#include <span>

namespace softalign {

struct EncoderDims {
  int raw = 64;
  int hidden = 64;
  int emb = 32;

  int input() const { return raw + kModalityCount; }
  bool operator==(const EncoderDims&) const = default;
};

/// Two-layer encoder shared by all modalities:
///   e = normalize(w2 * tanh(w1 * [features ; onehot(modality)] + b1) + b2)
struct EncoderParams {
  EncoderDims dims;
  Matrix w1;  // hidden x input
  Vector b1;  // hidden
  Matrix w2;  // emb x hidden
  Vector b2;  // emb

  static EncoderParams zeros(const EncoderDims& dims);

  template <typename F>
  void visit(F&& f) {
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
  }
  template <typename F>
  void visit(F&& f) const {
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from `seed`.
EncoderParams init_encoder(const EncoderDims& dims, std::uint64_t seed);

/// Intermediate values of one forward pass, kept for the backward pass.
struct EncoderForward {
  Vector input;
  Vector hidden;
  Vector projected;  // before normalisation
  double norm = 0.0;
  Vector embedding;
};

Vector encoder_input(const EncoderDims& dims, const Item& item);
EncoderForward encode_forward(const EncoderParams& params, const Item& item);

/// Unit-norm embedding of `item`.
Vector encode(const EncoderParams& params, const Item& item);

/// Embeds every item as a column of the result.
Matrix encode_all(const EncoderParams& params, std::span<const Item* const> items,
                  unsigned threads = 1);

/// Adds d(loss)/d(params) to `grads`, given d(loss)/d(embedding).
void encode_backward(const EncoderParams& params, const EncoderForward& fwd,
                     const Vector& grad_embedding, EncoderParams& grads);

/// Parameter gradients for one item and one upstream embedding gradient.
EncoderParams encode_backward(const EncoderParams& params, const Item& item,
                              const Vector& grad_embedding);

}  // namespace softalign

namespace softalign {

/// Frozen embeddings addressed by item id; one column per item.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> ids, Matrix columns);

  static EmbeddingTable embed(const EncoderParams& params, const Corpus& corpus,
                              std::span<const std::string> ids, unsigned threads = 1);

  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix& columns() const { return columns_; }
  Eigen::Index dim() const { return columns_.rows(); }
  bool contains(std::string_view id) const { return pos_.contains(std::string(id)); }
  Vector operator[](std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  Matrix columns_;
  std::unordered_map<std::string, Eigen::Index> pos_;
};

}  // namespace softalign
