#include "softalign/encoder.hpp"

#include "softalign/parallel.hpp"
#include "softalign/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace softalign {

EncoderParams EncoderParams::zeros(const EncoderDims& dims) {
  if (dims.raw < 1 || dims.hidden < 1 || dims.emb < 1) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  EncoderParams p;
  p.dims = dims;
  p.w1 = Matrix::Zero(dims.hidden, dims.input());
  p.b1 = Vector::Zero(dims.hidden);
  p.w2 = Matrix::Zero(dims.emb, dims.hidden);
  p.b2 = Vector::Zero(dims.emb);
  return p;
}

EncoderParams init_encoder(const EncoderDims& dims, std::uint64_t seed) {
  EncoderParams p = EncoderParams::zeros(dims);
  Rng rng(seed);
  const auto fill = [&](auto& t, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -bound, bound);
  };
  fill(p.w1, dims.input());
  fill(p.b1, dims.input());
  fill(p.w2, dims.hidden);
  fill(p.b2, dims.hidden);
  return p;
}

Vector encoder_input(const EncoderDims& dims, const Item& item) {
  if (item.features.size() != dims.raw) {
    throw std::invalid_argument("encode: item '" + item.id + "' has " +
                                std::to_string(item.features.size()) + " features, expected " +
                                std::to_string(dims.raw));
  }
  Vector x = Vector::Zero(dims.input());
  x.head(dims.raw) = item.features;
  x[dims.raw + static_cast<int>(item.modality)] = 1.0;
  return x;
}

EncoderForward encode_forward(const EncoderParams& params, const Item& item) {
  EncoderForward f;
  f.input = encoder_input(params.dims, item);
  f.hidden = (params.w1 * f.input + params.b1).array().tanh();
  f.projected = params.w2 * f.hidden + params.b2;
  f.norm = f.projected.norm();
  if (!(f.norm > 0.0) || !std::isfinite(f.norm)) {
    throw std::domain_error("encode: degenerate projection for item '" + item.id + "'");
  }
  f.embedding = f.projected / f.norm;
  return f;
}

Vector encode(const EncoderParams& params, const Item& item) {
  return encode_forward(params, item).embedding;
}

Matrix encode_all(const EncoderParams& params, std::span<const Item* const> items,
                  unsigned threads) {
  Matrix out(params.dims.emb, static_cast<Eigen::Index>(items.size()));
  parallel_for(items.size(), threads, [&](std::size_t i) {
    out.col(static_cast<Eigen::Index>(i)) = encode(params, *items[i]);
  });
  return out;
}

void encode_backward(const EncoderParams& params, const EncoderForward& fwd,
                     const Vector& grad_embedding, EncoderParams& grads) {
  if (grad_embedding.size() != params.dims.emb) {
    throw std::invalid_argument("encode_backward: gradient has wrong dimension");
  }
  // d normalize(y) / dy = (I - e e^T) / |y|
  const Vector& e = fwd.embedding;
  const Vector d_proj = (grad_embedding - e * e.dot(grad_embedding)) / fwd.norm;
  grads.w2.noalias() += d_proj * fwd.hidden.transpose();
  grads.b2 += d_proj;
  const Vector d_hidden = params.w2.transpose() * d_proj;
  const Vector d_pre = d_hidden.array() * (1.0 - fwd.hidden.array().square());
  grads.w1.noalias() += d_pre * fwd.input.transpose();
  grads.b1 += d_pre;
}

EncoderParams encode_backward(const EncoderParams& params, const Item& item,
                              const Vector& grad_embedding) {
  if (!grad_embedding.allFinite()) {
    throw std::invalid_argument("encode_backward: non-finite gradient");
  }
  EncoderParams grads = EncoderParams::zeros(params.dims);
  encode_backward(params, encode_forward(params, item), grad_embedding, grads);
  return grads;
}

}  // namespace softalign

namespace softalign {

EmbeddingTable::EmbeddingTable(std::vector<std::string> ids, Matrix columns)
    : ids_(std::move(ids)), columns_(std::move(columns)) {
  if (static_cast<Eigen::Index>(ids_.size()) != columns_.cols()) {
    throw std::invalid_argument("embedding table: id count does not match column count");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!pos_.emplace(ids_[i], static_cast<Eigen::Index>(i)).second) {
      throw std::invalid_argument("embedding table: duplicate id '" + ids_[i] + "'");
    }
  }
}

EmbeddingTable EmbeddingTable::embed(const EncoderParams& params, const Corpus& corpus,
                                     std::span<const std::string> ids, unsigned threads) {
  std::vector<const Item*> items;
  items.reserve(ids.size());
  for (const auto& id : ids) items.push_back(&corpus.item(id));
  return EmbeddingTable(std::vector<std::string>(ids.begin(), ids.end()),
                        encode_all(params, items, threads));
}

Vector EmbeddingTable::operator[](std::string_view id) const {
  const auto it = pos_.find(std::string(id));
  if (it == pos_.end()) {
    throw std::out_of_range("no embedding for id '" + std::string(id) + "'");
  }
  return columns_.col(it->second);
}

}  // namespace softalign
