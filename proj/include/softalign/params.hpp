#pragma once

// Helpers shared by every parameter struct. A parameter struct exposes
// `template <typename F> void visit(F&& f)` (and a const overload) that calls
// f(name, tensor) for each Eigen tensor in a fixed order.

#include "softalign/core_math.hpp"

#include <cmath>
#include <string>
#include <string_view>

namespace softalign {

template <typename Params>
Eigen::Index parameter_count(const Params& p) {
  Eigen::Index n = 0;
  p.visit([&](std::string_view, const auto& t) { n += t.size(); });
  return n;
}

/// Concatenates every tensor (column-major) in visit order.
template <typename Params>
Vector flatten(const Params& p) {
  Vector out(parameter_count(p));
  Eigen::Index offset = 0;
  p.visit([&](std::string_view, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) out[offset + i] = t.data()[i];
    offset += t.size();
  });
  return out;
}

template <typename Params>
void unflatten(Params& p, const Vector& flat) {
  if (flat.size() != parameter_count(p)) {
    throw std::invalid_argument("unflatten: size mismatch");
  }
  Eigen::Index offset = 0;
  p.visit([&](std::string_view, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = flat[offset + i];
    offset += t.size();
  });
}

/// a += b, tensor by tensor.
template <typename Params>
void accumulate(Params& a, const Params& b) {
  unflatten(a, flatten(a) + flatten(b));
}

template <typename Params>
void scale(Params& a, double factor) {
  a.visit([&](std::string_view, auto& t) { t *= factor; });
}

/// Name and index of the first non-finite entry, or empty if all finite.
template <typename Params>
std::string first_non_finite(const Params& p) {
  std::string where;
  p.visit([&](std::string_view name, const auto& t) {
    if (!where.empty()) return;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data()[i])) {
        where = std::string(name) + "[" + std::to_string(i) + "]";
        return;
      }
    }
  });
  return where;
}

/// Plain SGD with optional heavy-ball momentum.
struct SgdConfig {
  double lr = 0.05;
  double momentum = 0.0;
};

template <typename Params>
class Sgd {
 public:
  explicit Sgd(SgdConfig config) : config_(config) {
    if (!(config_.lr >= 0.0) || !(config_.momentum >= 0.0) || config_.momentum >= 1.0) {
      throw std::invalid_argument("sgd: lr must be >= 0 and momentum in [0,1)");
    }
  }

  /// params <- params - lr * (momentum-filtered) grads.
  void step(Params& params, const Params& grads) {
    if (const auto bad = first_non_finite(grads); !bad.empty()) {
      throw std::domain_error("optimizer step: non-finite gradient at " + bad);
    }
    Vector g = flatten(grads);
    if (config_.momentum > 0.0) {
      if (velocity_.size() != g.size()) velocity_ = Vector::Zero(g.size());
      velocity_ = config_.momentum * velocity_ + g;
      g = velocity_;
    }
    if (config_.lr == 0.0) return;
    unflatten(params, flatten(params) - config_.lr * g);
  }

 private:
  SgdConfig config_;
  Vector velocity_;
};

/// One stateless SGD update: params - lr * grads.
template <typename Params>
Params optimizer_step(const Params& params, const Params& grads, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer_step: lr must be positive");
  Params out = params;
  Sgd<Params>(SgdConfig{lr, 0.0}).step(out, grads);
  return out;
}

}  // namespace softalign
