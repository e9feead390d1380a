#pragma once

// Shared numerics: cosine similarity, temperature softmax, KL / symmetric KL
// and a central finite-difference gradient. Everything runs in double.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace softalign {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Probability vector over n >= 2 outcomes. Entries lie in [0,1] and sum to 1.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  Distribution() = default;

  /// Validates and wraps `probs`; throws std::invalid_argument on violation.
  static Distribution from_probs(Vector probs) {
    if (probs.size() < 2) {
      throw std::invalid_argument("distribution needs at least 2 entries");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      const double p = probs[i];
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw std::invalid_argument("distribution entry " + std::to_string(i) +
                                    " outside [0,1]");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
      throw std::invalid_argument("distribution does not sum to 1");
    }
    Distribution d;
    d.probs_ = std::move(probs);
    return d;
  }

  /// One-hot distribution with all mass on `index`.
  static Distribution one_hot(Eigen::Index n, Eigen::Index index) {
    Vector p = Vector::Zero(n);
    p[index] = 1.0;
    return from_probs(std::move(p));
  }

  const Vector& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_[i]; }

 private:
  Vector probs_;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const char* what) {
  if (!x.allFinite()) {
    throw std::invalid_argument(std::string(what) + " has non-finite entries");
  }
}

}  // namespace detail

/// Cosine similarity, clamped to [-1,1]. Exactly 1 when u == v.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()) + ")");
  }
  // single pass so that dot(u,u) and |u|^2 share a summation order
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = u.derived().coeff(i);
    const double b = v.derived().coeff(i);
    dot += a * b;
    uu += a * a;
    vv += b * b;
  }
  if (uu == 0.0 || vv == 0.0) {
    throw std::invalid_argument("cosine: zero vector");
  }
  const double c = dot / std::sqrt(uu * vv);
  return std::clamp(c, -1.0, 1.0);
}

/// softmax(x / tau), stabilised by subtracting the maximum scaled logit.
template <typename Derived>
Distribution softmax_t(const Eigen::MatrixBase<Derived>& x, double tau) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("softmax_t: temperature must be positive");
  }
  detail::require_finite(x, "softmax_t input");
  Vector z = x.template cast<double>() / tau;
  z.array() -= z.maxCoeff();
  Vector e = z.array().exp();
  e /= e.sum();
  return Distribution::from_probs(std::move(e));
}

/// KL(p || q) with 0 log 0 = 0. Throws when q has a zero where p does not.
inline double kl(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl: length mismatch");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    if (pi == 0.0) continue;
    const double qi = q[i];
    if (qi == 0.0) {
      throw std::invalid_argument("kl: q is zero at index " + std::to_string(i) +
                                  " where p is positive");
    }
    total += pi * (std::log(pi) - std::log(qi));
  }
  // rounding can leave a tiny negative value for p ~= q
  return std::max(total, 0.0);
}

/// 0.5 * (KL(p||q) + KL(q||p)). Symmetric bit-for-bit.
inline double sym_kl(const Distribution& p, const Distribution& q) {
  return 0.5 * (kl(p, q) + kl(q, p));
}

/// d KL(softmax(z) || q) / dz, given p = softmax(z).
inline Vector kl_grad_wrt_first_logits(const Distribution& p, const Distribution& q) {
  const double d = kl(p, q);
  Vector g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    g[i] = pi == 0.0 ? 0.0 : pi * (std::log(pi) - std::log(q[i]) - d);
  }
  return g;
}

/// d KL(q || softmax(z)) / dz, given p = softmax(z). This is p - q.
inline Vector kl_grad_wrt_second_logits(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl gradient: length mismatch");
  }
  return p.probs() - q.probs();
}

/// d sym_kl(softmax(z), q) / dz.
inline Vector sym_kl_grad_wrt_logits(const Distribution& p, const Distribution& q) {
  return 0.5 * (kl_grad_wrt_first_logits(p, q) + kl_grad_wrt_second_logits(p, q));
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
template <typename F>
Vector finite_diff_grad(F&& f, const Vector& x, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  }
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(static_cast<const Vector&>(probe));
    probe[i] = saved - h;
    const double down = f(static_cast<const Vector&>(probe));
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_diff_grad: non-finite function value at coordinate " +
                              std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace softalign
