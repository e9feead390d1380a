#include "softalign/datagen.hpp"

#include "softalign/errors.hpp"
#include "softalign/rng.hpp"
#include "softalign/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace softalign {

void LatentCorpusSpec::validate() const {
  if (n_concepts < 1 || n_queries < 1 || latent_dim < 1 || raw_dim < 1) {
    throw std::invalid_argument("corpus spec: counts and dimensions must be positive");
  }
  if (n_candidates < n_queries) {
    throw std::invalid_argument("corpus spec: n_candidates must be >= n_queries");
  }
  if (n_concepts > latent_dim) {
    throw std::invalid_argument("corpus spec: n_concepts must not exceed latent_dim");
  }
  if (!(view_noise_sigma >= 0.0) || !(sibling_spread >= 0.0) || !(relevance_exponent > 0.0)) {
    throw std::invalid_argument("corpus spec: sigma, spread must be >= 0 and exponent > 0");
  }
  if (!(distractor_ratio >= 0.0) || distractor_ratio >= 1.0) {
    throw std::invalid_argument("corpus spec: distractor_ratio must be in [0,1)");
  }
  const auto distractors = static_cast<int>(std::lround(distractor_ratio * n_candidates));
  if (distractors > n_candidates - n_queries) {
    throw std::invalid_argument("corpus spec: too many distractors to give every query a target");
  }
  if (distractors > 0 && n_concepts == latent_dim) {
    throw std::invalid_argument("corpus spec: distractors need latent_dim > n_concepts");
  }
}

double relevance_from_cosine(double cosine, double exponent) {
  return std::pow(std::clamp((cosine + 1.0) / 2.0, 0.0, 1.0), exponent);
}

GroundTruth::GroundTruth(double exponent, std::vector<std::string> ids, Matrix latents)
    : exponent_(exponent), ids_(std::move(ids)), latents_(std::move(latents)) {
  if (static_cast<Eigen::Index>(ids_.size()) != latents_.cols()) {
    throw std::invalid_argument("ground truth: id count does not match latent count");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!pos_.emplace(ids_[i], static_cast<Eigen::Index>(i)).second) {
      throw std::invalid_argument("ground truth: duplicate id '" + ids_[i] + "'");
    }
  }
}

Eigen::Index GroundTruth::column(std::string_view id) const {
  const auto it = pos_.find(std::string(id));
  if (it == pos_.end()) throw std::out_of_range("ground truth: unknown id '" + std::string(id) + "'");
  return it->second;
}

double GroundTruth::relevance(std::string_view query_id, std::string_view candidate_id) const {
  return relevance_from_cosine(
      cosine(latents_.col(column(query_id)), latents_.col(column(candidate_id))), exponent_);
}

namespace {

std::string make_id(char prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%06d", prefix, n);
  return buf;
}

Vector gaussian(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

SyntheticData generate(const LatentCorpusSpec& spec) {
  spec.validate();
  const int L = spec.latent_dim;
  const int C = spec.n_concepts;

  // Orthonormal basis: the first C columns are concepts, the rest span the
  // distractor subspace.
  Rng basis_rng = make_rng(spec.seed, "datagen/basis");
  Matrix g(L, L);
  for (int j = 0; j < L; ++j) g.col(j) = gaussian(basis_rng, L);
  const Matrix basis = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(L, L);

  Rng view_rng = make_rng(spec.seed, "datagen/views");
  Matrix view_query(spec.raw_dim, L), view_candidate(spec.raw_dim, L);
  for (int j = 0; j < L; ++j) view_query.col(j) = gaussian(view_rng, spec.raw_dim);
  for (int j = 0; j < L; ++j) view_candidate.col(j) = gaussian(view_rng, spec.raw_dim);

  Rng latent_rng = make_rng(spec.seed, "datagen/latents");
  std::uniform_int_distribution<int> pick_concept(0, C - 1);
  const auto around_concept = [&](int k) -> Vector {
    Vector z = basis.col(k) + spec.sibling_spread * gaussian(latent_rng, L);
    return z.normalized();
  };

  Matrix query_latents(L, spec.n_queries);
  for (int i = 0; i < spec.n_queries; ++i) query_latents.col(i) = around_concept(pick_concept(latent_rng));

  const int n_distractors = static_cast<int>(std::lround(spec.distractor_ratio * spec.n_candidates));
  Matrix candidate_latents(L, spec.n_candidates);
  // slot j < n_queries is the target of query j
  for (int j = 0; j < spec.n_candidates; ++j) {
    if (j < spec.n_queries) {
      candidate_latents.col(j) = query_latents.col(j);
    } else if (j < spec.n_candidates - n_distractors) {
      candidate_latents.col(j) = around_concept(pick_concept(latent_rng));
    } else {
      const Vector coeff = gaussian(latent_rng, L - C);
      candidate_latents.col(j) = (basis.rightCols(L - C) * coeff).normalized();
    }
  }

  // Shuffle candidate slots so that ids carry no information about roles.
  std::vector<int> slot_of_id(static_cast<std::size_t>(spec.n_candidates));
  std::iota(slot_of_id.begin(), slot_of_id.end(), 0);
  Rng shuffle_rng = make_rng(spec.seed, "datagen/shuffle");
  std::shuffle(slot_of_id.begin(), slot_of_id.end(), shuffle_rng);
  std::vector<int> id_of_slot(slot_of_id.size());
  for (std::size_t id = 0; id < slot_of_id.size(); ++id) id_of_slot[slot_of_id[id]] = static_cast<int>(id);

  Rng noise_rng = make_rng(spec.seed, "datagen/noise");
  std::vector<Item> items;
  std::vector<std::string> ids;
  Matrix all_latents(L, spec.n_queries + spec.n_candidates);
  items.reserve(all_latents.cols());
  std::vector<QueryTarget> queries;
  std::vector<std::string> candidates;

  for (int i = 0; i < spec.n_queries; ++i) {
    Item item{make_id('q', i), Modality::query_text,
              view_query * query_latents.col(i) + spec.view_noise_sigma * gaussian(noise_rng, spec.raw_dim)};
    all_latents.col(static_cast<Eigen::Index>(items.size())) = query_latents.col(i);
    ids.push_back(item.id);
    queries.push_back({item.id, make_id('c', id_of_slot[i])});
    items.push_back(std::move(item));
  }
  for (int id = 0; id < spec.n_candidates; ++id) {
    const int slot = slot_of_id[id];
    Item item{make_id('c', id), Modality::candidate_image,
              view_candidate * candidate_latents.col(slot) +
                  spec.view_noise_sigma * gaussian(noise_rng, spec.raw_dim)};
    all_latents.col(static_cast<Eigen::Index>(items.size())) = candidate_latents.col(slot);
    ids.push_back(item.id);
    candidates.push_back(item.id);
    items.push_back(std::move(item));
  }

  return SyntheticData{Corpus(std::move(items), std::move(queries), std::move(candidates)),
                       GroundTruth(spec.relevance_exponent, std::move(ids), std::move(all_latents))};
}

namespace {
constexpr std::string_view kGroundTruthFormat = "softalign-ground-truth";
constexpr int kGroundTruthVersion = 1;
}  // namespace

void write_ground_truth(const std::filesystem::path& path, const Corpus& corpus,
                        const GroundTruth& truth, const std::string& fingerprint) {
  nlohmann::json j;
  j["format"] = kGroundTruthFormat;
  j["version"] = kGroundTruthVersion;
  j["fingerprint"] = fingerprint;
  j["relevance_exponent"] = truth.exponent();
  auto& targets = j["targets"] = nlohmann::json::array();
  for (const auto& q : corpus.queries()) targets.push_back({q.query_id, q.target_id});
  auto& latents = j["latents"] = nlohmann::json::array();
  for (std::size_t i = 0; i < truth.ids().size(); ++i) {
    const Vector z = truth.latents().col(static_cast<Eigen::Index>(i));
    latents.push_back({truth.ids()[i], std::vector<double>(z.data(), z.data() + z.size())});
  }
  text::atomic_write(path, j.dump() + "\n");
}

GroundTruth read_ground_truth(const std::filesystem::path& path, std::string* fingerprint) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kGroundTruthFormat) {
    throw CorruptionError(path.string() + ": not a ground-truth file");
  }
  if (j.value("version", 0) != kGroundTruthVersion) {
    throw VersionError(path.string() + ": unsupported ground-truth version");
  }
  try {
    if (fingerprint) *fingerprint = j.at("fingerprint").get<std::string>();
    std::vector<std::string> ids;
    const auto& latents = j.at("latents");
    Matrix m;
    for (std::size_t i = 0; i < latents.size(); ++i) {
      const auto& rec = latents[i];
      ids.push_back(rec.at(0).get<std::string>());
      const auto z = rec.at(1).get<std::vector<double>>();
      if (i == 0) m.resize(static_cast<Eigen::Index>(z.size()), static_cast<Eigen::Index>(latents.size()));
      if (static_cast<Eigen::Index>(z.size()) != m.rows()) {
        throw CorruptionError(path.string() + ": inconsistent latent dimension");
      }
      m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vector>(z.data(), m.rows());
    }
    return GroundTruth(j.at("relevance_exponent").get<double>(), std::move(ids), std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  }
}

}  // namespace softalign
