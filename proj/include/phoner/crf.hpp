// Linear-chain CRF over unit (phoneme-segment or character) features:
// feature extraction, log-space forward-backward, maximum-likelihood
// gradients, mini-batch gradient-descent training, Viterbi decoding and
// a versioned plain-text model format.
//
// All inference runs in log space; unnormalized probabilities are never
// materialized.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phoner/tags.hpp"
#include "phoner/utf8.hpp"

namespace phoner {

struct FeatureTemplate {
  int window = 2;                 // half-width of the identity window
  bool use_unit_identity = true;  // u-2=.. u-1=.. u0=.. u+1=.. u+2=..
  bool use_affixes = true;        // codepoint prefixes/suffixes of u0, len <= 3
  bool use_bigrams = true;        // adjacent unit pairs
};

namespace detail {

inline std::string offset_name(int d) {
  if (d == 0) return "u0";
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%+d", d);
  return buf;
}

inline const std::string& unit_or_boundary(std::span<const std::string> units,
                                           long i, const std::string& bos,
                                           const std::string& eos) {
  if (i < 0) return bos;
  if (i >= static_cast<long>(units.size())) return eos;
  return units[static_cast<std::size_t>(i)];
}

}  // namespace detail

/// Deterministic feature strings for one position of a unit sequence.
inline std::vector<std::string> extract_features(
    const FeatureTemplate& tmpl, std::span<const std::string> units,
    std::size_t position) {
  if (position >= units.size())
    throw std::invalid_argument("extract_features: position out of range");
  static const std::string kBos = "<BOS>";
  static const std::string kEos = "<EOS>";
  std::vector<std::string> feats;
  feats.emplace_back("bias");
  const long p = static_cast<long>(position);
  if (tmpl.use_unit_identity) {
    for (int d = -tmpl.window; d <= tmpl.window; ++d)
      feats.push_back(detail::offset_name(d) + "=" +
                      detail::unit_or_boundary(units, p + d, kBos, kEos));
  }
  if (tmpl.use_affixes) {
    const std::u32string cps = utf8_decode(units[position]);
    const std::size_t max_k = std::min<std::size_t>(3, cps.size());
    for (std::size_t k = 1; k <= max_k; ++k)
      feats.push_back("p" + std::to_string(k) + "=" +
                      utf8_encode(cps.substr(0, k)));
    for (std::size_t k = 1; k <= max_k; ++k)
      feats.push_back("s" + std::to_string(k) + "=" +
                      utf8_encode(cps.substr(cps.size() - k)));
  }
  if (tmpl.use_bigrams) {
    feats.push_back("b-1=" + detail::unit_or_boundary(units, p - 1, kBos, kEos) +
                    "|" + units[position]);
    feats.push_back("b+1=" + units[position] + "|" +
                    detail::unit_or_boundary(units, p + 1, kBos, kEos));
  }
  return feats;
}

/// The canonical WikiANN NER tag set, in the order used everywhere.
inline std::vector<Tag> ner_tag_set() {
  return {Tag::O(),
          Tag::B(EntityType::PER), Tag::I(EntityType::PER),
          Tag::B(EntityType::ORG), Tag::I(EntityType::ORG),
          Tag::B(EntityType::LOC), Tag::I(EntityType::LOC)};
}

class CrfModel {
 public:
  std::vector<Tag> tag_set;
  FeatureTemplate tmpl;
  std::vector<std::string> feature_names;  // column -> feature string
  std::vector<double> emission;            // [feature * K + tag]
  std::vector<double> transition;          // [prev * K + next]

  std::size_t num_tags() const { return tag_set.size(); }
  std::size_t num_features() const { return feature_names.size(); }

  std::size_t tag_id(const Tag& t) const {
    for (std::size_t i = 0; i < tag_set.size(); ++i)
      if (tag_set[i] == t) return i;
    throw std::invalid_argument("tag '" + t.str() + "' outside model tag set");
  }

  std::size_t intern_feature(const std::string& name) {
    auto [it, inserted] = feature_index_.emplace(name, feature_names.size());
    if (inserted) {
      feature_names.push_back(name);
      emission.resize(feature_names.size() * num_tags(), 0.0);
    }
    return it->second;
  }

  std::optional<std::size_t> find_feature(const std::string& name) const {
    auto it = feature_index_.find(name);
    if (it == feature_index_.end()) return std::nullopt;
    return it->second;
  }

  void reset_weights() {
    emission.assign(num_features() * num_tags(), 0.0);
    transition.assign(num_tags() * num_tags(), 0.0);
  }

  /// Column indices of the active features per position. Features not
  /// present in the model (unseen at training time) are dropped.
  std::vector<std::vector<std::size_t>> featurize(
      std::span<const std::string> units) const {
    std::vector<std::vector<std::size_t>> out(units.size());
    for (std::size_t t = 0; t < units.size(); ++t)
      for (const std::string& f : extract_features(tmpl, units, t))
        if (auto id = find_feature(f)) out[t].push_back(*id);
    return out;
  }

  double emission_score(const std::vector<std::size_t>& active,
                        std::size_t tag) const {
    const std::size_t k = num_tags();
    double s = 0.0;
    for (std::size_t f : active) s += emission[f * k + tag];
    return s;
  }

  void check_finite() const {
    for (double w : emission)
      if (!std::isfinite(w)) throw std::runtime_error("non-finite emission weight");
    for (double w : transition)
      if (!std::isfinite(w)) throw std::runtime_error("non-finite transition weight");
  }

  void save(std::ostream& out) const;
  std::string save_string() const {
    std::ostringstream ss;
    save(ss);
    return ss.str();
  }
  static CrfModel load(std::istream& in);
  static CrfModel parse(std::string_view text) {
    std::istringstream ss{std::string(text)};
    return load(ss);
  }

  void rebuild_index() {
    feature_index_.clear();
    for (std::size_t i = 0; i < feature_names.size(); ++i)
      feature_index_.emplace(feature_names[i], i);
  }

 private:
  std::unordered_map<std::string, std::size_t> feature_index_;
};

namespace detail {

inline double logsumexp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// emit[t*K + y] for a featurized sequence
inline std::vector<double> emission_scores(
    const CrfModel& model, const std::vector<std::vector<std::size_t>>& feats) {
  const std::size_t k = model.num_tags();
  std::vector<double> emit(feats.size() * k);
  for (std::size_t t = 0; t < feats.size(); ++t)
    for (std::size_t y = 0; y < k; ++y)
      emit[t * k + y] = model.emission_score(feats[t], y);
  return emit;
}

}  // namespace detail

struct Marginals {
  double log_partition = 0.0;
  std::size_t length = 0;    // T
  std::size_t num_tags = 0;  // K
  std::vector<double> unary;     // T*K, p(y_t = y)
  std::vector<double> pairwise;  // (T-1)*K*K, p(y_{t-1} = a, y_t = b)

  double unary_at(std::size_t t, std::size_t y) const {
    return unary[t * num_tags + y];
  }
  double pairwise_at(std::size_t t, std::size_t prev, std::size_t next) const {
    // t indexes the transition into position t, 1 <= t < T
    return pairwise[(t - 1) * num_tags * num_tags + prev * num_tags + next];
  }
};

/// Log-space forward-backward over a featurized sequence.
inline Marginals forward_backward_feats(
    const CrfModel& model, const std::vector<std::vector<std::size_t>>& feats) {
  if (feats.empty())
    throw std::invalid_argument("forward_backward: empty sequence");
  model.check_finite();
  const std::size_t T = feats.size();
  const std::size_t K = model.num_tags();
  const std::vector<double> emit = detail::emission_scores(model, feats);

  std::vector<double> alpha(T * K), beta(T * K), work(K);
  for (std::size_t y = 0; y < K; ++y) alpha[y] = emit[y];
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t y = 0; y < K; ++y) {
      for (std::size_t yp = 0; yp < K; ++yp)
        work[yp] = alpha[(t - 1) * K + yp] + model.transition[yp * K + y];
      alpha[t * K + y] = emit[t * K + y] + detail::logsumexp(work);
    }
  const double log_z =
      detail::logsumexp(std::span(alpha).subspan((T - 1) * K, K));

  for (std::size_t y = 0; y < K; ++y) beta[(T - 1) * K + y] = 0.0;
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t y = 0; y < K; ++y) {
      for (std::size_t yn = 0; yn < K; ++yn)
        work[yn] = model.transition[y * K + yn] + emit[(t + 1) * K + yn] +
                   beta[(t + 1) * K + yn];
      beta[t * K + y] = detail::logsumexp(work);
    }

  Marginals m;
  m.log_partition = log_z;
  m.length = T;
  m.num_tags = K;
  m.unary.resize(T * K);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = 0; y < K; ++y)
      m.unary[t * K + y] = std::exp(alpha[t * K + y] + beta[t * K + y] - log_z);
  m.pairwise.resize((T - 1) * K * K);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t yp = 0; yp < K; ++yp)
      for (std::size_t y = 0; y < K; ++y)
        m.pairwise[(t - 1) * K * K + yp * K + y] =
            std::exp(alpha[(t - 1) * K + yp] + model.transition[yp * K + y] +
                     emit[t * K + y] + beta[t * K + y] - log_z);
  return m;
}

inline Marginals forward_backward(const CrfModel& model,
                                  std::span<const std::string> units) {
  return forward_backward_feats(model, model.featurize(units));
}

/// Unnormalized log score of one tag path.
inline double sequence_score(const CrfModel& model,
                             const std::vector<std::vector<std::size_t>>& feats,
                             std::span<const std::size_t> tag_ids) {
  if (feats.size() != tag_ids.size())
    throw std::invalid_argument("sequence_score: length mismatch");
  const std::size_t k = model.num_tags();
  double s = 0.0;
  for (std::size_t t = 0; t < feats.size(); ++t) {
    s += model.emission_score(feats[t], tag_ids[t]);
    if (t > 0) s += model.transition[tag_ids[t - 1] * k + tag_ids[t]];
  }
  return s;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> d_emission;
  std::vector<double> d_transition;
};

namespace detail {

inline LossGrad nll_gradient_ptrs(
    const CrfModel& model,
    std::span<const SegmentLabeledSentence* const> batch, double l2_lambda) {
  if (batch.empty())
    throw std::invalid_argument("nll_gradient: empty batch");
  const std::size_t K = model.num_tags();
  LossGrad lg;
  lg.d_emission.assign(model.emission.size(), 0.0);
  lg.d_transition.assign(model.transition.size(), 0.0);

  for (const SegmentLabeledSentence* sentence : batch) {
    if (sentence->segments.size() != sentence->tags.size())
      throw std::invalid_argument("nll_gradient: segment/tag length mismatch");
    if (sentence->segments.empty()) continue;
    std::vector<std::size_t> gold(sentence->tags.size());
    for (std::size_t t = 0; t < sentence->tags.size(); ++t)
      gold[t] = model.tag_id(sentence->tags[t]);

    const auto feats = model.featurize(sentence->segments);
    const Marginals m = forward_backward_feats(model, feats);
    lg.loss += m.log_partition - sequence_score(model, feats, gold);

    // expected minus empirical feature counts
    for (std::size_t t = 0; t < feats.size(); ++t) {
      for (std::size_t f : feats[t]) {
        for (std::size_t y = 0; y < K; ++y)
          lg.d_emission[f * K + y] += m.unary_at(t, y);
        lg.d_emission[f * K + gold[t]] -= 1.0;
      }
      if (t > 0) {
        for (std::size_t yp = 0; yp < K; ++yp)
          for (std::size_t y = 0; y < K; ++y)
            lg.d_transition[yp * K + y] += m.pairwise_at(t, yp, y);
        lg.d_transition[gold[t - 1] * K + gold[t]] -= 1.0;
      }
    }
  }

  if (l2_lambda != 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < model.emission.size(); ++i) {
      sq += model.emission[i] * model.emission[i];
      lg.d_emission[i] += l2_lambda * model.emission[i];
    }
    for (std::size_t i = 0; i < model.transition.size(); ++i) {
      sq += model.transition[i] * model.transition[i];
      lg.d_transition[i] += l2_lambda * model.transition[i];
    }
    lg.loss += 0.5 * l2_lambda * sq;
  }
  return lg;
}

}  // namespace detail

/// Negative log-likelihood of a batch plus L2 penalty, with its exact
/// gradient: expected feature counts minus empirical counts plus
/// l2_lambda * weights.
inline LossGrad nll_gradient(const CrfModel& model,
                             std::span<const SegmentLabeledSentence> batch,
                             double l2_lambda) {
  std::vector<const SegmentLabeledSentence*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return detail::nll_gradient_ptrs(model, ptrs, l2_lambda);
}

struct TrainingConfig {
  int epochs = 10;
  double learning_rate = 0.1;
  double l2_lambda = 1e-4;
  int batch_size = 32;
  std::uint64_t seed = 42;

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (l2_lambda < 0) throw std::invalid_argument("l2_lambda must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  }
};

namespace detail {

// Hand-rolled Fisher-Yates so shuffles are identical across standard
// libraries (std::shuffle is implementation-defined).
inline void deterministic_shuffle(std::vector<std::size_t>& v,
                                  std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace detail

/// Trains a CRF by mini-batch gradient descent with a fixed learning
/// rate. Deterministic given the seed: shuffles and reductions run in a
/// pinned order. When epoch_losses is given it receives the summed
/// batch losses (computed before each update) per epoch.
inline CrfModel train(std::span<const SegmentLabeledSentence> data,
                      const FeatureTemplate& tmpl, const TrainingConfig& config,
                      std::vector<double>* epoch_losses = nullptr) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: empty corpus");

  CrfModel model;
  model.tag_set = ner_tag_set();
  model.tmpl = tmpl;
  for (const auto& sentence : data) {
    if (sentence.segments.size() != sentence.tags.size())
      throw std::invalid_argument("train: segment/tag length mismatch");
    for (const Tag& t : sentence.tags) model.tag_id(t);  // validate early
    for (std::size_t p = 0; p < sentence.segments.size(); ++p)
      for (const std::string& f :
           extract_features(tmpl, sentence.segments, p))
        model.intern_feature(f);
  }
  model.reset_weights();

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(config.seed);

  std::vector<const SegmentLabeledSentence*> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    detail::deterministic_shuffle(order, rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), begin + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&data[order[i]]);
      const LossGrad lg =
          detail::nll_gradient_ptrs(model, batch, config.l2_lambda);
      epoch_loss += lg.loss;
      const double step = config.learning_rate / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < model.emission.size(); ++i)
        model.emission[i] -= step * lg.d_emission[i];
      for (std::size_t i = 0; i < model.transition.size(); ++i)
        model.transition[i] -= step * lg.d_transition[i];
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss);
  }
  model.check_finite();
  return model;
}

/// Argmax tag path; ties break toward the lowest tag index.
inline std::vector<Tag> viterbi_decode(const CrfModel& model,
                                       std::span<const std::string> units) {
  if (units.empty())
    throw std::invalid_argument("viterbi_decode: empty sequence");
  model.check_finite();
  const auto feats = model.featurize(units);
  const std::size_t T = units.size();
  const std::size_t K = model.num_tags();
  const std::vector<double> emit = detail::emission_scores(model, feats);

  std::vector<double> delta(T * K);
  std::vector<std::size_t> back(T * K, 0);
  for (std::size_t y = 0; y < K; ++y) delta[y] = emit[y];
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t y = 0; y < K; ++y) {
      double best = delta[(t - 1) * K] + model.transition[y];
      std::size_t arg = 0;
      for (std::size_t yp = 1; yp < K; ++yp) {
        const double s = delta[(t - 1) * K + yp] + model.transition[yp * K + y];
        if (s > best) {
          best = s;
          arg = yp;
        }
      }
      delta[t * K + y] = emit[t * K + y] + best;
      back[t * K + y] = arg;
    }

  std::size_t best_tag = 0;
  for (std::size_t y = 1; y < K; ++y)
    if (delta[(T - 1) * K + y] > delta[(T - 1) * K + best_tag]) best_tag = y;

  std::vector<Tag> path(T);
  std::size_t cur = best_tag;
  for (std::size_t t = T; t-- > 0;) {
    path[t] = model.tag_set[cur];
    cur = back[t * K + cur];
  }
  return path;
}

// ---------------------------------------------------------------------
// Model persistence: versioned plain text, full decimal precision.

inline void CrfModel::save(std::ostream& out) const {
  const std::size_t K = num_tags();
  const std::size_t F = num_features();
  out << "phoner-crf 1\n";
  out << "template window=" << tmpl.window
      << " identity=" << (tmpl.use_unit_identity ? 1 : 0)
      << " affixes=" << (tmpl.use_affixes ? 1 : 0)
      << " bigrams=" << (tmpl.use_bigrams ? 1 : 0) << "\n";
  out << "tags " << K << "\n";
  for (const Tag& t : tag_set) out << t.str() << "\n";
  out << "features " << F << "\n";
  for (const std::string& f : feature_names) out << f << "\n";
  char buf[32];
  auto emit_row = [&](const double* row, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? " " : "") << buf;
    }
    out << "\n";
  };
  out << "emission " << F << " " << K << "\n";
  for (std::size_t f = 0; f < F; ++f) emit_row(&emission[f * K], K);
  out << "transition " << K << " " << K << "\n";
  for (std::size_t y = 0; y < K; ++y) emit_row(&transition[y * K], K);
  out << "end\n";
}

inline CrfModel CrfModel::load(std::istream& in) {
  auto fail = [](const std::string& why) -> std::runtime_error {
    return std::runtime_error("model file: " + why);
  };
  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) throw fail("unexpected end of file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "phoner-crf 1") throw fail("bad magic or version");

  CrfModel model;
  {
    int id = 0, af = 0, bg = 0;
    if (std::sscanf(next_line().c_str(),
                    "template window=%d identity=%d affixes=%d bigrams=%d",
                    &model.tmpl.window, &id, &af, &bg) != 4)
      throw fail("bad template line");
    model.tmpl.use_unit_identity = id != 0;
    model.tmpl.use_affixes = af != 0;
    model.tmpl.use_bigrams = bg != 0;
  }

  std::size_t K = 0, F = 0;
  if (std::sscanf(next_line().c_str(), "tags %zu", &K) != 1 || K == 0)
    throw fail("bad tags header");
  for (std::size_t i = 0; i < K; ++i)
    model.tag_set.push_back(Tag::parse(next_line()));
  if (std::sscanf(next_line().c_str(), "features %zu", &F) != 1)
    throw fail("bad features header");
  for (std::size_t i = 0; i < F; ++i) {
    next_line();
    if (line.empty()) throw fail("empty feature name");
    model.feature_names.push_back(line);
  }
  model.rebuild_index();

  auto read_matrix = [&](const char* name, std::size_t rows, std::size_t cols,
                         std::vector<double>& dst) {
    std::size_t r = 0, c = 0;
    char head[32];
    if (std::sscanf(next_line().c_str(), "%31s %zu %zu", head, &r, &c) != 3 ||
        std::string_view(head) != name || r != rows || c != cols)
      throw fail(std::string("bad ") + name + " header");
    dst.resize(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
      std::istringstream row(next_line());
      for (std::size_t j = 0; j < cols; ++j)
        if (!(row >> dst[i * cols + j]))
          throw fail(std::string(name) + " row " + std::to_string(i) +
                     " is short");
    }
  };
  read_matrix("emission", F, K, model.emission);
  read_matrix("transition", K, K, model.transition);
  if (next_line() != "end") throw fail("missing end marker");
  model.check_finite();
  return model;
}

}  // namespace phoner
