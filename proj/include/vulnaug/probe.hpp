#pragma once

// Linear probe used to measure augmentation effects without fine-tuning a
// transformer: mean-pool each sample's token rows, then fit a logistic head
// with mini-batch gradient descent on binary cross-entropy.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnaug/container.hpp"
#include "vulnaug/error.hpp"
#include "vulnaug/rng.hpp"
#include "vulnaug/types.hpp"

namespace vulnaug {

struct ProbeConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.5;
  std::size_t batch_size = 32;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw_usage("epochs must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw_usage("learning rate must be positive");
    if (batch_size < 1) throw_usage("batch size must be at least 1");
    if (!(threshold > 0.0 && threshold < 1.0)) throw_usage("threshold must lie in (0, 1)");
  }
};

/// Mean of the first n (non-padding) rows.
inline std::vector<double> pool(const EmbeddingSample& sample) {
  const std::size_t n = sample.num_tokens();
  if (n == 0) throw_data("sample " + std::to_string(sample.id) + " has no tokens to pool");
  const auto& e = sample.embedding;
  std::vector<double> out(e.cols(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = e.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c];
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

/// Pooled feature vectors with binary labels (1 = vulnerable), row-major.
struct FeatureSet {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * dim, dim); }

  void push_back(std::span<const double> x, int label) {
    if (dim == 0) dim = x.size();
    if (x.size() != dim) throw_data("feature dimension mismatch");
    values.insert(values.end(), x.begin(), x.end());
    labels.push_back(label);
  }
};

inline FeatureSet extract_features(const DatasetReader& reader) {
  FeatureSet set;
  set.dim = reader.dim();
  set.values.reserve(reader.size() * reader.dim());
  for (std::size_t i = 0; i < reader.size(); ++i) {
    const auto s = reader.sample_at(i);
    set.push_back(pool(s), s.label == Label::vulnerable ? 1 : 0);
  }
  return set;
}

struct ProbeModel {
  std::vector<double> weights;
  double bias = 0.0;

  double logit(std::span<const double> x) const {
    return std::inner_product(x.begin(), x.end(), weights.begin(), bias);
  }
  double score(std::span<const double> x) const { return 1.0 / (1.0 + std::exp(-logit(x))); }
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

/// Mean BCE over the rows `batch` of `data` and its gradient. The loss uses
/// the softplus form log(1 + e^z) - y z, which stays finite for large |z|.
inline LossAndGradient bce_loss_and_gradient(const ProbeModel& model, const FeatureSet& data,
                                             std::span<const std::size_t> batch) {
  LossAndGradient out;
  out.grad_weights.assign(data.dim, 0.0);
  for (const auto i : batch) {
    const auto x = data.row(i);
    const double z = model.logit(x);
    const double y = data.labels[i];
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += softplus - y * z;
    const double residual = 1.0 / (1.0 + std::exp(-z)) - y;
    for (std::size_t c = 0; c < data.dim; ++c) out.grad_weights[c] += residual * x[c];
    out.grad_bias += residual;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& g : out.grad_weights) g *= inv;
  out.grad_bias *= inv;
  return out;
}

inline double mean_bce(const ProbeModel& model, const FeatureSet& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return bce_loss_and_gradient(model, data, all).loss;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double threshold = 0.5;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["auc"] = auc;
    j["precision_pct"] = precision * 100.0;
    j["recall_pct"] = recall * 100.0;
    j["f1_pct"] = f1 * 100.0;
    j["auc_pct"] = auc * 100.0;
    j["tp"] = tp;
    j["fp"] = fp;
    j["tn"] = tn;
    j["fn"] = fn;
    j["threshold"] = threshold;
    return j;
  }
};

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Area under the ROC curve by the Mann-Whitney rank statistic, ties counted
/// half. Returns NaN when either class is absent.
inline double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum stays integral with averaged tie ranks.
  std::uint64_t twice_rank_sum = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t twice_avg_rank = (i + 1) + j;  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        twice_rank_sum += twice_avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::numeric_limits<double>::quiet_NaN();
  const std::uint64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

inline MetricsReport compute_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw_usage("scores and labels differ in length");
  MetricsReport m;
  m.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++m.tp;
    else if (predicted) ++m.fp;
    else if (actual) ++m.fn;
    else ++m.tn;
  }
  m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  m.auc = auc_mann_whitney(scores, labels);
  return m;
}

inline MetricsReport evaluate(const ProbeModel& model, const FeatureSet& test, const ProbeConfig& cfg) {
  if (test.size() == 0) throw_data("empty test set");
  std::vector<double> scores(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) scores[i] = model.score(test.row(i));
  return compute_metrics(scores, test.labels, cfg.threshold);
}

inline MetricsReport evaluate(const ProbeModel& model, const DatasetReader& test, const ProbeConfig& cfg) {
  return evaluate(model, extract_features(test), cfg);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Mini-batch gradient descent from zero weights. Batches follow a per-epoch
/// shuffle drawn from the counter generator, so the result depends only on the
/// data and cfg.seed. With a validation set, the epoch with the best
/// validation F1 (earliest on ties) is returned; otherwise the last epoch.
inline ProbeModel train_probe(const FeatureSet& train, const ProbeConfig& cfg, const FeatureSet* valid = nullptr) {
  cfg.validate();
  if (train.size() == 0) throw_data("empty training set");
  const auto positives = static_cast<std::size_t>(std::count(train.labels.begin(), train.labels.end(), 1));
  if (positives == 0 || positives == train.size()) throw_data("training set has a single class");

  ProbeModel model{std::vector<double>(train.dim, 0.0), 0.0};
  std::optional<ProbeModel> best;
  double best_f1 = -1.0;

  const CounterRng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.below(Stream::shuffle, epoch, i, i + 1)]);
    }
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
      const auto end = std::min(order.size(), begin + cfg.batch_size);
      const auto step = bce_loss_and_gradient(model, train, std::span<const std::size_t>(order).subspan(begin, end - begin));
      if (!std::isfinite(step.loss)) {
        throw_data("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }
      for (std::size_t c = 0; c < train.dim; ++c) model.weights[c] -= cfg.learning_rate * step.grad_weights[c];
      model.bias -= cfg.learning_rate * step.grad_bias;
    }
    if (valid != nullptr && valid->size() > 0) {
      const double f1 = evaluate(model, *valid, cfg).f1;
      if (f1 > best_f1) {
        best_f1 = f1;
        best = model;
      }
    }
  }
  return best ? *best : model;
}

inline ProbeModel train_probe(const DatasetReader& train, const ProbeConfig& cfg, const DatasetReader* valid = nullptr) {
  const auto train_set = extract_features(train);
  if (valid == nullptr) return train_probe(train_set, cfg);
  const auto valid_set = extract_features(*valid);
  return train_probe(train_set, cfg, &valid_set);
}

}  // namespace vulnaug
