#pragma once

// Study matrix runner: for each seed and strategy, augment (or not), train
// the probe, evaluate, then aggregate medians over seeds and compare every
// strategy against the no-augmentation baseline.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnaug/container.hpp"
#include "vulnaug/error.hpp"
#include "vulnaug/pipeline.hpp"
#include "vulnaug/probe.hpp"
#include "vulnaug/synth.hpp"

namespace vulnaug {

inline constexpr const char* kBaselineStrategy = "none";

/// A named row of the study: no augmentation, random oversampling, or one
/// operator in blind or conditioned mode.
struct Strategy {
  std::string name;
  std::optional<Method> method;  ///< empty for the baseline
  bool conditioned = false;

  static Strategy parse(const std::string& name) {
    if (name == kBaselineStrategy) return {name, std::nullopt, false};
    if (name == "ros") return {name, Method::random_oversampling, false};
    std::string op = name;
    bool conditioned = false;
    if (name.starts_with("blind-")) {
      op = name.substr(6);
    } else if (name.starts_with("cond-")) {
      op = name.substr(5);
      conditioned = true;
    }
    const auto m = parse_method(op);
    if (m == Method::random_oversampling) throw_usage("random oversampling has no blind/conditioned variants");
    return {name, m, conditioned};
  }

  /// none, ros, then blind and conditioned variants of all five operators.
  static std::vector<std::string> full_matrix() {
    std::vector<std::string> names{kBaselineStrategy, "ros"};
    for (const char* mode : {"blind-", "cond-"}) {
      for (const char* op : {"li", "le", "sp", "bi", "gs"}) names.push_back(std::string(mode) + op);
    }
    return names;
  }
};

struct ReproConfig {
  std::optional<SynthSpec> synth;  ///< generate train/test per seed
  std::filesystem::path train, test, valid;  ///< or use fixed datasets
  std::vector<std::string> strategies{kBaselineStrategy, "ros"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  ProbeConfig probe;
  std::uint64_t rate = 23;
  std::filesystem::path work_dir;
  nlohmann::json source;  ///< config as given, echoed into the report

  static ReproConfig from_json(const nlohmann::json& j) {
    ReproConfig c;
    c.source = j;
    try {
      const auto& ds = j.at("dataset");
      if (ds.contains("synth")) {
        c.synth = SynthSpec::from_json(ds.at("synth"));
      } else {
        c.train = ds.at("train").get<std::string>();
        c.test = ds.at("test").get<std::string>();
        if (ds.contains("valid")) c.valid = ds.at("valid").get<std::string>();
      }
      if (j.contains("strategies")) c.strategies = j.at("strategies").get<std::vector<std::string>>();
      if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      if (j.contains("probe")) {
        const auto& p = j.at("probe");
        c.probe.epochs = p.value("epochs", c.probe.epochs);
        c.probe.learning_rate = p.value("lr", c.probe.learning_rate);
        c.probe.batch_size = p.value("batch", c.probe.batch_size);
        c.probe.threshold = p.value("threshold", c.probe.threshold);
      }
      c.rate = j.value("rate", c.rate);
      if (j.contains("work_dir")) c.work_dir = j.at("work_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw_usage(std::string("invalid repro config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static ReproConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw_usage("cannot open config " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw_usage(std::string("invalid repro config: ") + e.what());
    }
  }

  void validate() const {
    if (seeds.empty()) throw_usage("at least one seed is required");
    if (strategies.empty()) throw_usage("at least one strategy is required");
    for (const auto& s : strategies) Strategy::parse(s);
    if (synth) synth->validate();
    probe.validate();
    if (rate < 1) throw_usage("rate must be at least 1");
  }
};

struct StrategyRow {
  std::string strategy;
  std::optional<std::string> error;
  std::vector<std::pair<std::uint64_t, MetricsReport>> per_seed;
  MetricsReport median;
  std::optional<MetricsReport> delta;  ///< median minus baseline median

  /// "+" beat the baseline on F1, "-" fell short, "=" tied.
  std::string flag() const {
    if (!delta) return "";
    return delta->f1 > 0.0 ? "+" : (delta->f1 < 0.0 ? "-" : "=");
  }
};

struct RunReport {
  std::vector<StrategyRow> rows;
  nlohmann::json config;

  const StrategyRow* find(const std::string& name) const {
    for (const auto& r : rows) {
      if (r.strategy == name) return &r;
    }
    return nullptr;
  }

  nlohmann::ordered_json to_json() const {
    auto metrics = [](const MetricsReport& m) {
      nlohmann::ordered_json j;
      j["precision"] = m.precision;
      j["recall"] = m.recall;
      j["f1"] = m.f1;
      j["auc"] = m.auc;
      return j;
    };
    nlohmann::ordered_json j;
    j["config"] = config;
    j["baseline"] = kBaselineStrategy;
    auto rows_json = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json row;
      row["strategy"] = r.strategy;
      row["status"] = r.error ? "error" : "ok";
      if (r.error) {
        row["error"] = *r.error;
      } else {
        row["median"] = metrics(r.median);
        row["median_pct"] = {{"precision", r.median.precision * 100}, {"recall", r.median.recall * 100},
                             {"f1", r.median.f1 * 100}, {"auc", r.median.auc * 100}};
        row["delta"] = r.delta ? metrics(*r.delta) : nlohmann::ordered_json();
        row["beats_baseline"] = r.flag();
        auto seeds = nlohmann::ordered_json::array();
        for (const auto& [seed, m] : r.per_seed) {
          nlohmann::ordered_json s;
          s["seed"] = seed;
          s["metrics"] = m.to_json();
          seeds.push_back(std::move(s));
        }
        row["per_seed"] = std::move(seeds);
      }
      rows_json.push_back(std::move(row));
    }
    j["rows"] = std::move(rows_json);
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(12) << "Strategy" << std::right << std::setw(10) << "Precision" << std::setw(10)
       << "Recall" << std::setw(10) << "F1" << std::setw(10) << "AUC" << std::setw(10) << "dF1" << std::setw(4)
       << "" << '\n';
    os << std::fixed << std::setprecision(2);
    for (const auto& r : rows) {
      os << std::left << std::setw(12) << r.strategy << std::right;
      if (r.error) {
        os << "  error: " << *r.error << '\n';
        continue;
      }
      os << std::setw(10) << r.median.precision * 100 << std::setw(10) << r.median.recall * 100 << std::setw(10)
         << r.median.f1 * 100 << std::setw(10) << r.median.auc * 100;
      if (r.delta) {
        os << std::setw(10) << std::showpos << r.delta->f1 * 100 << std::noshowpos << std::setw(4) << r.flag();
      }
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline MetricsReport median_metrics(const std::vector<std::pair<std::uint64_t, MetricsReport>>& runs) {
  auto pick = [&runs](auto field) {
    std::vector<double> v;
    for (const auto& [seed, m] : runs) v.push_back(field(m));
    return median(std::move(v));
  };
  MetricsReport m;
  m.precision = pick([](const MetricsReport& r) { return r.precision; });
  m.recall = pick([](const MetricsReport& r) { return r.recall; });
  m.f1 = pick([](const MetricsReport& r) { return r.f1; });
  m.auc = pick([](const MetricsReport& r) { return r.auc; });
  m.threshold = runs.empty() ? 0.5 : runs.front().second.threshold;
  return m;
}

/// Derives a sub-seed so train and test sets of one study seed differ.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  const CounterRng rng(seed);
  const auto b = rng.block(Stream::instance, salt, 0);
  return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
}

}  // namespace detail

/// Augmented training set for one strategy, written under `dir`.
inline std::filesystem::path prepare_training_set(const Strategy& strategy, const std::filesystem::path& train,
                                                  const std::filesystem::path& dir, std::uint64_t seed,
                                                  std::uint64_t rate) {
  if (!strategy.method) return train;
  PipelinePlan plan;
  plan.augment = AugmentConfig::for_method(*strategy.method, seed);
  plan.augment.conditioned = strategy.conditioned;
  plan.source = train;
  plan.output = dir / strategy.name;
  plan.rate = rate;
  if (*strategy.method == Method::random_oversampling) {
    plan.eligibility = Eligibility::all_vulnerable;
    plan.to_ratio = ClassRatio{1, 1};
  }
  balance(plan);
  return plan.output;
}

inline RunReport run_repro(const ReproConfig& cfg, const std::filesystem::path& work_dir) {
  cfg.validate();
  RunReport report;
  report.config = cfg.source;
  std::vector<Strategy> strategies;
  for (const auto& s : cfg.strategies) strategies.push_back(Strategy::parse(s));
  for (const auto& s : strategies) {
    StrategyRow row;
    row.strategy = s.name;
    report.rows.push_back(std::move(row));
  }

  for (const auto seed : cfg.seeds) {
    const auto seed_dir = work_dir / ("seed-" + std::to_string(seed));
    std::filesystem::path train = cfg.train, test = cfg.test, valid = cfg.valid;
    if (cfg.synth) {
      auto spec = *cfg.synth;
      spec.seed = detail::derive_seed(seed, 0);
      train = seed_dir / "train";
      generate(spec, train);
      spec.seed = detail::derive_seed(seed, 1);
      test = seed_dir / "test";
      generate(spec, test);
    }
    const DatasetReader test_reader(test);
    const auto test_set = extract_features(test_reader);
    std::optional<FeatureSet> valid_set;
    if (!valid.empty()) valid_set = extract_features(DatasetReader(valid));

    ProbeConfig probe = cfg.probe;
    probe.seed = seed;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
      auto& row = report.rows[i];
      if (row.error) continue;
      try {
        const auto train_dir = prepare_training_set(strategies[i], train, seed_dir, seed, cfg.rate);
        const auto train_set = extract_features(DatasetReader(train_dir));
        const auto model = train_probe(train_set, probe, valid_set ? &*valid_set : nullptr);
        row.per_seed.emplace_back(seed, evaluate(model, test_set, probe));
        if (train_dir != train) std::filesystem::remove_all(train_dir);
      } catch (const Error& e) {
        row.error = "seed " + std::to_string(seed) + ": " + e.what();
        row.per_seed.clear();
      }
    }
    std::filesystem::remove_all(seed_dir);
  }

  const StrategyRow* baseline = nullptr;
  for (auto& row : report.rows) {
    if (!row.error) row.median = detail::median_metrics(row.per_seed);
    if (row.strategy == kBaselineStrategy && !row.error) baseline = &row;
  }
  if (baseline != nullptr) {
    for (auto& row : report.rows) {
      if (row.error || &row == baseline) continue;
      MetricsReport d;
      d.precision = row.median.precision - baseline->median.precision;
      d.recall = row.median.recall - baseline->median.recall;
      d.f1 = row.median.f1 - baseline->median.f1;
      d.auc = row.median.auc - baseline->median.auc;
      d.threshold = row.median.threshold;
      row.delta = d;
    }
  }
  return report;
}

}  // namespace vulnaug
