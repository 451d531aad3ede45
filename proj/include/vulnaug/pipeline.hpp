#pragma once

// Dataset-level augmentation.
//
// Only vulnerable samples are generated, and all of them before training.
// The output holds every original sample unchanged, in input order, followed
// by the generated samples ordered by (parent id, replica index). Parents and
// partners are fetched from the source container by offset, so memory stays
// at the eligible index plus a couple of samples.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vulnaug/container.hpp"
#include "vulnaug/error.hpp"
#include "vulnaug/operators.hpp"
#include "vulnaug/rng.hpp"
#include "vulnaug/types.hpp"

namespace vulnaug {

enum class Eligibility { all_vulnerable, flaw_annotated_only };

inline std::string_view to_string(Eligibility e) {
  return e == Eligibility::all_vulnerable ? "all_vulnerable" : "flaw_annotated_only";
}

/// Target class ratio vulnerable:clean, e.g. {1, 1}.
struct ClassRatio {
  std::uint64_t vulnerable = 1;
  std::uint64_t clean = 1;
};

inline ClassRatio parse_ratio(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw_usage("ratio must look like A:B");
  try {
    ClassRatio r{std::stoull(std::string(text.substr(0, colon))), std::stoull(std::string(text.substr(colon + 1)))};
    if (r.vulnerable == 0 || r.clean == 0) throw_usage("ratio terms must be positive");
    return r;
  } catch (const std::logic_error&) {
    throw_usage("ratio must look like A:B");
  }
}

struct PipelinePlan {
  AugmentConfig augment;
  /// Final multiple of each eligible sample: 1 original + (rate - 1) generated.
  std::uint64_t rate = 23;
  Eligibility eligibility = Eligibility::flaw_annotated_only;
  /// Random oversampling only: generate up to this class ratio instead of by rate.
  std::optional<ClassRatio> to_ratio;
  /// Conditioned runs: fail on vulnerable samples without spans instead of skipping them.
  bool strict = false;
  std::filesystem::path source;
  std::filesystem::path output;

  void validate() const {
    augment.validate();
    if (rate < 1) throw_usage("rate must be at least 1");
    if (to_ratio && augment.method != Method::random_oversampling) {
      throw_usage("a target ratio applies to random oversampling only");
    }
    if (source.empty() || output.empty()) throw_usage("source and output paths are required");
    if (std::filesystem::exists(source) && std::filesystem::exists(output) &&
        std::filesystem::equivalent(source, output)) {
      throw_usage("output must differ from the source dataset");
    }
  }
};

struct PipelineReport {
  std::size_t original_samples = 0;
  std::size_t eligible = 0;
  std::size_t generated = 0;
  std::vector<SampleId> skipped;  ///< vulnerable samples left out for lack of spans
  Manifest output;

  nlohmann::ordered_json to_json(const PipelinePlan& plan) const {
    nlohmann::ordered_json cfg;
    cfg["method"] = to_string(plan.augment.method);
    cfg["conditioned"] = plan.augment.conditioned;
    cfg["rate"] = plan.rate;
    cfg["seed"] = plan.augment.seed;
    cfg["eligibility"] = to_string(plan.eligibility);
    cfg["alpha_lo"] = plan.augment.a_lo;
    cfg["alpha_hi"] = plan.augment.a_hi;
    cfg["p"] = plan.augment.p;
    cfg["swap_fraction"] = plan.augment.swap_fraction;
    cfg["sigma"] = plan.augment.sigma;
    cfg["scalar_alpha"] = plan.augment.scalar_alpha;
    cfg["gs_literal"] = plan.augment.gs_literal;
    cfg["strict"] = plan.strict;
    if (plan.to_ratio) {
      cfg["to_ratio"] = std::to_string(plan.to_ratio->vulnerable) + ":" + std::to_string(plan.to_ratio->clean);
    }
    nlohmann::ordered_json j;
    j["original_samples"] = original_samples;
    j["eligible"] = eligible;
    j["generated"] = generated;
    j["skipped"] = skipped.size();
    j["skipped_ids"] = skipped;
    j["output"] = manifest_to_json(output);
    j["config"] = std::move(cfg);
    return j;
  }
};

inline constexpr const char* kRunReportFile = "run_report.json";

namespace detail {

struct EligibleSet {
  std::vector<std::size_t> positions;  ///< record positions, sorted by sample id
  std::vector<SampleId> skipped;
};

inline EligibleSet select_eligible(const DatasetReader& reader, const PipelinePlan& plan) {
  const bool need_spans = plan.eligibility == Eligibility::flaw_annotated_only || plan.augment.conditioned;
  EligibleSet set;
  const auto& records = reader.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.label != Label::vulnerable) continue;
    if (need_spans && r.flaw_spans.empty()) {
      // Skipping is the normal eligibility rule; only a conditioned run that
      // asked for every vulnerable sample treats it as an anomaly.
      if (plan.augment.conditioned && plan.eligibility == Eligibility::all_vulnerable) {
        if (plan.strict) throw_data("sample " + std::to_string(r.id) + " has no flaw spans (conditioned, strict)");
        set.skipped.push_back(r.id);
      }
      continue;
    }
    set.positions.push_back(i);
  }
  std::sort(set.positions.begin(), set.positions.end(),
            [&records](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
  return set;
}

inline SampleId next_free_id(const DatasetReader& reader) {
  SampleId max_id = 0;
  for (const auto& r : reader.records()) max_id = std::max(max_id, r.id);
  return reader.size() == 0 ? 0 : max_id + 1;
}

/// Streams every original sample into `writer` unchanged.
inline void copy_originals(const DatasetReader& reader, DatasetWriter& writer) {
  for (std::size_t i = 0; i < reader.size(); ++i) writer.append(reader.sample_at(i));
}

inline void write_report(const PipelinePlan& plan, const PipelineReport& report) {
  write_text_file(plan.output / kRunReportFile, report.to_json(plan).dump(2) + "\n");
}

}  // namespace detail

/// Copies uniformly drawn eligible vulnerable samples until the rate or the
/// target ratio is met.
inline PipelineReport random_oversampling(const PipelinePlan& plan) {
  plan.validate();
  if (plan.augment.method != Method::random_oversampling) throw_usage("random_oversampling needs method ros");
  const DatasetReader reader(plan.source);
  const auto eligible = detail::select_eligible(reader, plan);
  if (eligible.positions.empty()) throw_data("no eligible vulnerable samples in " + plan.source.string());

  std::uint64_t copies = 0;
  if (plan.to_ratio) {
    const auto& m = reader.manifest();
    const std::uint64_t target = m.num_clean * plan.to_ratio->vulnerable / plan.to_ratio->clean;
    copies = target > m.num_vulnerable ? target - m.num_vulnerable : 0;
  } else {
    copies = (plan.rate - 1) * eligible.positions.size();
  }

  // Draw parents by draw index, then order by parent id (stable) so the output
  // follows the (parent, replica) ordering used by every method.
  const CounterRng rng(plan.augment.seed);
  std::vector<std::size_t> draws(copies);
  for (std::uint64_t k = 0; k < copies; ++k) {
    draws[k] = eligible.positions[rng.below(Stream::oversample, k, 0, eligible.positions.size())];
  }
  const auto& records = reader.records();
  std::stable_sort(draws.begin(), draws.end(),
                   [&records](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });

  DatasetWriter writer(plan.output, reader.block_size(), reader.dim());
  detail::copy_originals(reader, writer);
  SampleId next_id = detail::next_free_id(reader);
  for (const auto pos : draws) {
    auto copy = reader.sample_at(pos);
    copy.provenance = Provenance::augmented(Method::random_oversampling, {copy.id});
    copy.id = next_id++;
    writer.append(copy);
  }

  PipelineReport report;
  report.original_samples = reader.size();
  report.eligible = eligible.positions.size();
  report.generated = copies;
  report.skipped = eligible.skipped;
  report.output = writer.finish();
  detail::write_report(plan, report);
  return report;
}

/// Generates (rate - 1) augmented samples per eligible vulnerable sample with
/// the configured operator. Dispatches to random_oversampling for ros.
inline PipelineReport balance(const PipelinePlan& plan) {
  if (plan.augment.method == Method::random_oversampling) return random_oversampling(plan);
  plan.validate();
  const DatasetReader reader(plan.source);
  const auto eligible = detail::select_eligible(reader, plan);
  const auto& pool = eligible.positions;
  const bool mixing = needs_partner(plan.augment.method);
  if (plan.rate > 1) {
    if (pool.empty()) throw_data("no eligible vulnerable samples in " + plan.source.string());
    if (mixing && pool.size() < 2) {
      throw_data(std::string(to_string(plan.augment.method)) + " needs at least 2 eligible samples");
    }
  }

  DatasetWriter writer(plan.output, reader.block_size(), reader.dim());
  detail::copy_originals(reader, writer);

  const CounterRng rng(plan.augment.seed);
  SampleId next_id = detail::next_free_id(reader);
  std::size_t generated = 0;
  if (plan.rate > 1) {
    for (std::size_t slot = 0; slot < pool.size(); ++slot) {
      const auto parent = reader.sample_at(pool[slot]);
      for (std::uint64_t replica = 1; replica < plan.rate; ++replica) {
        const SampleId out_id = next_id++;
        std::optional<EmbeddingSample> partner;
        if (mixing) {
          // Uniform over the pool minus the parent itself.
          auto pick = static_cast<std::size_t>(rng.below(Stream::partner, out_id, 0, pool.size() - 1));
          if (pick >= slot) ++pick;
          partner = reader.sample_at(pool[pick]);
        }
        writer.append(augment_sample(parent, partner ? &*partner : nullptr, plan.augment, out_id));
        ++generated;
      }
    }
  }

  PipelineReport report;
  report.original_samples = reader.size();
  report.eligible = pool.size();
  report.generated = generated;
  report.skipped = eligible.skipped;
  report.output = writer.finish();
  detail::write_report(plan, report);
  return report;
}

}  // namespace vulnaug
