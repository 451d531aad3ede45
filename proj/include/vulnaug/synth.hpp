#pragma once

// Synthetic planted-signal datasets.
//
// Clean samples have i.i.d. N(0, 1) token rows. A vulnerable sample is drawn
// the same way, then the rows of one random span get +mu added to their first
// k dimensions. Annotated vulnerable samples record that span as their flaw
// span and get a matching entry in lines.jsonl.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vulnaug/container.hpp"
#include "vulnaug/error.hpp"
#include "vulnaug/rng.hpp"
#include "vulnaug/types.hpp"

namespace vulnaug {

inline constexpr const char* kLinesFile = "lines.jsonl";

struct SynthSpec {
  std::size_t block_size = 32;
  std::size_t dim = 16;
  std::size_t vulnerable = 60;
  std::size_t clean = 960;
  std::size_t span_min = 1;
  std::size_t span_max = 3;
  double mu = 2.0;
  std::size_t signal_dims = 4;
  /// Share of vulnerable samples with a recorded flaw span (5,895 of 8,783 in BigVul).
  double annotated_frac = 5895.0 / 8783.0;
  /// Lower bound on tokens per sample; 0 means half the block.
  std::size_t min_tokens = 0;
  std::uint32_t vocab = 50265;
  std::uint64_t seed = 0;

  std::size_t token_floor() const {
    const std::size_t base = min_tokens == 0 ? std::max<std::size_t>(1, block_size / 2) : min_tokens;
    return std::clamp(std::max(base, span_max), std::size_t{1}, block_size);
  }

  void validate() const {
    if (block_size == 0 || dim == 0) throw_usage("block size and dim must be positive");
    if (signal_dims > dim) throw_usage("signal dims exceed embedding dim");
    if (span_min < 1 || span_min > span_max) throw_usage("span range must satisfy 1 <= min <= max");
    if (span_max > block_size) throw_usage("span longer than block size");
    if (min_tokens > block_size) throw_usage("min tokens exceed block size");
    if (!(annotated_frac >= 0.0 && annotated_frac <= 1.0)) throw_usage("annotated fraction must lie in [0, 1]");
    if (!std::isfinite(mu)) throw_usage("mu must be finite");
    if (vocab == 0) throw_usage("vocabulary must be non-empty");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["block"] = block_size;
    j["dim"] = dim;
    j["vuln"] = vulnerable;
    j["clean"] = clean;
    j["span_min"] = span_min;
    j["span_max"] = span_max;
    j["mu"] = mu;
    j["k"] = signal_dims;
    j["annotated_frac"] = annotated_frac;
    j["min_tokens"] = min_tokens;
    j["vocab"] = vocab;
    j["seed"] = seed;
    return j;
  }

  /// Reads the fields present in `j`; missing ones keep their defaults.
  static SynthSpec from_json(const nlohmann::json& j) {
    SynthSpec s;
    s.block_size = j.value("block", s.block_size);
    s.dim = j.value("dim", s.dim);
    s.vulnerable = j.value("vuln", s.vulnerable);
    s.clean = j.value("clean", s.clean);
    s.span_min = j.value("span_min", s.span_min);
    s.span_max = j.value("span_max", s.span_max);
    s.mu = j.value("mu", s.mu);
    s.signal_dims = j.value("k", s.signal_dims);
    s.annotated_frac = j.value("annotated_frac", s.annotated_frac);
    s.min_tokens = j.value("min_tokens", s.min_tokens);
    s.vocab = j.value("vocab", s.vocab);
    s.seed = j.value("seed", s.seed);
    return s;
  }
};

/// Sample `index` of the dataset described by `spec`. Vulnerable samples come
/// first (indices 0 .. vulnerable-1). The planted span is returned through
/// `planted` for vulnerable samples, annotated or not.
inline EmbeddingSample synth_sample(const SynthSpec& spec, std::size_t index, FlawSpan* planted = nullptr) {
  const CounterRng rng(spec.seed);
  const SampleId id = index;
  const std::size_t floor = spec.token_floor();
  const std::size_t n = floor + rng.below(Stream::synth_layout, id, 0, spec.block_size - floor + 1);

  EmbeddingSample s;
  s.id = id;
  s.label = index < spec.vulnerable ? Label::vulnerable : Label::clean;
  s.token_ids.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    s.token_ids[t] = static_cast<TokenId>(rng.below(Stream::synth_tokens, id, t, spec.vocab));
  }
  s.embedding = Matrix(spec.block_size, spec.dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < spec.dim; ++c) {
      s.embedding(r, c) = static_cast<float>(rng.normal(Stream::synth_rows, id, r * spec.dim + c));
    }
  }
  if (s.label == Label::vulnerable) {
    const auto len = static_cast<std::uint32_t>(
        spec.span_min + rng.below(Stream::synth_layout, id, 1, spec.span_max - spec.span_min + 1));
    const auto start = static_cast<std::uint32_t>(rng.below(Stream::synth_layout, id, 2, n - len + 1));
    for (std::uint32_t r = start; r < start + len; ++r) {
      for (std::size_t c = 0; c < spec.signal_dims; ++c) {
        s.embedding(r, c) = static_cast<float>(static_cast<double>(s.embedding(r, c)) + spec.mu);
      }
    }
    const FlawSpan span{start, start + len};
    if (planted != nullptr) *planted = span;
    if (rng.uniform(Stream::synth_layout, id, 3) < spec.annotated_frac) s.flaw_spans.push_back(span);
  }
  return s;
}

/// Writes the container to `dir` plus lines.jsonl with the token sequence of
/// every recorded flaw span.
inline Manifest generate(const SynthSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  DatasetWriter writer(dir, spec.block_size, spec.dim);
  std::ofstream lines(dir / kLinesFile, std::ios::binary | std::ios::trunc);
  if (!lines) throw_internal("cannot write " + (dir / kLinesFile).string());
  const std::size_t total = spec.vulnerable + spec.clean;
  for (std::size_t i = 0; i < total; ++i) {
    const auto s = synth_sample(spec, i);
    for (const auto& span : s.flaw_spans) {
      nlohmann::ordered_json j;
      j["id"] = s.id;
      j["line_token_ids"] = std::vector<TokenId>(s.token_ids.begin() + span.start, s.token_ids.begin() + span.end);
      lines << j.dump() << '\n';
    }
    writer.append(s);
  }
  lines.close();
  if (lines.fail()) throw_internal("write failed: " + (dir / kLinesFile).string());
  return writer.finish();
}

}  // namespace vulnaug
