#pragma once

// Locating flaw lines inside tokenized functions.
//
// BPE merges across line boundaries, so the first and last tokens of a line
// tokenized on its own often differ from the same line inside the function.
// The locator searches for the whole line first and, failing that, drops one
// token from each end per step until the remaining interior matches or
// nothing is left.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulnaug/container.hpp"
#include "vulnaug/error.hpp"
#include "vulnaug/types.hpp"

namespace vulnaug {

enum class LocateStatus { exact, trimmed, unlocatable };

struct LocateResult {
  LocateStatus status = LocateStatus::unlocatable;
  std::optional<FlawSpan> span;

  bool located() const noexcept { return span.has_value(); }
};

/// Leftmost occurrence of `line_tokens` in `function_tokens`, trimming both
/// ends of the query one token per step on failure. Throws a usage error for
/// an empty query.
inline LocateResult locate_flaw_span(std::span<const TokenId> function_tokens, std::span<const TokenId> line_tokens) {
  if (line_tokens.empty()) throw_usage("flaw line has no tokens");
  const std::size_t len = line_tokens.size();
  for (std::size_t trim = 0; 2 * trim < len; ++trim) {
    const auto query = line_tokens.subspan(trim, len - 2 * trim);
    const auto it = std::search(function_tokens.begin(), function_tokens.end(), query.begin(), query.end());
    if (it == function_tokens.end()) continue;
    const auto start = static_cast<std::uint32_t>(it - function_tokens.begin());
    FlawSpan span{start, start + static_cast<std::uint32_t>(query.size()), static_cast<std::uint32_t>(trim),
                  static_cast<std::uint32_t>(trim)};
    return {trim == 0 ? LocateStatus::exact : LocateStatus::trimmed, span};
  }
  return {};
}

/// Flaw lines per sample id, each a token sequence.
using FlawLineMap = std::map<SampleId, std::vector<std::vector<TokenId>>>;

struct AnnotateReport {
  std::size_t located = 0;      ///< lines matched verbatim
  std::size_t trimmed = 0;      ///< lines matched after trimming
  std::size_t unlocatable = 0;  ///< lines with no match at any trim level
  std::size_t samples_annotated = 0;
  std::vector<SampleId> unlocatable_samples;  ///< samples where no line was found

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["located"] = located;
    j["trimmed"] = trimmed;
    j["unlocatable"] = unlocatable;
    j["samples_annotated"] = samples_annotated;
    j["unlocatable_samples"] = unlocatable_samples;
    return j;
  }
};

/// Locates every line of every listed sample and replaces that sample's flaw
/// spans with the union of the located spans. Samples with no located line get
/// an empty span list.
inline AnnotateReport annotate_records(std::vector<SampleRecord>& records, const FlawLineMap& lines) {
  std::map<SampleId, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].id, i);

  AnnotateReport report;
  for (const auto& [id, seqs] : lines) {
    auto it = index.find(id);
    if (it == index.end()) throw_data("unknown id " + std::to_string(id));
    auto& rec = records[it->second];
    if (rec.label != Label::vulnerable) throw_data("flaw lines given for clean sample " + std::to_string(id));

    std::vector<FlawSpan> spans;
    for (const auto& seq : seqs) {
      if (seq.empty()) throw_data("sample " + std::to_string(id) + ": empty flaw line");
      const auto result = locate_flaw_span(rec.token_ids, seq);
      switch (result.status) {
        case LocateStatus::exact: ++report.located; break;
        case LocateStatus::trimmed: ++report.trimmed; break;
        case LocateStatus::unlocatable: ++report.unlocatable; break;
      }
      if (result.span) spans.push_back(*result.span);
    }
    rec.flaw_spans = merge_spans(std::move(spans));
    if (rec.flaw_spans.empty()) {
      report.unlocatable_samples.push_back(id);
    } else {
      ++report.samples_annotated;
    }
  }
  return report;
}

/// Reads a lines file: one `{"id":..,"line_token_ids":[..]}` object per line.
/// Several lines for one id accumulate in file order.
inline FlawLineMap read_flaw_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  FlawLineMap lines;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      lines[j.at("id").get<SampleId>()].push_back(j.at("line_token_ids").get<std::vector<TokenId>>());
    } catch (const nlohmann::json::exception& e) {
      throw_data(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return lines;
}

/// Annotates the container at `dir` in place (metadata only).
inline AnnotateReport annotate_dataset(const std::filesystem::path& dir, const FlawLineMap& lines) {
  Manifest manifest;
  std::vector<SampleRecord> records;
  {
    DatasetReader reader(dir);
    manifest = reader.manifest();
    records = reader.records();
  }
  auto report = annotate_records(records, lines);
  rewrite_metadata(dir, manifest, records);
  return report;
}

}  // namespace vulnaug
