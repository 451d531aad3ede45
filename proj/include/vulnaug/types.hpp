#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vulnaug/error.hpp"

namespace vulnaug {

using SampleId = std::uint64_t;
using TokenId = std::uint32_t;

enum class Label : std::uint8_t { clean, vulnerable };

inline std::string_view to_string(Label label) { return label == Label::vulnerable ? "vuln" : "clean"; }

inline Label parse_label(std::string_view s) {
  if (s == "vuln") return Label::vulnerable;
  if (s == "clean") return Label::clean;
  throw_data("unknown label '" + std::string(s) + "'");
}

/// Augmentation strategies. RandomOversampling copies raw samples and never
/// goes through the element-wise operators.
enum class Method : std::uint8_t {
  linear_interpolation,
  linear_extrapolation,
  stochastic_perturbation,
  binary_interpolation,
  gaussian_scaling,
  random_oversampling,
};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::linear_interpolation: return "li";
    case Method::linear_extrapolation: return "le";
    case Method::stochastic_perturbation: return "sp";
    case Method::binary_interpolation: return "bi";
    case Method::gaussian_scaling: return "gs";
    case Method::random_oversampling: return "ros";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::linear_interpolation, Method::linear_extrapolation, Method::stochastic_perturbation,
                 Method::binary_interpolation, Method::gaussian_scaling, Method::random_oversampling}) {
    if (to_string(m) == s) return m;
  }
  throw_usage("unknown method '" + std::string(s) + "'");
}

/// True for methods that mix the parent with a second (partner) sample.
constexpr bool needs_partner(Method m) {
  return m == Method::linear_interpolation || m == Method::linear_extrapolation ||
         m == Method::binary_interpolation;
}

/// Half-open token interval [start, end) covering one flaw line.
struct FlawSpan {
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  std::uint32_t trimmed_front = 0;
  std::uint32_t trimmed_back = 0;

  std::uint32_t length() const { return end - start; }

  friend bool operator==(const FlawSpan&, const FlawSpan&) = default;
};

/// Sorts spans and unions any that overlap or touch. Trim counts of merged
/// spans are summed.
inline std::vector<FlawSpan> merge_spans(std::vector<FlawSpan> spans) {
  std::sort(spans.begin(), spans.end(), [](const FlawSpan& a, const FlawSpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  std::vector<FlawSpan> out;
  for (const auto& s : spans) {
    if (!out.empty() && s.start <= out.back().end) {
      auto& last = out.back();
      last.end = std::max(last.end, s.end);
      last.trimmed_front += s.trimmed_front;
      last.trimmed_back += s.trimmed_back;
    } else {
      out.push_back(s);
    }
  }
  return out;
}

/// Dense row-major float matrix; one row per token position.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) throw_usage("matrix value count does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  std::span<float> row(std::size_t r) { return std::span<float>(data_).subspan(r * cols_, cols_); }
  std::span<const float> row(std::size_t r) const { return std::span<const float>(data_).subspan(r * cols_, cols_); }

  bool same_shape(const Matrix& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Where a sample came from. Originals have no method and no parents.
struct Provenance {
  std::optional<Method> method;
  std::vector<SampleId> parents;
  bool conditioned = false;

  bool is_original() const noexcept { return !method.has_value(); }

  static Provenance original() { return {}; }
  static Provenance augmented(Method m, std::vector<SampleId> parents, bool conditioned = false) {
    return {m, std::move(parents), conditioned};
  }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// One function: its tokens, its L x d embedding block and its annotations.
struct EmbeddingSample {
  SampleId id = 0;
  std::vector<TokenId> token_ids;
  Matrix embedding;
  Label label = Label::clean;
  std::vector<FlawSpan> flaw_spans;
  Provenance provenance;

  std::size_t num_tokens() const noexcept { return token_ids.size(); }

  friend bool operator==(const EmbeddingSample&, const EmbeddingSample&) = default;
};

/// Checks spans lie in [0, n), are non-empty, sorted and pairwise disjoint.
inline void validate_spans(std::span<const FlawSpan> spans, std::size_t n, SampleId id) {
  std::uint32_t prev_end = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start >= s.end || s.end > n) {
      throw_data("sample " + std::to_string(id) + ": flaw span [" + std::to_string(s.start) + "," +
                 std::to_string(s.end) + ") out of bounds for " + std::to_string(n) + " tokens");
    }
    if (i > 0 && s.start < prev_end) {
      throw_data("sample " + std::to_string(id) + ": flaw spans overlap or are unsorted");
    }
    prev_end = s.end;
  }
}

inline void validate_sample(const EmbeddingSample& s, std::size_t block_size, std::size_t dim) {
  if (s.embedding.rows() != block_size || s.embedding.cols() != dim) {
    throw_data("sample " + std::to_string(s.id) + ": embedding is " + std::to_string(s.embedding.rows()) + "x" +
               std::to_string(s.embedding.cols()) + ", expected " + std::to_string(block_size) + "x" +
               std::to_string(dim));
  }
  if (s.token_ids.size() > block_size) {
    throw_data("sample " + std::to_string(s.id) + ": " + std::to_string(s.token_ids.size()) +
               " tokens exceed block size " + std::to_string(block_size));
  }
  validate_spans(s.flaw_spans, s.token_ids.size(), s.id);
}

}  // namespace vulnaug
