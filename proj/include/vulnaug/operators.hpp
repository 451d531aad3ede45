#pragma once

// Representation-level augmentation operators.
//
// Every operator has the form
//
//     h+ = alpha (.) h + beta (.) h'
//
// with element-wise coefficients:
//
//   LI  alpha ~ U(a_lo, a_hi) inside [0, 1], beta = 1 - alpha, h' a partner
//   LE  alpha ~ U(a_lo, a_hi) with a_lo >= 1, beta = 1 - alpha, h' a partner
//   SP  alpha in {0, 1/(1-p)} (dropout with rescale), h' = 0
//   BI  alpha in {0, 1} with P(alpha = 0) = swap_fraction, beta = 1 - alpha
//   GS  h+ = beta (.) h with beta ~ N(1, sigma)
//
// Coefficients are drawn from the counter generator keyed by (seed, output
// sample id, element index), so an output depends only on its inputs, the
// config and its own id. Arithmetic is carried out in double and rounded once
// to float.

#include <cmath>
#include <span>
#include <string>

#include "vulnaug/error.hpp"
#include "vulnaug/rng.hpp"
#include "vulnaug/types.hpp"

namespace vulnaug {

struct AugmentConfig {
  Method method = Method::linear_interpolation;
  double a_lo = 0.9;
  double a_hi = 1.0;
  double p = 0.1;
  double swap_fraction = 0.25;
  double sigma = 0.1;
  bool conditioned = false;
  /// One alpha per output sample instead of per element (LI / LE only).
  bool scalar_alpha = false;
  /// Gaussian scaling as h+ = h + beta (.) h instead of beta (.) h.
  bool gs_literal = false;
  std::uint64_t seed = 0;

  /// Defaults for `m`: LI draws alpha from U(0.9, 1.0), LE from U(1.0, 1.1).
  static AugmentConfig for_method(Method m, std::uint64_t seed = 0) {
    AugmentConfig cfg;
    cfg.method = m;
    cfg.seed = seed;
    if (m == Method::linear_extrapolation) {
      cfg.a_lo = 1.0;
      cfg.a_hi = 1.1;
    }
    return cfg;
  }

  void validate() const {
    if (!(p >= 0.0 && p < 1.0)) throw_usage("p must lie in [0, 1)");
    if (!(swap_fraction >= 0.0 && swap_fraction <= 1.0)) throw_usage("swap fraction must lie in [0, 1]");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw_usage("sigma must be positive");
    if (!(a_lo <= a_hi) || !std::isfinite(a_lo) || !std::isfinite(a_hi)) throw_usage("alpha bounds must satisfy lo <= hi");
    if (method == Method::linear_interpolation && (a_lo < 0.0 || a_hi > 1.0)) {
      throw_usage("linear interpolation needs 0 <= alpha-lo <= alpha-hi <= 1");
    }
    if (method == Method::linear_extrapolation && a_lo < 1.0) {
      throw_usage("linear extrapolation needs alpha-lo >= 1");
    }
  }
};

namespace detail {

inline void require_same_shape(const Matrix& h, const Matrix& partner) {
  if (!h.same_shape(partner)) {
    throw_usage("shape mismatch: " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) + " vs " +
                std::to_string(partner.rows()) + "x" + std::to_string(partner.cols()));
  }
}

/// alpha h + (1 - alpha) h' with alpha ~ U(a_lo, a_hi).
inline Matrix uniform_mix(const Matrix& h, const Matrix& partner, const AugmentConfig& cfg, SampleId out_id) {
  require_same_shape(h, partner);
  const CounterRng rng(cfg.seed);
  Matrix out(h.rows(), h.cols());
  const auto src = h.values();
  const auto mate = partner.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double alpha = rng.uniform(Stream::coefficient, out_id, cfg.scalar_alpha ? 0 : i, cfg.a_lo, cfg.a_hi);
    dst[i] = static_cast<float>(alpha * src[i] + (1.0 - alpha) * mate[i]);
  }
  return out;
}

}  // namespace detail

inline Matrix linear_interpolation(const Matrix& h, const Matrix& partner, const AugmentConfig& cfg, SampleId out_id) {
  if (cfg.a_lo < 0.0 || cfg.a_hi > 1.0 || !(cfg.a_lo <= cfg.a_hi)) {
    throw_usage("linear interpolation needs 0 <= alpha-lo <= alpha-hi <= 1");
  }
  return detail::uniform_mix(h, partner, cfg, out_id);
}

inline Matrix linear_extrapolation(const Matrix& h, const Matrix& partner, const AugmentConfig& cfg, SampleId out_id) {
  if (cfg.a_lo < 1.0 || !(cfg.a_lo <= cfg.a_hi)) throw_usage("linear extrapolation needs 1 <= alpha-lo <= alpha-hi");
  return detail::uniform_mix(h, partner, cfg, out_id);
}

/// Dropout: zero with probability p, otherwise rescale by 1/(1-p).
inline Matrix stochastic_perturbation(const Matrix& h, const AugmentConfig& cfg, SampleId out_id) {
  if (!(cfg.p >= 0.0 && cfg.p < 1.0)) throw_usage("p must lie in [0, 1)");
  const CounterRng rng(cfg.seed);
  const double keep_scale = 1.0 / (1.0 - cfg.p);
  Matrix out(h.rows(), h.cols());
  const auto src = h.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = rng.bernoulli(Stream::coefficient, out_id, i, cfg.p) ? 0.0f : static_cast<float>(src[i] * keep_scale);
  }
  return out;
}

/// Takes each element from the partner with probability swap_fraction.
inline Matrix binary_interpolation(const Matrix& h, const Matrix& partner, const AugmentConfig& cfg, SampleId out_id) {
  if (!(cfg.swap_fraction >= 0.0 && cfg.swap_fraction <= 1.0)) throw_usage("swap fraction must lie in [0, 1]");
  detail::require_same_shape(h, partner);
  const CounterRng rng(cfg.seed);
  Matrix out(h.rows(), h.cols());
  const auto src = h.values();
  const auto mate = partner.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = rng.bernoulli(Stream::coefficient, out_id, i, cfg.swap_fraction) ? mate[i] : src[i];
  }
  return out;
}

/// Per-element scaling by beta ~ N(1, sigma). With gs_literal the original is
/// kept and the scaled copy added on top: h + beta (.) h.
inline Matrix gaussian_scaling(const Matrix& h, const AugmentConfig& cfg, SampleId out_id) {
  if (!(cfg.sigma > 0.0)) throw_usage("sigma must be positive");
  const CounterRng rng(cfg.seed);
  const double offset = cfg.gs_literal ? 1.0 : 0.0;
  Matrix out(h.rows(), h.cols());
  const auto src = h.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double beta = rng.normal(Stream::coefficient, out_id, i, 1.0, cfg.sigma);
    dst[i] = static_cast<float>((offset + beta) * src[i]);
  }
  return out;
}

/// Copies the rows covered by `spans` from `original` over `augmented`.
inline Matrix conditioned_restore(Matrix augmented, const Matrix& original, std::span<const FlawSpan> spans) {
  detail::require_same_shape(augmented, original);
  for (const auto& s : spans) {
    if (s.start > s.end || s.end > original.rows()) {
      throw_usage("flaw span [" + std::to_string(s.start) + "," + std::to_string(s.end) + ") out of bounds for " +
                  std::to_string(original.rows()) + " rows");
    }
    for (std::uint32_t r = s.start; r < s.end; ++r) {
      const auto from = original.row(r);
      std::copy(from.begin(), from.end(), augmented.row(r).begin());
    }
  }
  return augmented;
}

/// Runs the operator selected by cfg.method. `partner` may be null for SP / GS.
inline Matrix apply_operator(const AugmentConfig& cfg, const Matrix& h, const Matrix* partner, SampleId out_id) {
  if (needs_partner(cfg.method) && partner == nullptr) {
    throw_usage(std::string(to_string(cfg.method)) + " needs a partner sample");
  }
  switch (cfg.method) {
    case Method::linear_interpolation: return linear_interpolation(h, *partner, cfg, out_id);
    case Method::linear_extrapolation: return linear_extrapolation(h, *partner, cfg, out_id);
    case Method::stochastic_perturbation: return stochastic_perturbation(h, cfg, out_id);
    case Method::binary_interpolation: return binary_interpolation(h, *partner, cfg, out_id);
    case Method::gaussian_scaling: return gaussian_scaling(h, cfg, out_id);
    case Method::random_oversampling: return h;
  }
  throw_internal("unhandled method");
}

/// Builds one generated sample from `parent` (and `partner` for mixing
/// methods). Token ids and flaw spans are inherited from the parent; in
/// conditioned mode the parent's flaw-span rows are restored afterwards.
inline EmbeddingSample augment_sample(const EmbeddingSample& parent, const EmbeddingSample* partner,
                                      const AugmentConfig& cfg, SampleId out_id) {
  if (partner != nullptr && partner->id == parent.id) {
    throw_usage("partner must differ from the parent sample (id " + std::to_string(parent.id) + ")");
  }
  if (cfg.conditioned && parent.flaw_spans.empty()) {
    throw_data("sample " + std::to_string(parent.id) + " has no flaw spans for conditioned augmentation");
  }
  EmbeddingSample out;
  out.id = out_id;
  out.token_ids = parent.token_ids;
  out.label = Label::vulnerable;
  out.flaw_spans = parent.flaw_spans;
  std::vector<SampleId> parents{parent.id};
  if (needs_partner(cfg.method) && partner != nullptr) parents.push_back(partner->id);
  out.provenance = Provenance::augmented(cfg.method, std::move(parents), cfg.conditioned);
  out.embedding = apply_operator(cfg, parent.embedding, partner ? &partner->embedding : nullptr, out_id);
  if (cfg.conditioned) out.embedding = conditioned_restore(std::move(out.embedding), parent.embedding, parent.flaw_spans);
  return out;
}

}  // namespace vulnaug
