#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "vulnaug/operators.hpp"

namespace vulnaug {
namespace {

using testing::random_matrix;
using testing::same_bytes;

Matrix row_vector(std::vector<float> v) {
  const auto n = v.size();
  return Matrix(1, n, std::move(v));
}

AugmentConfig fixed_alpha(Method m, double alpha) {
  auto cfg = AugmentConfig::for_method(m, 11);
  cfg.a_lo = cfg.a_hi = alpha;
  return cfg;
}

TEST(LinearInterpolation, FixedAlpha) {
  const auto out = linear_interpolation(row_vector({1, 2}), row_vector({3, 4}),
                                        fixed_alpha(Method::linear_interpolation, 0.95), 0);
  EXPECT_FLOAT_EQ(out(0, 0), 1.1f);
  EXPECT_FLOAT_EQ(out(0, 1), 2.1f);
}

TEST(LinearInterpolation, EqualInputsAreFixedPoint) {
  std::mt19937_64 gen(1);
  const auto h = random_matrix(gen, 6, 5);
  const auto out = linear_interpolation(h, h, AugmentConfig::for_method(Method::linear_interpolation, 3), 9);
  EXPECT_EQ(out, h);
}

TEST(LinearInterpolation, StaysBetweenEndpoints) {
  std::mt19937_64 gen(2);
  const auto cfg = AugmentConfig::for_method(Method::linear_interpolation, 5);
  for (SampleId draw = 0; draw < 1000; ++draw) {
    const auto h = random_matrix(gen, 8, 4), hp = random_matrix(gen, 8, 4);
    const auto out = linear_interpolation(h, hp, cfg, draw);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const float lo = std::min(h.values()[i], hp.values()[i]);
      const float hi = std::max(h.values()[i], hp.values()[i]);
      ASSERT_GE(out.values()[i], lo);
      ASSERT_LE(out.values()[i], hi);
    }
  }
}

TEST(LinearExtrapolation, FixedAlpha) {
  const auto out = linear_extrapolation(row_vector({1, 2}), row_vector({3, 4}),
                                        fixed_alpha(Method::linear_extrapolation, 1.1), 0);
  EXPECT_FLOAT_EQ(out(0, 0), 0.8f);
  EXPECT_FLOAT_EQ(out(0, 1), 1.8f);
}

TEST(LinearExtrapolation, AlphaOneIsIdentity) {
  std::mt19937_64 gen(3);
  const auto h = random_matrix(gen, 4, 4), hp = random_matrix(gen, 4, 4);
  EXPECT_EQ(linear_extrapolation(h, hp, fixed_alpha(Method::linear_extrapolation, 1.0), 2), h);
}

TEST(LinearExtrapolation, MovesAwayFromPartner) {
  std::mt19937_64 gen(4);
  const auto cfg = AugmentConfig::for_method(Method::linear_extrapolation, 8);
  for (SampleId draw = 0; draw < 500; ++draw) {
    const auto h = random_matrix(gen, 8, 4), hp = random_matrix(gen, 8, 4);
    const auto out = linear_extrapolation(h, hp, cfg, draw);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double moved = static_cast<double>(out.values()[i]) - h.values()[i];
      const double toward = static_cast<double>(hp.values()[i]) - h.values()[i];
      ASSERT_LE(moved * toward, 0.0);
    }
  }
}

TEST(LinearMix, RejectsBadBounds) {
  std::mt19937_64 gen(5);
  const auto h = random_matrix(gen, 2, 2);
  auto cfg = AugmentConfig::for_method(Method::linear_interpolation);
  cfg.a_hi = 1.2;
  EXPECT_THROW(linear_interpolation(h, h, cfg, 0), Error);
  EXPECT_THROW(cfg.validate(), Error);
  auto le = AugmentConfig::for_method(Method::linear_extrapolation);
  le.a_lo = 0.95;
  EXPECT_THROW(linear_extrapolation(h, h, le, 0), Error);
  EXPECT_THROW(linear_interpolation(h, random_matrix(gen, 3, 2), AugmentConfig{}, 0), Error);
}

TEST(LinearMix, ScalarAlphaSharesOneCoefficient) {
  std::mt19937_64 gen(6);
  auto cfg = AugmentConfig::for_method(Method::linear_interpolation, 1);
  cfg.scalar_alpha = true;
  const Matrix h(4, 4, 1.0f), hp(4, 4, 0.0f);
  const auto out = linear_interpolation(h, hp, cfg, 5);
  for (const float v : out.values()) EXPECT_EQ(v, out.values()[0]);
  cfg.scalar_alpha = false;
  const auto per_element = linear_interpolation(h, hp, cfg, 5);
  EXPECT_NE(per_element.values()[0], per_element.values()[1]);
}

TEST(StochasticPerturbation, SurvivorIsRescaled) {
  auto cfg = AugmentConfig::for_method(Method::stochastic_perturbation, 0);
  const Matrix h(1, 200, 0.9f);
  const auto out = stochastic_perturbation(h, cfg, 0);
  std::size_t survivors = 0;
  for (const float v : out.values()) {
    if (v != 0.0f) {
      EXPECT_FLOAT_EQ(v, 1.0f);
      ++survivors;
    }
  }
  EXPECT_GT(survivors, 0u);
}

TEST(StochasticPerturbation, ZeroProbabilityIsIdentity) {
  std::mt19937_64 gen(7);
  auto cfg = AugmentConfig::for_method(Method::stochastic_perturbation, 0);
  cfg.p = 0.0;
  const auto h = random_matrix(gen, 5, 5);
  EXPECT_EQ(stochastic_perturbation(h, cfg, 1), h);
}

TEST(StochasticPerturbation, DropRateAndExpectation) {
  const auto cfg = AugmentConfig::for_method(Method::stochastic_perturbation, 21);
  const Matrix h(1000, 100, 1.0f);
  const auto out = stochastic_perturbation(h, cfg, 0);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (const float v : out.values()) {
    zeros += v == 0.0f;
    sum += v;
  }
  EXPECT_NEAR(static_cast<double>(zeros) / out.size(), 0.1, 0.01);
  EXPECT_NEAR(sum / out.size(), 1.0, 0.02);
}

TEST(StochasticPerturbation, RejectsBadProbability) {
  auto cfg = AugmentConfig::for_method(Method::stochastic_perturbation);
  cfg.p = 1.0;
  EXPECT_THROW(stochastic_perturbation(Matrix(1, 1), cfg, 0), Error);
  cfg.p = -0.1;
  EXPECT_THROW(stochastic_perturbation(Matrix(1, 1), cfg, 0), Error);
}

TEST(BinaryInterpolation, ExtremeSwapFractions) {
  std::mt19937_64 gen(8);
  const auto h = random_matrix(gen, 6, 6), hp = random_matrix(gen, 6, 6);
  auto cfg = AugmentConfig::for_method(Method::binary_interpolation, 2);
  cfg.swap_fraction = 0.0;
  EXPECT_EQ(binary_interpolation(h, hp, cfg, 0), h);
  cfg.swap_fraction = 1.0;
  EXPECT_EQ(binary_interpolation(h, hp, cfg, 0), hp);
}

TEST(BinaryInterpolation, SupportAndFraction) {
  std::mt19937_64 gen(9);
  const auto cfg = AugmentConfig::for_method(Method::binary_interpolation, 4);
  const auto h = random_matrix(gen, 1000, 100), hp = random_matrix(gen, 1000, 100, 10.f, 20.f);
  const auto out = binary_interpolation(h, hp, cfg, 3);
  std::size_t swapped = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool from_h = same_bytes(out.values()[i], h.values()[i]);
    const bool from_partner = same_bytes(out.values()[i], hp.values()[i]);
    ASSERT_TRUE(from_h || from_partner);
    swapped += from_partner;
  }
  EXPECT_NEAR(static_cast<double>(swapped) / out.size(), 0.25, 0.01);
}

TEST(GaussianScaling, TinySigmaIsIdentity) {
  std::mt19937_64 gen(10);
  auto cfg = AugmentConfig::for_method(Method::gaussian_scaling, 1);
  cfg.sigma = 1e-12;
  const auto h = random_matrix(gen, 4, 8);
  EXPECT_EQ(gaussian_scaling(h, cfg, 0), h);
}

TEST(GaussianScaling, ZeroAbsorbs) {
  const auto out = gaussian_scaling(Matrix(8, 8, 0.0f), AugmentConfig::for_method(Method::gaussian_scaling, 2), 0);
  for (const float v : out.values()) EXPECT_EQ(v, 0.0f);
}

TEST(GaussianScaling, Moments) {
  const auto out = gaussian_scaling(Matrix(1000, 100, 1.0f), AugmentConfig::for_method(Method::gaussian_scaling, 3), 0);
  double sum = 0, sq = 0;
  for (const float v : out.values()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(out.size());
  const double mean = sum / n;
  EXPECT_NEAR(mean, 1.0, 0.002);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 0.1, 0.005);
}

TEST(GaussianScaling, LiteralReadingAddsOriginal) {
  auto cfg = AugmentConfig::for_method(Method::gaussian_scaling, 3);
  const Matrix h(100, 100, 1.0f);
  const auto scaled = gaussian_scaling(h, cfg, 0);
  cfg.gs_literal = true;
  const auto literal = gaussian_scaling(h, cfg, 0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_FLOAT_EQ(literal.values()[i], 1.0f + scaled.values()[i]);
  }
}

TEST(GaussianScaling, RejectsNonPositiveSigma) {
  auto cfg = AugmentConfig::for_method(Method::gaussian_scaling);
  cfg.sigma = 0.0;
  EXPECT_THROW(gaussian_scaling(Matrix(1, 1), cfg, 0), Error);
}

TEST(ConditionedRestore, NoSpansIsNoOp) {
  std::mt19937_64 gen(11);
  const auto a = random_matrix(gen, 8, 3), o = random_matrix(gen, 8, 3);
  EXPECT_EQ(conditioned_restore(a, o, {}), a);
}

TEST(ConditionedRestore, FullSpanRestoresEverything) {
  std::mt19937_64 gen(12);
  const auto a = random_matrix(gen, 8, 3), o = random_matrix(gen, 8, 3);
  const std::vector<FlawSpan> spans{{0, 8}};
  EXPECT_EQ(conditioned_restore(a, o, spans), o);
}

TEST(ConditionedRestore, RowsAreByteExact) {
  std::mt19937_64 gen(13);
  const auto a = random_matrix(gen, 8, 5), o = random_matrix(gen, 8, 5);
  const std::vector<FlawSpan> spans{{2, 4}};
  const auto out = conditioned_restore(a, o, spans);
  for (std::size_t r = 0; r < 8; ++r) {
    const auto& expected = (r == 2 || r == 3) ? o : a;
    for (std::size_t c = 0; c < 5; ++c) ASSERT_TRUE(same_bytes(out(r, c), expected(r, c))) << r << "," << c;
  }
}

TEST(ConditionedRestore, OutOfBounds) {
  const std::vector<FlawSpan> spans{{6, 9}};
  EXPECT_THROW(conditioned_restore(Matrix(8, 2), Matrix(8, 2), spans), Error);
}

TEST(Operators, DeterministicPerOutputId) {
  std::mt19937_64 gen(14);
  const auto h = random_matrix(gen, 8, 8), hp = random_matrix(gen, 8, 8);
  for (auto m : {Method::linear_interpolation, Method::linear_extrapolation, Method::stochastic_perturbation,
                 Method::binary_interpolation, Method::gaussian_scaling}) {
    const auto cfg = AugmentConfig::for_method(m, 99);
    EXPECT_EQ(apply_operator(cfg, h, &hp, 4), apply_operator(cfg, h, &hp, 4));
    EXPECT_NE(apply_operator(cfg, h, &hp, 4), apply_operator(cfg, h, &hp, 5));
  }
  EXPECT_THROW(apply_operator(AugmentConfig{}, h, nullptr, 0), Error);
}

EmbeddingSample sample_with_span(SampleId id, std::mt19937_64& gen) {
  EmbeddingSample s;
  s.id = id;
  s.label = Label::vulnerable;
  s.token_ids = {1, 2, 3, 4, 5, 6};
  s.embedding = random_matrix(gen, 8, 4);
  s.flaw_spans = {{1, 3}};
  return s;
}

TEST(AugmentSample, ConditionedKeepsFlawRows) {
  std::mt19937_64 gen(15);
  const auto parent = sample_with_span(1, gen), partner = sample_with_span(2, gen);
  auto cfg = AugmentConfig::for_method(Method::binary_interpolation, 7);
  cfg.conditioned = true;
  const auto out = augment_sample(parent, &partner, cfg, 100);
  EXPECT_EQ(out.id, 100u);
  EXPECT_EQ(out.label, Label::vulnerable);
  EXPECT_EQ(out.token_ids, parent.token_ids);
  EXPECT_EQ(out.flaw_spans, parent.flaw_spans);
  EXPECT_EQ(out.provenance, Provenance::augmented(Method::binary_interpolation, {1, 2}, true));
  for (std::size_t r = 1; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_TRUE(same_bytes(out.embedding(r, c), parent.embedding(r, c)));
  }
}

TEST(AugmentSample, Errors) {
  std::mt19937_64 gen(16);
  auto parent = sample_with_span(1, gen);
  const auto cfg = AugmentConfig::for_method(Method::linear_interpolation, 7);
  EXPECT_THROW(augment_sample(parent, &parent, cfg, 9), Error);  // partner is the parent
  auto cond = AugmentConfig::for_method(Method::stochastic_perturbation, 7);
  cond.conditioned = true;
  parent.flaw_spans.clear();
  EXPECT_THROW(augment_sample(parent, nullptr, cond, 9), Error);
}

}  // namespace
}  // namespace vulnaug
