#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "areuredi/errors.hpp"
#include "areuredi/objectives.hpp"

using namespace areuredi;

TEST(Tchebycheff, Arithmetic) {
  const std::vector<double> s{0.8, 0.4};
  EXPECT_NEAR(tchebycheff(s, WeightVector({0.5, 0.5})), 0.2, 1e-15);
}

TEST(Tchebycheff, ZeroScoreAbsorbs) {
  const std::vector<double> s{0.9, 0.0, 0.7};
  EXPECT_EQ(tchebycheff(s, WeightVector({0.2, 0.5, 0.3})), 0.0);
}

TEST(Tchebycheff, MatchesDirectMinimum) {
  Rng rng(0, 0);
  for (int k = 0; k < 200; ++k) {
    const auto w = sample_weight(rng, 3);
    const std::vector<double> s{rng.uniform(), rng.uniform(), rng.uniform()};
    const double want = std::min({w[0] * s[0], w[1] * s[1], w[2] * s[2]});
    EXPECT_EQ(tchebycheff(s, w), want);
  }
}

TEST(Tchebycheff, DimensionMismatch) {
  const std::vector<double> s{0.1, 0.2, 0.3};
  EXPECT_THROW((void)tchebycheff(s, WeightVector::uniform(2)), DomainError);
}

TEST(Tchebycheff, BottleneckTiesGoToLowestIndex) {
  const std::vector<double> s{0.4, 0.4};
  EXPECT_EQ(bottleneck(s, WeightVector({0.5, 0.5})), 0u);
}

TEST(Guidance, Values) {
  EXPECT_EQ(guidance_weight(0.0, 3.0), 1.0);
  EXPECT_NEAR(guidance_weight(0.2, 10.0), std::exp(2.0), 1e-12);
  EXPECT_NEAR(log_guidance_weight(0.2, 10.0), 2.0, 1e-15);
  EXPECT_THROW((void)guidance_weight(0.2, 0.0), DomainError);
}

TEST(Anneal, Endpoints) {
  const AnnealSchedule a{1.0, 20.0, 2};
  EXPECT_EQ(anneal(0, a), 1.0);
  EXPECT_EQ(anneal(1, a), 20.0);
  const AnnealSchedule long_a{1.0, 20.0, 400};
  EXPECT_EQ(anneal(399, long_a), 20.0);
}

TEST(Anneal, Midpoint) {
  const AnnealSchedule a{1.0, 20.0, 3};
  EXPECT_DOUBLE_EQ(anneal(1, a), 10.5);
  EXPECT_DOUBLE_EQ((a.eta_min + a.eta_max) / 2.0, 10.5);
}

TEST(Anneal, ConstantAndOutOfRange) {
  const auto c = AnnealSchedule::constant(4.0, 10);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(anneal(t, c), 4.0);
  EXPECT_THROW((void)anneal(10, c), DomainError);
  EXPECT_THROW((void)anneal(-1, c), DomainError);
  EXPECT_THROW((AnnealSchedule{5.0, 1.0, 3}.validate()), DomainError);
}

TEST(Representability, TwoObjectives) {
  const std::vector<double> s{0.5, 0.25};
  const auto w = representability_weights(s);
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(tchebycheff(s, w), 1.0 / 6.0, 1e-15);
}

TEST(Representability, EqualScoresGiveUniform) {
  const std::vector<double> s{0.3, 0.3, 0.3, 0.3};
  const auto w = representability_weights(s);
  for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(w[n], 0.25, 1e-15);
}

TEST(Representability, NonPositiveScoreIsRejected) {
  const std::vector<double> s{0.3, 0.0};
  EXPECT_THROW((void)representability_weights(s), DomainError);
}

TEST(SampleWeight, SingleObjective) {
  Rng rng(0, 0);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(sample_weight(rng, 1)[0], 1.0);
}

TEST(SampleWeight, FlatSimplexMeans) {
  Rng rng(1, 0);
  std::vector<double> mean(3, 0.0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto w = sample_weight(rng, 3);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      ASSERT_GT(w[i], 0.0);
      sum += w[i];
      mean[i] += w[i] / n;
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
  for (double m : mean) EXPECT_NEAR(m, 1.0 / 3.0, 0.01);
}

TEST(WeightVector, Validation) {
  EXPECT_NO_THROW(WeightVector({0.7, 0.1, 0.1, 0.1}));
  EXPECT_THROW(WeightVector({0.6, 0.6}), DomainError);
  EXPECT_THROW(WeightVector({1.2, -0.2}), DomainError);
  EXPECT_TRUE(WeightVector({0.5, 0.5}).interior());
  EXPECT_FALSE(WeightVector({1.0, 0.0}).interior());
  double sum = 0.0;
  const auto u = WeightVector::uniform(7);
  for (double v : u.values()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(Suite, Examples) {
  EXPECT_EQ(leading_ones(Sequence{1, 1, 0, 1}), 2.0);
  EXPECT_EQ(trailing_zeros(Sequence{1, 1, 0, 0}), 2.0);
  EXPECT_EQ(motif_count(Sequence{0, 1, 0, 1}, Sequence{0, 1}), 2.0);
  EXPECT_EQ(motif_count(Sequence{1, 1, 1}, Sequence{1, 1}), 2.0);
}

TEST(Suite, ParsedObjectivesAndBounds) {
  const auto o = suite_objective(parse_suite_spec("motif_count:010"), 2, 6);
  EXPECT_EQ(o.evaluate(Sequence{0, 1, 0, 1, 0, 0}), 2.0);
  EXPECT_EQ(o.upper, 4.0);
  const auto t = suite_objective(parse_suite_spec("token_count:2"), 3, 4);
  EXPECT_EQ(t.evaluate(Sequence{2, 0, 2, 1}), 2.0);
  const auto lin = suite_objective(parse_suite_spec("linear_score:1,0,0,2"), 2, 2);
  EXPECT_EQ(lin.evaluate(Sequence{0, 1}), 3.0);
  EXPECT_EQ(lin.lower, 0.0);
  EXPECT_EQ(lin.upper, 3.0);
  const auto spec = parse_suite_spec("motif_count:010");
  EXPECT_EQ(parse_suite_spec(to_string(spec)).pattern, spec.pattern);
}

TEST(Suite, InvalidSpecs) {
  EXPECT_THROW(suite_objective(parse_suite_spec("motif_count:0101"), 2, 3), DomainError);
  EXPECT_THROW(suite_objective(parse_suite_spec("motif_count:02"), 2, 3), DomainError);
  EXPECT_THROW(parse_suite_spec("banana"), DomainError);
  EXPECT_THROW(suite_objective(parse_suite_spec("linear_score:1,2,3"), 2, 2), DomainError);
}

TEST(Normalizer, ClampsIntoUnitInterval) {
  const Normalizer n({{0.0, 4.0}, {-1.0, 1.0}});
  EXPECT_EQ(n.normalize(0, 2.0), 0.5);
  EXPECT_EQ(n.normalize(0, 5.0), 1.0);
  EXPECT_EQ(n.normalize(1, -3.0), 0.0);
  EXPECT_THROW(Normalizer({{1.0, 1.0}}), DomainError);
}

TEST(ObjectiveSet, ScoresAndDrop) {
  std::vector<Objective> objs{suite_objective(parse_suite_spec("leading_ones"), 2, 4),
                              suite_objective(parse_suite_spec("trailing_zeros"), 2, 4)};
  const ObjectiveSet set(objs);
  const auto s = set.scores(Sequence{1, 1, 0, 0});
  EXPECT_EQ(s, (std::vector<double>{0.5, 0.5}));
  const auto one = set.without(0);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.scores(Sequence{1, 0, 0, 0}), (std::vector<double>{0.75}));
}
