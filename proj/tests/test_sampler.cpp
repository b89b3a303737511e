#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "areuredi/bench.hpp"
#include "areuredi/errors.hpp"
#include "areuredi/oracle.hpp"
#include "areuredi/sampler.hpp"

using namespace areuredi;

namespace {

std::vector<Token> tokens(const std::vector<Candidate>& c) {
  std::vector<Token> out;
  for (const auto& x : c) out.push_back(x.token);
  std::sort(out.begin(), out.end());
  return out;
}

BaseModel uniform_model(int K, int L, int steps = 1) {
  const StateSpace space(K, L);
  const auto n = space.size_or_zero();
  const std::vector<double> u(n, 1.0 / static_cast<double>(n));
  auto c = Coupling::independent(space, u, u);
  auto d = fit_exact_denoiser(c, PathSchedule::linear(), steps);
  return BaseModel(std::move(c), std::move(d));
}

ObjectiveSet lotz(int L) {
  return ObjectiveSet({suite_objective(parse_suite_spec("leading_ones"), 2, L),
                       suite_objective(parse_suite_spec("trailing_zeros"), 2, L)});
}

}  // namespace

TEST(CandidateSet, FullTopPKeepsVocabulary) {
  const std::vector<double> prior{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(tokens(candidate_set(prior, 0, {1.0, 0})), (std::vector<Token>{0, 1, 2, 3}));
}

TEST(CandidateSet, TopPCutByCumulativeMass) {
  const std::vector<double> prior{0.6, 0.3, 0.08, 0.02};
  EXPECT_EQ(tokens(candidate_set(prior, 1, {0.9, 0})), (std::vector<Token>{0, 1}));
  EXPECT_EQ(tokens(candidate_set(prior, 3, {0.9, 0})), (std::vector<Token>{0, 1, 3}));
  const auto c = candidate_set(prior, 3, {0.9, 0});
  double sum = 0.0;
  for (const auto& x : c) sum += x.prior;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(CandidateSet, CapPlusCurrent) {
  Rng rng(0, 0);
  std::vector<double> prior(586);
  for (double& p : prior) p = rng.exponential();
  const auto ranked = candidate_set(prior, 0, {1.0, 0});
  const Token last = ranked.back().token;
  const auto c = candidate_set(prior, last, {1.0, 200});
  EXPECT_EQ(c.size(), 201u);
  EXPECT_LE(candidate_set(prior, ranked.front().token, {1.0, 200}).size(), 201u);
}

TEST(CandidateSet, AlwaysContainsCurrent) {
  Rng rng(1, 0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> prior(6);
    for (double& p : prior) p = rng.exponential();
    prior[2] = 0.0;
    const Token cur = static_cast<Token>(rng.below(6));
    const auto c = candidate_set(prior, cur, {0.5, 2});
    EXPECT_TRUE(std::any_of(c.begin(), c.end(), [&](const Candidate& x) { return x.token == cur; }));
  }
}

TEST(Balance, FixedPointAndSymmetry) {
  EXPECT_EQ(balance(Balancing::barker, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(balance(Balancing::barker, 3.0), 0.75);
  EXPECT_DOUBLE_EQ(3.0 * balance(Balancing::barker, 1.0 / 3.0), 0.75);
  EXPECT_EQ(balance(Balancing::sqrt, 4.0), 2.0);
  EXPECT_EQ(4.0 * balance(Balancing::sqrt, 0.25), 2.0);
}

TEST(Balance, RejectsNonPositive) {
  EXPECT_THROW((void)balance(Balancing::barker, 0.0), DomainError);
  EXPECT_THROW((void)balance(Balancing::sqrt, -1.0), DomainError);
}

TEST(Balance, SymmetryOnDyadicGrid) {
  for (auto g : {Balancing::barker, Balancing::sqrt}) {
    for (int e = -20; e <= 20; ++e) {
      const double u = std::ldexp(1.0, e);
      const double lhs = balance(g, u);
      const double rhs = u * balance(g, 1.0 / u);
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs)) << "u = 2^" << e;
      EXPECT_NEAR(log_balance(g, std::log(u)), std::log(lhs), 1e-12 * std::max(1.0, std::abs(std::log(lhs))));
    }
  }
}

TEST(Balance, LogFormStaysFinite) {
  EXPECT_NEAR(log_balance(Balancing::barker, 800.0), 0.0, 1e-300);
  EXPECT_NEAR(log_balance(Balancing::barker, -800.0), -800.0, 1e-9);
  EXPECT_EQ(log_balance(Balancing::sqrt, -800.0), -400.0);
}

TEST(RewardRatio, IdentitySubstitutionIsZero) {
  const auto objs = lotz(4);
  const Sequence x{1, 0, 1, 0};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(reward_ratio(x, i, x[i], 7.0, WeightVector({0.3, 0.7}), objs), 0.0);
}

TEST(RewardRatio, TenthIncreaseAtEtaTen) {
  const ObjectiveSet objs({suite_objective(parse_suite_spec("ones_count"), 2, 10)});
  const Sequence x(10, 0);
  EXPECT_NEAR(reward_ratio(x, 3, 1, 10.0, WeightVector({1.0}), objs), 1.0, 1e-12);
}

TEST(RewardRatio, MatchesDirectEvaluation) {
  const auto inst = random_instance(3, 3, 3, 4);
  Rng rng(4, 1);
  for (int k = 0; k < 100; ++k) {
    const auto w = sample_weight(rng, 3);
    Sequence x{static_cast<Token>(rng.below(3)), static_cast<Token>(rng.below(3)), static_cast<Token>(rng.below(3))};
    const int i = static_cast<int>(rng.below(3));
    const Token y = static_cast<Token>(rng.below(3));
    auto xy = x;
    xy[i] = y;
    const auto sx = inst.objectives.scores(x);
    const auto sy = inst.objectives.scores(xy);
    double mx = INFINITY, my = INFINITY;
    for (std::size_t n = 0; n < 3; ++n) {
      mx = std::min(mx, w[n] * sx[n]);
      my = std::min(my, w[n] * sy[n]);
    }
    EXPECT_NEAR(reward_ratio(x, i, y, 2.5, w, inst.objectives), 2.5 * (my - mx), 1e-12);
  }
}

TEST(BuildProposal, TwoCandidateArithmetic) {
  const std::vector<Candidate> c{{0, 0.5}, {1, 0.5}};
  const std::vector<double> lr{0.0, std::log(3.0)};
  const auto q = build_proposal(c, Balancing::barker, lr);
  EXPECT_NEAR(q[0], 0.4, 1e-15);
  EXPECT_NEAR(q[1], 0.6, 1e-15);
}

TEST(BuildProposal, EqualRatiosReturnPrior) {
  const std::vector<Candidate> c{{0, 0.2}, {1, 0.3}, {4, 0.1}};
  const std::vector<double> lr{1.7, 1.7, 1.7};
  for (auto g : {Balancing::barker, Balancing::sqrt}) {
    const auto q = build_proposal(c, g, lr);
    EXPECT_NEAR(q[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(q[1], 0.5, 1e-12);
    EXPECT_NEAR(q[2], 1.0 / 6.0, 1e-12);
  }
}

TEST(BuildProposal, MatchesHandNormalization) {
  Rng rng(6, 0);
  for (int k = 0; k < 100; ++k) {
    std::vector<Candidate> c;
    std::vector<double> lr;
    for (Token y = 0; y < 5; ++y) {
      c.push_back({y, rng.uniform() + 0.01});
      lr.push_back(20.0 * rng.uniform() - 10.0);
    }
    for (auto g : {Balancing::barker, Balancing::sqrt}) {
      std::vector<double> want(5);
      double z = 0.0;
      for (int y = 0; y < 5; ++y) {
        const double u = std::exp(lr[y]);
        want[y] = c[y].prior * (g == Balancing::barker ? u / (1.0 + u) : std::sqrt(u));
        z += want[y];
      }
      const auto q = build_proposal(c, g, lr);
      for (int y = 0; y < 5; ++y) EXPECT_NEAR(q[y], want[y] / z, 1e-12);
    }
  }
}

TEST(MhStep, IdentityProposalIsAccepted) {
  const auto model = uniform_model(2, 3);
  const auto objs = lotz(3);
  const WeightVector w({0.5, 0.5});
  const Sequence x{1, 0, 0};
  const double here = tchebycheff(objs.scores(x), w);
  MoveRules rules{&model, Balancing::barker, {}, {}};
  const auto score = [&](Token y) {
    auto z = x;
    z[1] = y;
    return tchebycheff(objs.scores(z), w);
  };
  const auto fwd = propose(rules, x, 1, 0, 1, 3.0, here, score);
  const double lt = model.log_p1(x, TargetDensity::exact_p1) + 3.0 * here;
  EXPECT_EQ(log_mh_ratio(fwd, fwd, x[1], x[1], lt, lt), 0.0);
}

TEST(MhStep, SymmetricTwoStateInstanceAcceptsBothWays) {
  const auto model = uniform_model(2, 1);
  MoveRules rules{&model, Balancing::barker, {}, {}};
  const auto score = [&](Token) { return 0.5; };
  for (Token a = 0; a < 2; ++a) {
    const Sequence x{a}, y{1 - a};
    const auto fwd = propose(rules, x, 0, 0, 1, 5.0, 0.5, score);
    const auto rev = propose(rules, y, 0, 0, 1, 5.0, 0.5, score);
    const double lx = model.log_p1(x, TargetDensity::exact_p1) + 2.5;
    const double ly = model.log_p1(y, TargetDensity::exact_p1) + 2.5;
    EXPECT_NEAR(log_mh_ratio(fwd, rev, a, 1 - a, lx, ly), 0.0, 1e-15);
  }
}

TEST(MhStep, MissingReverseMoveHasZeroAcceptance) {
  Proposal fwd{{{0, 0.5}, {1, 0.5}}, {0.0, 0.0}, {0.5, 0.5}};
  Proposal rev{{{1, 1.0}}, {0.0}, {1.0}};
  EXPECT_EQ(log_mh_ratio(fwd, rev, 0, 1, 0.0, 0.0), -INFINITY);
  EXPECT_EQ(log_mh_ratio(fwd, fwd, 0, 1, -INFINITY, 0.0), INFINITY);
}

// One step on a single binary coordinate from a fixed state.
TEST(RunChain, OneStepFrequenciesMatchKernelRow) {
  Rng crng(3, 0);
  const StateSpace space(2, 1);
  auto c = random_coupling(space, crng);
  auto d = fit_exact_denoiser(c, PathSchedule::linear(), 1);
  const BaseModel model(c, d);
  const ObjectiveSet objs({suite_objective(parse_suite_spec("linear_score:0.2,0.9"), 2, 1)});
  KernelSpec spec;
  spec.eta = 3.0;
  spec.weights = WeightVector({1.0});
  const auto kern = exact_kernel(model, objs, spec);
  SamplerConfig cfg;
  cfg.anneal = AnnealSchedule::constant(3.0, 1);
  cfg.weights = WeightVector({1.0});
  cfg.record_steps = false;
  cfg.seed = 99;
  for (Token start = 0; start < 2; ++start) {
    std::vector<std::uint64_t> counts(2, 0);
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      const auto tr = run_chain(cfg, model, objs, Sequence{start}, static_cast<std::uint64_t>(k));
      ++counts[tr.final[0]];
    }
    const std::vector<double> row(kern.matrix.begin() + start * 2, kern.matrix.begin() + start * 2 + 2);
    EXPECT_LE(tv_distance(counts, row), 0.01);
  }
}

TEST(RunChain, MonotoneConstraintNeverDecreasesWeightedSum) {
  const auto task = suite_task("lotz8");
  const auto model = task_model(task);
  const auto objs = task.objective_set();
  SamplerConfig cfg;
  cfg.anneal = {1.0, 20.0, task.steps};
  cfg.weights = WeightVector({0.3, 0.7});
  cfg.monotone = true;
  for (std::uint64_t c = 0; c < 20; ++c) {
    const auto tr = run_chain(cfg, model, objs, std::nullopt, c);
    double prev = weighted_sum(objs.scores(tr.initial), *cfg.weights);
    for (const auto& r : tr.records) {
      EXPECT_GE(r.weighted_sum, prev);
      prev = r.weighted_sum;
    }
  }
}

TEST(RunChain, ConstraintExcludesInfeasibleStates) {
  const auto model = uniform_model(2, 4);
  const auto objs = lotz(4);
  SamplerConfig cfg;
  cfg.anneal = {1.0, 10.0, 200};
  cfg.constraint = [](std::span<const Token> x) { return x[3] == 0; };
  for (std::uint64_t c = 0; c < 10; ++c) {
    const auto tr = run_chain(cfg, model, objs, Sequence{0, 0, 0, 0}, c);
    for (const auto& r : tr.records) {
      if (r.coordinate == 3) EXPECT_EQ(r.proposed, 0);
    }
    EXPECT_EQ(tr.final[3], 0);
  }
}

TEST(RunChain, DeterministicPerStream) {
  const auto task = suite_task("lotz5");
  const auto model = task_model(task);
  SamplerConfig cfg;
  cfg.anneal = {1.0, 20.0, task.steps};
  cfg.seed = 17;
  const auto a = run_chain(cfg, model, task.objective_set(), std::nullopt, 3);
  const auto b = run_chain(cfg, model, task.objective_set(), std::nullopt, 3);
  EXPECT_EQ(a.final, b.final);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) EXPECT_EQ(a.records[k].alpha, b.records[k].alpha);
  EXPECT_EQ(a.records.size(), 100u);
}

TEST(RunChain, RecordsAndEvaluationCount) {
  const auto task = suite_task("lotz6");
  EXPECT_EQ(task.steps, 120);
  const auto model = task_model(task);
  SamplerConfig cfg;
  cfg.anneal = {1.0, 20.0, 30};
  const auto tr = run_chain(cfg, model, task.objective_set(), std::nullopt, 0);
  EXPECT_EQ(tr.records.size(), 30u);
  EXPECT_EQ(tr.records.front().eta, 1.0);
  EXPECT_EQ(tr.records.back().eta, 20.0);
  EXPECT_GE(tr.evaluations, 1u);
  EXPECT_LE(tr.evaluations, 1u + 30u);
  EXPECT_FALSE(step_to_jsonl(tr.records[0], 0).empty());
}

TEST(RunChain, RejectsEmptySchedule) {
  const auto model = uniform_model(2, 2);
  SamplerConfig cfg;
  cfg.anneal = {1.0, 2.0, 0};
  EXPECT_THROW(run_chain(cfg, model, lotz(2)), DomainError);
}
