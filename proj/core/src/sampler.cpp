#include "areuredi/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "areuredi/errors.hpp"
#include "json_compat.hpp"

namespace areuredi {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(Balancing g) { return g == Balancing::barker ? "barker" : "sqrt"; }

Balancing balancing_from_string(const std::string& name) {
  if (name == "barker") return Balancing::barker;
  if (name == "sqrt") return Balancing::sqrt;
  throw DomainError("unknown balancing function: " + name);
}

double balance(Balancing g, double u) {
  if (!(u > 0.0)) throw DomainError("balancing functions need u > 0");
  if (g == Balancing::barker) return std::isinf(u) ? 1.0 : u / (1.0 + u);
  return std::sqrt(u);
}

double log_balance(Balancing g, double log_u) {
  if (std::isnan(log_u) || log_u == -kInf) throw DomainError("balancing functions need u > 0");
  if (g == Balancing::sqrt) return 0.5 * log_u;
  // log(u / (1 + u)) = -log(1 + 1/u)
  if (log_u > 0.0) return -std::log1p(std::exp(-log_u));
  return log_u - std::log1p(std::exp(log_u));
}

void Pruning::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw DomainError("top_p must lie in (0, 1]");
  if (cap < 0) throw DomainError("candidate cap must be >= 1 (0 disables it)");
}

std::vector<Candidate> candidate_set(std::span<const double> prior, Token current, const Pruning& pruning) {
  pruning.validate();
  const int k = static_cast<int>(prior.size());
  if (current < 0 || current >= k) throw DomainError("current token out of range");
  std::vector<Candidate> out;
  out.reserve(prior.size() + 1);
  for (int y = 0; y < k; ++y) out.push_back({y, prior[y]});
  const bool full = pruning.top_p >= 1.0 && (pruning.cap == 0 || pruning.cap >= k);
  if (!full) {
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.prior > b.prior; });
    double mass = 0.0;
    for (const auto& c : out) mass += c.prior;
    std::size_t keep = 0;
    double cum = 0.0;
    while (keep < out.size()) {
      cum += out[keep].prior;
      ++keep;
      if (cum >= (pruning.top_p - 1e-12) * mass) break;
    }
    if (pruning.cap > 0) keep = std::min(keep, static_cast<std::size_t>(pruning.cap));
    out.resize(keep);
    if (std::none_of(out.begin(), out.end(), [&](const Candidate& c) { return c.token == current; })) {
      out.push_back({current, prior[current]});
    }
  }
  double total = 0.0;
  for (const auto& c : out) total += c.prior;
  if (!(total > 0.0)) return {{current, 1.0}};
  for (auto& c : out) c.prior /= total;
  return out;
}

double reward_ratio(std::span<const Token> x, int i, Token y, double eta, const WeightVector& w,
                    const ObjectiveSet& objectives) {
  const double here = tchebycheff(objectives.scores(x), w);
  Sequence moved(x.begin(), x.end());
  moved.at(static_cast<std::size_t>(i)) = y;
  return eta * (tchebycheff(objectives.scores(moved), w) - here);
}

std::vector<double> build_proposal(std::span<const Candidate> candidates, Balancing g,
                                   std::span<const double> log_ratios) {
  if (candidates.empty()) throw DomainError("empty candidate set");
  if (log_ratios.size() != candidates.size()) throw DomainError("one log-ratio per candidate is required");
  std::vector<double> logw(candidates.size());
  double top = -kInf;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    logw[c] = candidates[c].prior > 0.0 ? std::log(candidates[c].prior) + log_balance(g, log_ratios[c]) : -kInf;
    top = std::max(top, logw[c]);
  }
  if (!std::isfinite(top)) throw NumericalError("proposal weights are all zero");
  std::vector<double> q(candidates.size());
  double total = 0.0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    q[c] = std::exp(logw[c] - top);
    total += q[c];
  }
  for (double& v : q) v /= total;
  return q;
}

std::string to_string(TargetDensity v) { return v == TargetDensity::exact_p1 ? "exact_p1" : "factorized_p1"; }
std::string to_string(ScanOrder v) { return v == ScanOrder::random ? "random" : "sweep"; }
std::string to_string(PriorTime v) { return v == PriorTime::source ? "source" : "chain"; }
std::string to_string(TargetTime v) { return v == TargetTime::final ? "final" : "next"; }
std::string to_string(InitMode v) { return v == InitMode::source ? "source" : "model"; }

BaseModel::BaseModel(Coupling coupling, FactorizedDenoiser denoiser)
    : coupling_(std::make_shared<const Coupling>(std::move(coupling))),
      denoiser_(std::make_shared<const FactorizedDenoiser>(std::move(denoiser))) {
  const auto& space = coupling_->space();
  if (!(denoiser_->space() == space)) throw DomainError("denoiser and coupling live on different spaces");
  for (const auto& p : coupling_->pairs()) masses_.push_back(p.mass);

  if (space.enumerable(denoiser_->options().cap)) {
    const auto p1 = coupling_->target_marginal(denoiser_->options().cap);
    log_p1_.resize(p1.size());
    for (std::size_t x = 0; x < p1.size(); ++x) log_p1_[x] = p1[x] > 0.0 ? std::log(p1[x]) : -kInf;
  }

  const int length = space.length();
  const int k = space.vocab_size();
  const int end = denoiser_->grid().steps();
  std::map<Sequence, double> sources;
  for (const auto& p : coupling_->pairs()) sources[p.x0] += p.mass;
  double total = 0.0;
  for (const auto& [x0, m] : sources) total += m;
  marginals_.assign(static_cast<std::size_t>(length * k), 0.0);
  std::vector<double> buf(static_cast<std::size_t>(k));
  for (const auto& [x0, m] : sources) {
    for (int i = 0; i < length; ++i) {
      denoiser_->posterior_into(x0, 0, end, i, buf);
      for (int y = 0; y < k; ++y) marginals_[i * k + y] += m / total * buf[y];
    }
  }
}

double BaseModel::log_p1(std::span<const Token> x, TargetDensity mode) const {
  if (mode == TargetDensity::exact_p1) {
    if (log_p1_.empty()) throw ResourceError("exact p1 needs an enumerable space");
    return log_p1_[space().encode(x)];
  }
  const int k = space().vocab_size();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = marginals_[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(x[i])];
    if (m <= 0.0) return -kInf;
    total += std::log(m);
  }
  return total;
}

Sequence BaseModel::sample_source(Rng& rng) const { return coupling_->pairs()[rng.categorical(masses_)].x0; }

void SamplerConfig::validate() const {
  anneal.validate();
  pruning.validate();
}

int Proposal::find(Token token) const noexcept {
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].token == token) return static_cast<int>(c);
  }
  return -1;
}

Proposal propose(const MoveRules& rules, std::span<const Token> x, int i, int t_idx, int s_idx, double eta,
                 double scalarized_here, const SubstitutionScore& score) {
  const auto& d = rules.model->denoiser();
  const int k = d.space().vocab_size();
  std::vector<double> prior(static_cast<std::size_t>(k));
  d.posterior_into(x, t_idx, s_idx, i, prior);
  if (rules.constraint) {
    Sequence moved(x.begin(), x.end());
    for (Token y = 0; y < k; ++y) {
      if (y == x[i]) continue;
      moved[i] = y;
      if (!rules.constraint(moved)) prior[y] = 0.0;
    }
  }
  Proposal p;
  p.candidates = candidate_set(prior, x[i], rules.pruning);
  p.log_ratios.reserve(p.candidates.size());
  for (const auto& c : p.candidates) {
    p.log_ratios.push_back(c.token == x[i] ? 0.0 : eta * (score(c.token) - scalarized_here));
  }
  p.q = build_proposal(p.candidates, rules.balancing, p.log_ratios);
  return p;
}

double log_mh_ratio(const Proposal& forward, const Proposal& reverse, Token from, Token to, double log_target_x,
                    double log_target_next) {
  const int jf = forward.find(to);
  const int jr = reverse.find(from);
  if (jf < 0) throw DomainError("proposed token is not a forward candidate");
  if (from == to) return 0.0;
  if (jr < 0 || reverse.q[jr] <= 0.0) return -kInf;
  if (log_target_x == -kInf) return kInf;
  return log_target_next + std::log(reverse.q[jr]) - log_target_x - std::log(forward.q[jf]);
}

ChainTrajectory run_chain(const SamplerConfig& cfg, const BaseModel& model, const ObjectiveSet& objectives,
                          std::optional<Sequence> x0, std::uint64_t stream) {
  cfg.validate();
  const auto& space = model.space();
  const auto& d = model.denoiser();
  const int length = space.length();
  const int k = space.vocab_size();
  const int steps = cfg.anneal.steps;
  const WeightVector w = cfg.weights ? *cfg.weights : WeightVector::uniform(objectives.size());
  if (w.size() != objectives.size()) throw DomainError("weight vector and objective set differ in size");
  if (cfg.prior_time == PriorTime::chain && d.grid().steps() != steps) {
    throw DomainError("prior_time=chain needs a denoiser grid with T steps");
  }
  if (cfg.density == TargetDensity::exact_p1 && !model.has_exact_p1()) {
    throw ResourceError("exact_p1 needs an enumerable space");
  }

  Rng rng(cfg.seed, stream);
  ChainTrajectory out;
  Sequence x;
  if (x0) {
    space.validate(*x0);
    x = *x0;
  } else {
    x = model.sample_source(rng);
    if (cfg.init == InitMode::model) x = euler_sample(d, x, d.grid().steps(), rng);
  }
  out.initial = x;

  const std::size_t n_obj = objectives.size();
  std::vector<double> scores(n_obj);
  objectives.scores_into(x, scores);
  ++out.evaluations;
  double s_here = tchebycheff(scores, w);
  double wsum_here = weighted_sum(scores, w);
  double log_p1_here = model.log_p1(x, cfg.density);

  const MoveRules rules{&model, cfg.balancing, cfg.pruning, cfg.constraint};
  std::vector<std::vector<double>> cache_scores(static_cast<std::size_t>(k), std::vector<double>(n_obj));
  std::vector<double> cache_s(static_cast<std::size_t>(k));
  std::vector<int> stamp(static_cast<std::size_t>(k), -1);
  Sequence moved(x);
  if (cfg.record_steps) out.records.reserve(static_cast<std::size_t>(steps));

  for (int step = 0; step < steps; ++step) {
    const int t_idx = cfg.prior_time == PriorTime::source ? 0 : step;
    const int s_idx = cfg.target_time == TargetTime::final ? d.grid().steps() : t_idx + 1;
    const double eta = anneal(step, cfg.anneal);
    const int i = cfg.scan == ScanOrder::random ? static_cast<int>(rng.below(static_cast<std::uint64_t>(length)))
                                                : step % length;
    const Token here = x[i];
    moved = x;
    auto score = [&](Token y) {
      if (y == here) return s_here;
      if (stamp[y] != step) {
        moved[i] = y;
        objectives.scores_into(moved, cache_scores[y]);
        ++out.evaluations;
        cache_s[y] = tchebycheff(cache_scores[y], w);
        stamp[y] = step;
      }
      return cache_s[y];
    };

    const auto fwd = propose(rules, x, i, t_idx, s_idx, eta, s_here, score);
    const auto j = rng.categorical(fwd.q);
    const Token y = fwd.candidates[j].token;

    StepRecord rec;
    rec.t_index = step;
    rec.eta = eta;
    rec.coordinate = i;
    rec.proposed = y;
    rec.log_ratio = fwd.log_ratios[j];
    rec.alpha = 1.0;
    rec.accepted = true;
    if (y != here) {
      const double s_next = score(y);
      moved[i] = y;
      const double log_p1_next = model.log_p1(moved, cfg.density);
      const auto rev = propose(rules, moved, i, t_idx, s_idx, eta, s_next, score);
      const double log_r = log_mh_ratio(fwd, rev, here, y, log_p1_here + eta * s_here, log_p1_next + eta * s_next);
      rec.reverse_missing = rev.find(here) < 0;
      if (rec.reverse_missing) ++out.reverse_missing;
      rec.alpha = log_r >= 0.0 ? 1.0 : std::exp(log_r);
      const double u = rng.uniform();
      rec.accepted = u < rec.alpha;
      const double wsum_next = weighted_sum(cache_scores[y], w);
      if (rec.accepted && cfg.monotone && wsum_next < wsum_here) {
        rec.accepted = false;
        rec.monotone_rejected = true;
      }
      if (rec.accepted) {
        x[i] = y;
        scores = cache_scores[y];
        s_here = s_next;
        wsum_here = wsum_next;
        log_p1_here = log_p1_next;
      }
    }
    if (rec.accepted) ++out.accepted;
    rec.scalarized = s_here;
    rec.weighted_sum = wsum_here;
    if (cfg.record_steps) {
      rec.scores = scores;
      out.records.push_back(std::move(rec));
    }
  }
  out.final = x;
  out.final_scores = scores;
  out.final_scalarized = s_here;
  return out;
}

std::string step_to_jsonl(const StepRecord& r, std::size_t chain) {
  const nlohmann::json line{{"chain", chain},       {"t", r.t_index},         {"eta", r.eta},
                            {"i", r.coordinate},     {"y", r.proposed},        {"log_r", r.log_ratio},
                            {"alpha", r.alpha},      {"accepted", r.accepted}, {"S", r.scalarized},
                            {"scores", r.scores}};
  return line.dump();
}

}  // namespace areuredi
