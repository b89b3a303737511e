#include "areuredi/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "areuredi/errors.hpp"
#include "json_compat.hpp"

namespace areuredi {

ObjectiveSet BenchmarkTask::objective_set() const {
  std::vector<Objective> objs;
  for (const auto& spec : objectives) objs.push_back(suite_objective(spec, vocab_size, length));
  return ObjectiveSet(std::move(objs));
}

WeightVector BenchmarkTask::weights() const {
  if (default_weights.empty()) return WeightVector::uniform(objectives.size());
  return WeightVector(default_weights);
}

void BenchmarkTask::validate() const {
  if (objectives.size() < 2) throw DomainError("a benchmark task needs at least two objectives");
  if (steps < 1) throw DomainError("a benchmark task needs a step budget >= 1");
  if (n_chains < 1) throw DomainError("a benchmark task needs at least one chain");
  (void)space();
  (void)weights();
}

std::vector<std::string> suite_task_names() { return {"lotz5", "lotz6", "lotz8", "lotz16", "tri10"}; }

BenchmarkTask suite_task(const std::string& name) {
  BenchmarkTask t;
  t.name = name;
  if (name.rfind("lotz", 0) == 0) {
    int length = 0;
    try {
      length = std::stoi(name.substr(4));
    } catch (const std::exception&) {
      throw DomainError("unknown task: " + name);
    }
    if (length != 5 && length != 6 && length != 8 && length != 16) throw DomainError("unknown task: " + name);
    t.vocab_size = 2;
    t.length = length;
    t.objectives = {parse_suite_spec("leading_ones"), parse_suite_spec("trailing_zeros")};
  } else if (name == "tri10") {
    t.vocab_size = 3;
    t.length = 10;
    t.objectives = {parse_suite_spec("leading_ones"), parse_suite_spec("trailing_zeros"),
                    parse_suite_spec("token_count:2")};
  } else {
    throw DomainError("unknown task: " + name);
  }
  t.steps = 20 * t.length;
  t.n_chains = 100;
  for (std::uint64_t s = 0; s < 20; ++s) t.seeds.push_back(s);
  return t;
}

namespace {

constexpr std::uint64_t kSmallTask = 256;
constexpr int kBasePairs = 4096;
constexpr std::uint64_t kBaseSeed = 0x5eed;

BaseModel build_task_model(const BenchmarkTask& task, bool rectified) {
  const auto space = task.space();
  const auto k = static_cast<std::uint64_t>(task.vocab_size);
  if (space.enumerable(kSmallTask)) {
    const auto n = space.size_or_zero();
    const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
    auto coupling = Coupling::independent(space, uniform, uniform);
    const auto schedule = PathSchedule::linear();
    if (rectified) {
      RectifyConfig rc;
      rc.steps = 1;
      rc.tc_steps = 1;
      coupling = rectification_loop(coupling, 1, schedule, rc).back().output;
    }
    auto d = fit_exact_denoiser(coupling, schedule, 1);
    return BaseModel(std::move(coupling), std::move(d));
  }
  Rng rng(kBaseSeed, 0);
  std::vector<std::pair<Sequence, Sequence>> pairs;
  for (int m = 0; m < kBasePairs; ++m) {
    Sequence a(static_cast<std::size_t>(task.length)), b(static_cast<std::size_t>(task.length));
    for (auto& v : a) v = static_cast<Token>(rng.below(k));
    for (auto& v : b) v = static_cast<Token>(rng.below(k));
    pairs.emplace_back(std::move(a), std::move(b));
  }
  auto coupling = Coupling::empirical(space, std::move(pairs));
  DenoiserOptions opts;
  opts.mode = ContextMode::windowed;
  opts.window = 1;
  const auto schedule = PathSchedule::linear();
  auto d = fit_exact_denoiser(coupling, schedule, 1, opts);
  if (rectified) {
    Rng rr(kBaseSeed, 1);
    coupling = rectify_empirical(d, coupling.source_marginal(), kBasePairs, 1, rr);
    d = fit_exact_denoiser(coupling, schedule, 1, opts);
  }
  return BaseModel(std::move(coupling), std::move(d));
}

std::string model_key(const BenchmarkTask& task, bool rectified) {
  return std::to_string(task.vocab_size) + "/" + std::to_string(task.length) + (rectified ? "/r" : "/u");
}

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

const BaseModel& cached_model(const BenchmarkTask& task, bool rectified) {
  static std::map<std::string, std::unique_ptr<BaseModel>> cache;
  std::lock_guard<std::mutex> lock(cache_mutex());
  auto& slot = cache[model_key(task, rectified)];
  if (!slot) slot = std::make_unique<BaseModel>(build_task_model(task, rectified));
  return *slot;
}

}  // namespace

BaseModel task_model(const BenchmarkTask& task, bool rectified) { return cached_model(task, rectified); }

TargetDensity task_density(const BenchmarkTask& task) {
  return task.space().enumerable(kSmallTask) ? TargetDensity::exact_p1 : TargetDensity::factorized_p1;
}

const TaskOracle& task_oracle(const BenchmarkTask& task) {
  static std::map<std::string, std::unique_ptr<TaskOracle>> cache;
  std::string key = model_key(task, false);
  for (const auto& o : task.objectives) key += "|" + to_string(o);
  std::lock_guard<std::mutex> lock(cache_mutex());
  auto& slot = cache[key];
  if (!slot) {
    auto oracle = std::make_unique<TaskOracle>();
    oracle->front = pareto_front(task.objective_set(), task.space());
    oracle->front_vectors = oracle->front.scores;
    std::sort(oracle->front_vectors.begin(), oracle->front_vectors.end());
    oracle->front_vectors.erase(std::unique(oracle->front_vectors.begin(), oracle->front_vectors.end()),
                                oracle->front_vectors.end());
    slot = std::move(oracle);
  }
  return *slot;
}

namespace {

void finalize(RunResult& r, const BenchmarkTask& task) {
  const std::size_t n_obj = task.objectives.size();
  r.mean_scores.assign(n_obj, 0.0);
  for (const auto& s : r.scores) {
    for (std::size_t n = 0; n < n_obj; ++n) r.mean_scores[n] += s[n];
  }
  if (!r.scores.empty()) {
    for (double& m : r.mean_scores) m /= static_cast<double>(r.scores.size());
  }
  r.hypervolume = r.scores.empty() ? 0.0 : hypervolume(r.scores).value;
  if (!task.space().enumerable()) return;
  const auto& oracle = task_oracle(task);
  std::vector<std::vector<double>> hit(r.scores);
  std::sort(hit.begin(), hit.end());
  hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
  std::size_t covered = 0;
  for (const auto& v : oracle.front_vectors) {
    if (std::binary_search(hit.begin(), hit.end(), v)) ++covered;
  }
  r.coverage = oracle.front_vectors.empty() ? 0.0
                                            : static_cast<double>(covered) / static_cast<double>(oracle.front_vectors.size());
  const auto space = task.space();
  std::size_t optimal = 0;
  for (const auto& x : r.population) {
    if (std::binary_search(oracle.front.states.begin(), oracle.front.states.end(), space.encode(x))) ++optimal;
  }
  r.front_fraction =
      r.population.empty() ? 0.0 : static_cast<double>(optimal) / static_cast<double>(r.population.size());
}

// Nondominated archive of evaluated states; tied score vectors are all kept.
class Archive {
 public:
  void offer(const Sequence& x, const std::vector<double>& s) {
    for (std::size_t m = 0; m < states_.size(); ++m) {
      if (states_[m] == x || dominates(scores_[m], s)) return;
    }
    std::size_t keep = 0;
    for (std::size_t m = 0; m < states_.size(); ++m) {
      if (dominates(s, scores_[m])) continue;
      if (keep != m) {
        states_[keep] = std::move(states_[m]);
        scores_[keep] = std::move(scores_[m]);
      }
      ++keep;
    }
    states_.resize(keep);
    scores_.resize(keep);
    states_.push_back(x);
    scores_.push_back(s);
  }

  const std::vector<std::vector<double>>& scores() const noexcept { return scores_; }

  void export_to(RunResult& r) const {
    // Sort by state so the output does not depend on arrival order.
    std::vector<std::size_t> order(states_.size());
    for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return states_[a] < states_[b]; });
    for (auto m : order) {
      r.population.push_back(states_[m]);
      r.scores.push_back(scores_[m]);
    }
  }

 private:
  std::vector<Sequence> states_;
  std::vector<std::vector<double>> scores_;
};

Sequence random_state(const BenchmarkTask& task, Rng& rng) {
  Sequence x(static_cast<std::size_t>(task.length));
  for (auto& v : x) v = static_cast<Token>(rng.below(static_cast<std::uint64_t>(task.vocab_size)));
  return x;
}

Token other_token(Token current, int k, Rng& rng) {
  const auto r = static_cast<Token>(rng.below(static_cast<std::uint64_t>(k - 1)));
  return r >= current ? r + 1 : r;
}

// Fast nondominated sort: front rank per point, 0 best.
std::vector<int> front_ranks(const std::vector<std::vector<double>>& s) {
  const std::size_t n = s.size();
  std::vector<int> rank(n, 0), count(n, 0);
  std::vector<std::vector<std::size_t>> beats(n);
  std::vector<std::size_t> current;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      if (dominates(s[a], s[b])) {
        beats[a].push_back(b);
      } else if (dominates(s[b], s[a])) {
        ++count[a];
      }
    }
    if (count[a] == 0) current.push_back(a);
  }
  int r = 0;
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto a : current) {
      rank[a] = r;
      for (auto b : beats[a]) {
        if (--count[b] == 0) next.push_back(b);
      }
    }
    std::sort(next.begin(), next.end());
    current = std::move(next);
    ++r;
  }
  return rank;
}

std::vector<double> crowding(const std::vector<std::vector<double>>& s, const std::vector<int>& rank) {
  const std::size_t n = s.size();
  std::vector<double> dist(n, 0.0);
  if (n == 0) return dist;
  const int max_rank = *std::max_element(rank.begin(), rank.end());
  for (int r = 0; r <= max_rank; ++r) {
    std::vector<std::size_t> members;
    for (std::size_t a = 0; a < n; ++a) {
      if (rank[a] == r) members.push_back(a);
    }
    for (std::size_t obj = 0; obj < s.front().size(); ++obj) {
      std::stable_sort(members.begin(), members.end(), [&](auto a, auto b) { return s[a][obj] < s[b][obj]; });
      const double span = s[members.back()][obj] - s[members.front()][obj];
      dist[members.front()] = std::numeric_limits<double>::infinity();
      dist[members.back()] = std::numeric_limits<double>::infinity();
      if (span <= 0.0) continue;
      for (std::size_t m = 1; m + 1 < members.size(); ++m) {
        dist[members[m]] += (s[members[m + 1]][obj] - s[members[m - 1]][obj]) / span;
      }
    }
  }
  return dist;
}

}  // namespace

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::random_search:
      return "random_search";
    case BaselineKind::one_plus_one_ea:
      return "one_plus_one_ea";
    case BaselineKind::nsga2_lite:
      return "nsga2_lite";
  }
  return "random_search";
}

BaselineKind baseline_from_string(const std::string& name) {
  if (name == "random_search") return BaselineKind::random_search;
  if (name == "one_plus_one_ea") return BaselineKind::one_plus_one_ea;
  if (name == "nsga2_lite") return BaselineKind::nsga2_lite;
  throw DomainError("unknown baseline: " + name);
}

RunResult run_baseline(BaselineKind kind, const BenchmarkTask& task, std::uint64_t budget, std::uint64_t seed,
                       const BaselineOptions& options) {
  task.validate();
  if (budget < 1) throw DomainError("budget must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const auto objectives = task.objective_set();
  Rng rng(seed, 0);
  RunResult r;
  r.task = task.name;
  r.method = to_string(kind);
  r.seed = seed;
  auto evaluate = [&](const Sequence& x) {
    ++r.evaluations;
    return objectives.scores(x);
  };
  Archive archive;

  switch (kind) {
    case BaselineKind::random_search: {
      for (std::uint64_t b = 0; b < budget; ++b) {
        auto x = random_state(task, rng);
        archive.offer(x, evaluate(x));
      }
      break;
    }
    case BaselineKind::one_plus_one_ea: {
      const WeightVector w = options.weights ? *options.weights : task.weights();
      if (w.size() != objectives.size()) throw DomainError("weight vector and objective set differ in size");
      r.degenerate_weights = !w.interior();
      auto x = random_state(task, rng);
      auto sx = evaluate(x);
      archive.offer(x, sx);
      double fx = weighted_sum(sx, w);
      while (r.evaluations < budget) {
        auto y = x;
        const auto i = rng.below(static_cast<std::uint64_t>(task.length));
        y[i] = other_token(y[i], task.vocab_size, rng);
        auto sy = evaluate(y);
        archive.offer(y, sy);
        const double fy = weighted_sum(sy, w);
        if (fy >= fx) {
          x = std::move(y);
          fx = fy;
        }
      }
      break;
    }
    case BaselineKind::nsga2_lite: {
      const auto p = static_cast<std::uint64_t>(options.population);
      if (options.population < 2 || options.tournament < 1) throw DomainError("invalid nsga2_lite settings");
      if (budget < p) throw DomainError("nsga2_lite needs a budget of at least one population");
      std::vector<Sequence> pop;
      std::vector<std::vector<double>> pop_s;
      for (std::uint64_t m = 0; m < p; ++m) {
        pop.push_back(random_state(task, rng));
        pop_s.push_back(evaluate(pop.back()));
        archive.offer(pop.back(), pop_s.back());
      }
      if (options.on_generation) options.on_generation(archive.scores());
      const double mutation = 1.0 / task.length;
      while (r.evaluations < budget) {
        const auto rank = front_ranks(pop_s);
        const auto crowd = crowding(pop_s, rank);
        auto pick = [&] {
          auto best = rng.below(p);
          for (int t = 1; t < options.tournament; ++t) {
            const auto c = rng.below(p);
            if (rank[c] < rank[best] || (rank[c] == rank[best] && crowd[c] > crowd[best])) best = c;
          }
          return best;
        };
        const auto n_off = std::min(p, budget - r.evaluations);
        std::vector<Sequence> off;
        std::vector<std::vector<double>> off_s;
        for (std::uint64_t m = 0; m < n_off; ++m) {
          const auto& a = pop[pick()];
          const auto& b = pop[pick()];
          Sequence child(a);
          if (task.length > 1) {
            const auto cut = 1 + rng.below(static_cast<std::uint64_t>(task.length - 1));
            std::copy(b.begin() + static_cast<std::ptrdiff_t>(cut), b.end(),
                      child.begin() + static_cast<std::ptrdiff_t>(cut));
          }
          for (auto& v : child) {
            if (rng.uniform() < mutation) v = other_token(v, task.vocab_size, rng);
          }
          off_s.push_back(evaluate(child));
          archive.offer(child, off_s.back());
          off.push_back(std::move(child));
        }
        pop.insert(pop.end(), off.begin(), off.end());
        pop_s.insert(pop_s.end(), off_s.begin(), off_s.end());
        const auto all_rank = front_ranks(pop_s);
        const auto all_crowd = crowding(pop_s, all_rank);
        std::vector<std::size_t> order(pop.size());
        for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
          return all_rank[a] != all_rank[b] ? all_rank[a] < all_rank[b] : all_crowd[a] > all_crowd[b];
        });
        std::vector<Sequence> next;
        std::vector<std::vector<double>> next_s;
        for (std::uint64_t m = 0; m < p; ++m) {
          next.push_back(pop[order[m]]);
          next_s.push_back(pop_s[order[m]]);
        }
        pop = std::move(next);
        pop_s = std::move(next_s);
        if (options.on_generation) options.on_generation(archive.scores());
      }
      break;
    }
  }
  archive.export_to(r);
  finalize(r, task);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::uint64_t default_budget(const BenchmarkTask& task) {
  return static_cast<std::uint64_t>(task.n_chains) *
         (1 + static_cast<std::uint64_t>(task.vocab_size - 1) * static_cast<std::uint64_t>(task.steps));
}

RunResult run_areuredi(const BenchmarkTask& task, const AreurediConfig& cfg, std::uint64_t seed) {
  task.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto objectives = task.objective_set();
  const std::size_t n_obj = objectives.size();

  std::vector<std::size_t> dropped(cfg.dropped);
  std::sort(dropped.begin(), dropped.end());
  dropped.erase(std::unique(dropped.begin(), dropped.end()), dropped.end());
  if (!dropped.empty() && dropped.back() >= n_obj) throw DomainError("dropped objective index out of range");
  if (dropped.size() >= n_obj) throw DomainError("cannot drop every objective");
  ObjectiveSet guidance = objectives;
  for (auto it = dropped.rbegin(); it != dropped.rend(); ++it) guidance = guidance.without(*it);
  std::vector<std::size_t> kept;
  for (std::size_t n = 0; n < n_obj; ++n) {
    if (!std::binary_search(dropped.begin(), dropped.end(), n)) kept.push_back(n);
  }

  SamplerConfig sc = cfg.sampler;
  sc.anneal.steps = cfg.steps > 0 ? cfg.steps : task.steps;
  sc.density = task_density(task);
  sc.seed = seed;
  sc.record_steps = true;
  if (!sc.weights) {
    const auto base = task.weights();
    std::vector<double> w;
    double total = 0.0;
    for (auto n : kept) total += base[n];
    for (auto n : kept) w.push_back(base[n] / total);
    if (kept.size() == n_obj) {
      sc.weights = base;
    } else {
      double head = 0.0;
      for (std::size_t m = 0; m + 1 < w.size(); ++m) head += w[m];
      w.back() = 1.0 - head;
      sc.weights = WeightVector(std::move(w));
    }
  }
  const int n_chains = cfg.n_chains > 0 ? cfg.n_chains : task.n_chains;
  const BaseModel& model = cached_model(task, cfg.rectified);
  const int steps = sc.anneal.steps;

  struct ChainOut {
    Sequence final;
    std::vector<double> final_scores;
    std::vector<std::vector<double>> trace;  // [t][n], full objective set
    std::vector<double> s;
    std::vector<std::uint8_t> accepted;
    std::uint64_t evaluations = 0;
  };
  std::vector<ChainOut> chains(static_cast<std::size_t>(n_chains));
  parallel_for(chains.size(), [&](std::size_t c) {
    SamplerConfig local = sc;
    if (cfg.sample_weights) {
      Rng wr(seed, (std::uint64_t{1} << 40) + c);
      local.weights = sample_weight(wr, guidance.size());
    }
    const auto traj = run_chain(local, model, guidance, std::nullopt, c);
    auto& out = chains[c];
    out.final = traj.final;
    out.final_scores = objectives.scores(traj.final);
    out.evaluations = traj.evaluations;
    Sequence x = traj.initial;
    for (const auto& rec : traj.records) {
      if (rec.accepted) x[rec.coordinate] = rec.proposed;
      out.trace.push_back(dropped.empty() ? rec.scores : objectives.scores(x));
      out.s.push_back(rec.scalarized);
      out.accepted.push_back(rec.accepted ? 1 : 0);
    }
  });

  RunResult r;
  r.task = task.name;
  r.method = "areuredi";
  r.seed = seed;
  r.degenerate_weights = !cfg.sample_weights && !sc.weights->interior();
  r.trace_means.assign(static_cast<std::size_t>(steps), std::vector<double>(n_obj, 0.0));
  r.trace_scalarized.assign(static_cast<std::size_t>(steps), 0.0);
  r.trace_acceptance.assign(static_cast<std::size_t>(steps), 0.0);
  for (int t = 0; t < steps; ++t) r.trace_eta.push_back(anneal(t, sc.anneal));
  for (const auto& c : chains) {
    r.population.push_back(c.final);
    r.scores.push_back(c.final_scores);
    r.evaluations += c.evaluations;
    for (int t = 0; t < steps; ++t) {
      for (std::size_t n = 0; n < n_obj; ++n) r.trace_means[t][n] += c.trace[t][n] / n_chains;
      r.trace_scalarized[t] += c.s[t] / n_chains;
      r.trace_acceptance[t] += static_cast<double>(c.accepted[t]) / n_chains;
    }
  }
  finalize(r, task);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::guidance:
      return "guidance";
    case AblationKind::annealing:
      return "annealing";
    case AblationKind::monotone:
      return "monotone";
    case AblationKind::rectification:
      return "rectification";
  }
  return "guidance";
}

AblationKind ablation_from_string(const std::string& name) {
  if (name == "guidance") return AblationKind::guidance;
  if (name == "annealing") return AblationKind::annealing;
  if (name == "monotone") return AblationKind::monotone;
  if (name == "rectification") return AblationKind::rectification;
  throw DomainError("unknown ablation: " + name);
}

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::vector<AblationCell> run_ablation(const BenchmarkTask& task, AblationKind kind, const AreurediConfig& base,
                                       std::span<const std::uint64_t> seeds) {
  std::vector<AblationCell> cells;
  switch (kind) {
    case AblationKind::guidance: {
      cells.push_back({"all", base, {}});
      for (std::size_t n = 0; n < task.objectives.size(); ++n) {
        AblationCell c{"drop:" + to_string(task.objectives[n]), base, {}};
        c.config.dropped.push_back(n);
        cells.push_back(std::move(c));
      }
      break;
    }
    case AblationKind::annealing: {
      const double lo = base.sampler.anneal.eta_min;
      const double hi = base.sampler.anneal.eta_max;
      cells.push_back({"annealed", base, {}});
      for (double eta : {lo, 0.5 * (lo + hi), hi}) {
        AblationCell c{"fixed:" + format_number(eta), base, {}};
        c.config.sampler.anneal.eta_min = eta;
        c.config.sampler.anneal.eta_max = eta;
        cells.push_back(std::move(c));
      }
      break;
    }
    case AblationKind::monotone: {
      for (bool on : {true, false}) {
        AblationCell c{on ? "monotone:on" : "monotone:off", base, {}};
        c.config.sampler.monotone = on;
        cells.push_back(std::move(c));
      }
      break;
    }
    case AblationKind::rectification: {
      for (bool on : {false, true}) {
        AblationCell c{on ? "rectified:on" : "rectified:off", base, {}};
        c.config.rectified = on;
        cells.push_back(std::move(c));
      }
      break;
    }
  }
  for (auto& cell : cells) {
    for (auto seed : seeds) {
      auto r = run_areuredi(task, cell.config, seed);
      r.setting = cell.label;
      cell.runs.push_back(std::move(r));
    }
  }
  return cells;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double wilcoxon_greater(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("paired samples differ in size");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  }
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
  // Doubled ranks keep tie averages integral.
  std::vector<int> rank2(n);
  for (std::size_t a = 0; a < n;) {
    std::size_t b = a;
    while (b + 1 < n && std::abs(d[order[b + 1]]) == std::abs(d[order[a]])) ++b;
    const int avg2 = static_cast<int>(a + b + 2);
    for (std::size_t m = a; m <= b; ++m) rank2[order[m]] = avg2;
    a = b + 1;
  }
  int w_plus = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank2[i];
    if (d[i] > 0.0) w_plus += rank2[i];
  }
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int s = total; s >= rank2[i]; --s) ways[s] += ways[s - rank2[i]];
  }
  double tail = 0.0;
  for (int s = w_plus; s <= total; ++s) tail += ways[s];
  return tail / std::ldexp(1.0, static_cast<int>(n));
}

unsigned thread_count() {
  if (const char* env = std::getenv("AREUREDI_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string csv_header(std::size_t n_objectives) {
  std::string h = "task,method,setting,seed,population,evaluations,hypervolume,coverage,front_fraction";
  for (std::size_t n = 0; n < n_objectives; ++n) h += ",mean_s" + std::to_string(n);
  return h;
}

std::string to_csv_row(const RunResult& r) {
  std::string row = r.task + "," + r.method + "," + r.setting + "," + std::to_string(r.seed) + "," +
                    std::to_string(r.population.size()) + "," + std::to_string(r.evaluations) + "," +
                    exact(r.hypervolume) + "," + exact(r.coverage) + "," + exact(r.front_fraction);
  for (double m : r.mean_scores) row += "," + exact(m);
  return row;
}

std::string trace_to_jsonl(const RunResult& r) {
  std::string out;
  for (std::size_t t = 0; t < r.trace_means.size(); ++t) {
    const nlohmann::json line{{"task", r.task},
                              {"method", r.method},
                              {"setting", r.setting},
                              {"seed", r.seed},
                              {"t", t},
                              {"eta", r.trace_eta[t]},
                              {"S", r.trace_scalarized[t]},
                              {"acceptance", r.trace_acceptance[t]},
                              {"means", r.trace_means[t]}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string summary_markdown(const std::vector<RunResult>& runs) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) groups[{r.task, r.method, r.setting}].push_back(&r);
  std::ostringstream os;
  os << "| task | method | setting | runs | median HV | median coverage | median front fraction | median mean scores |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  char buf[64];
  for (const auto& [key, members] : groups) {
    std::vector<double> hv, cov, ff;
    const std::size_t n_obj = members.front()->mean_scores.size();
    std::vector<std::vector<double>> means(n_obj);
    for (const auto* r : members) {
      hv.push_back(r->hypervolume);
      cov.push_back(r->coverage);
      ff.push_back(r->front_fraction);
      for (std::size_t n = 0; n < n_obj; ++n) means[n].push_back(r->mean_scores[n]);
    }
    os << "| " << std::get<0>(key) << " | " << std::get<1>(key) << " | "
       << (std::get<2>(key).empty() ? "-" : std::get<2>(key)) << " | " << members.size() << " | ";
    std::snprintf(buf, sizeof buf, "%.4f | %.3f | %.3f | ", median(hv), median(cov), median(ff));
    os << buf;
    for (std::size_t n = 0; n < n_obj; ++n) {
      std::snprintf(buf, sizeof buf, "%s%.3f", n ? ", " : "", median(means[n]));
      os << buf;
    }
    os << " |\n";
  }
  return os.str();
}

std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label) {
  constexpr double width = 640, height = 400, left = 60, right = 150, top = 40, bottom = 50;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t points = 0;
  for (const auto& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    points = std::max(points, s.values.size());
  }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](std::size_t i) { return left + (points > 1 ? pw * static_cast<double>(i) / (points - 1) : 0.0); };
  auto py = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };
  char buf[160];
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n";
  os << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", left,
                top + ph, left + pw, top + ph);
  os << buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", left, top,
                left, top + ph);
  os << buf;
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g</text>\n", left - 6,
                  py(v) + 4, v);
    os << buf;
  }
  if (points > 0) {
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%zu</text>\n", left + pw,
                  top + ph + 16, points - 1);
    os << buf;
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"14\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 14 " << top + ph / 2
     << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = palette[s % (sizeof palette / sizeof *palette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(i), py(series[s].values[i]));
      os << buf;
    }
    os << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(s) + 8;
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                  left + pw + 12, ly, left + pw + 30, ly, colour);
    os << buf;
    os << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace areuredi
