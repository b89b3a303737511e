#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "areuredi/errors.hpp"
#include "json_compat.hpp"

#ifndef AREUREDI_VERSION
#define AREUREDI_VERSION "0.0.0"
#endif

namespace areuredi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path, const std::string& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(key, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write '" + path.string() + "'");
  out << text;
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path, "has the wrong type");
  }
}

WeightVector parse_weights(const std::vector<double>& w, const std::string& key) {
  try {
    return WeightVector(w);
  } catch (const DomainError& e) {
    std::ostringstream os;
    os << e.what() << " (got [";
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? ", " : "") << w[i];
    os << "])";
    throw ConfigError(key, os.str());
  }
}

std::vector<double> split_doubles(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key, "'" + item + "' is not a number");
    }
  }
  return out;
}

void validate(RunConfig& cfg) {
  if (!(cfg.anneal.eta_min > 0.0)) throw ConfigError("sampler.eta_min", "must be positive");
  if (!(cfg.anneal.eta_min <= cfg.anneal.eta_max)) throw ConfigError("sampler.eta_max", "must be >= eta_min");
  if (cfg.anneal.steps < 0) throw ConfigError("sampler.steps", "must be >= 1");
  if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) throw ConfigError("sampler.top_p", "must lie in (0, 1]");
  if (cfg.cap < 0) throw ConfigError("sampler.cap", "must be >= 0");
  if (cfg.chains < 0) throw ConfigError("sampler.chains", "must be >= 1");
  if (cfg.rounds < 1) throw ConfigError("rectify.rounds", "must be >= 1");
  if (cfg.rectify_steps < 1) throw ConfigError("rectify.steps", "must be >= 1");
  if (cfg.tc_steps < 1) throw ConfigError("rectify.tc_steps", "must be >= 1");
  if (cfg.n_pairs < 1) throw ConfigError("rectify.n_pairs", "must be >= 1");
  if (cfg.weights && cfg.weights->size() != cfg.task.objectives.size()) {
    throw ConfigError("weights", "has " + std::to_string(cfg.weights->size()) + " entries for " +
                                     std::to_string(cfg.task.objectives.size()) + " objectives");
  }
  if (!cfg.bounds.empty() && cfg.bounds.size() != cfg.task.objectives.size()) {
    throw ConfigError("task.bounds", "needs one entry per objective");
  }
  for (std::size_t n = 0; n < cfg.bounds.size(); ++n) {
    if (!(cfg.bounds[n].lower < cfg.bounds[n].upper)) {
      throw ConfigError("task.bounds[" + std::to_string(n) + "]", "needs lower < upper");
    }
  }
  if (!cfg.coupling_path.empty() && !fs::exists(cfg.coupling_path)) {
    throw ConfigError("coupling", "file '" + cfg.coupling_path + "' does not exist");
  }
  if (!cfg.denoiser_path.empty() && !fs::exists(cfg.denoiser_path)) {
    throw ConfigError("denoiser", "file '" + cfg.denoiser_path + "' does not exist");
  }
}

template <class E>
E enum_from(const std::string& text, const std::string& key, E (*parse)(const std::string&)) {
  try {
    return parse(text);
  } catch (const DomainError& e) {
    throw ConfigError(key, e.what());
  }
}

ScanOrder scan_from_string(const std::string& s) {
  if (s == "random") return ScanOrder::random;
  if (s == "sweep") return ScanOrder::sweep;
  throw DomainError("unknown scan order: " + s);
}
PriorTime prior_time_from_string(const std::string& s) {
  if (s == "source") return PriorTime::source;
  if (s == "chain") return PriorTime::chain;
  throw DomainError("unknown prior time: " + s);
}
TargetTime target_time_from_string(const std::string& s) {
  if (s == "final") return TargetTime::final;
  if (s == "next") return TargetTime::next;
  throw DomainError("unknown target time: " + s);
}
InitMode init_from_string(const std::string& s) {
  if (s == "source") return InitMode::source;
  if (s == "model") return InitMode::model;
  throw DomainError("unknown init mode: " + s);
}
TargetDensity density_from_string(const std::string& s) {
  if (s == "exact_p1") return TargetDensity::exact_p1;
  if (s == "factorized_p1") return TargetDensity::factorized_p1;
  throw DomainError("unknown target density: " + s);
}
BenchmarkTask task_from_string(const std::string& s) { return suite_task(s); }

BenchmarkTask parse_task(const json& node, std::vector<Bounds>& bounds) {
  if (node.is_string()) return enum_from(node.get<std::string>(), "task", task_from_string);
  if (!node.is_object()) throw ConfigError("task", "must be a suite name or an object");
  check_keys(node, "task", {"name", "K", "L", "objectives", "bounds", "weights", "steps", "chains"});
  BenchmarkTask t;
  t.name = get<std::string>(node, "name", "task.name", "custom");
  t.vocab_size = get<int>(node, "K", "task.K", 2);
  t.length = get<int>(node, "L", "task.L", 1);
  if (t.vocab_size < 2) throw ConfigError("task.K", "must be >= 2");
  if (t.length < 1) throw ConfigError("task.L", "must be >= 1");
  const auto objs = get<std::vector<std::string>>(node, "objectives", "task.objectives", {});
  if (objs.size() < 2) throw ConfigError("task.objectives", "needs at least two objectives");
  for (std::size_t n = 0; n < objs.size(); ++n) {
    const std::string key = "task.objectives[" + std::to_string(n) + "]";
    try {
      t.objectives.push_back(parse_suite_spec(objs[n]));
      (void)suite_objective(t.objectives.back(), t.vocab_size, t.length);
    } catch (const DomainError& e) {
      throw ConfigError(key, e.what());
    }
  }
  if (node.contains("bounds")) {
    const auto& b = node.at("bounds");
    if (!b.is_array()) throw ConfigError("task.bounds", "must be an array");
    for (std::size_t n = 0; n < b.size(); ++n) {
      const std::string key = "task.bounds[" + std::to_string(n) + "]";
      if (!b[n].is_object() || !b[n].contains("lower") || !b[n].contains("upper")) {
        throw ConfigError(key, "needs {\"lower\": ..., \"upper\": ...}");
      }
      bounds.push_back({get<double>(b[n], "lower", key + ".lower", 0.0), get<double>(b[n], "upper", key + ".upper", 1.0)});
    }
  }
  t.default_weights = get<std::vector<double>>(node, "weights", "task.weights", {});
  if (!t.default_weights.empty()) (void)parse_weights(t.default_weights, "task.weights");
  t.steps = get<int>(node, "steps", "task.steps", 20 * t.length);
  if (t.steps < 1) throw ConfigError("task.steps", "must be >= 1");
  t.n_chains = get<int>(node, "chains", "task.chains", 100);
  if (t.n_chains < 1) throw ConfigError("task.chains", "must be >= 1");
  for (std::uint64_t s = 0; s < 20; ++s) t.seeds.push_back(s);
  return t;
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  check_keys(doc, "", {"task", "weights", "coupling", "denoiser", "output", "seed", "verbosity", "sampler", "rectify"});
  RunConfig cfg;
  cfg.task = doc.contains("task") ? parse_task(doc.at("task"), cfg.bounds) : suite_task("lotz6");
  if (doc.contains("weights")) {
    cfg.weights = parse_weights(get<std::vector<double>>(doc, "weights", "weights", {}), "weights");
  }
  auto resolve = [&](const std::string& p) { return p.empty() || fs::path(p).is_absolute() ? p : (fs::path(base_dir) / p).string(); };
  cfg.coupling_path = resolve(get<std::string>(doc, "coupling", "coupling", ""));
  cfg.denoiser_path = resolve(get<std::string>(doc, "denoiser", "denoiser", ""));
  cfg.output = get<std::string>(doc, "output", "output", cfg.output);
  if (doc.contains("seed") && !doc.at("seed").is_number_unsigned()) {
    throw ConfigError("seed", "must be an unsigned 64-bit integer");
  }
  cfg.seed = get<std::uint64_t>(doc, "seed", "seed", 0);
  cfg.verbosity = get<int>(doc, "verbosity", "verbosity", 0);
  if (doc.contains("sampler")) {
    const auto& s = doc.at("sampler");
    if (!s.is_object()) throw ConfigError("sampler", "must be an object");
    check_keys(s, "sampler", {"eta_min", "eta_max", "steps", "top_p", "cap", "balancing", "monotone", "scan",
                              "prior_time", "target_time", "init", "chains", "sample_weights"});
    cfg.anneal.eta_min = get<double>(s, "eta_min", "sampler.eta_min", cfg.anneal.eta_min);
    cfg.anneal.eta_max = get<double>(s, "eta_max", "sampler.eta_max", cfg.anneal.eta_max);
    cfg.anneal.steps = get<int>(s, "steps", "sampler.steps", 0);
    if (s.contains("steps") && cfg.anneal.steps < 1) throw ConfigError("sampler.steps", "must be >= 1");
    cfg.top_p = get<double>(s, "top_p", "sampler.top_p", cfg.top_p);
    cfg.cap = get<int>(s, "cap", "sampler.cap", cfg.cap);
    cfg.balancing = enum_from(get<std::string>(s, "balancing", "sampler.balancing", "barker"), "sampler.balancing",
                              balancing_from_string);
    cfg.monotone = get<bool>(s, "monotone", "sampler.monotone", false);
    cfg.scan = enum_from(get<std::string>(s, "scan", "sampler.scan", "random"), "sampler.scan", scan_from_string);
    cfg.prior_time = enum_from(get<std::string>(s, "prior_time", "sampler.prior_time", "source"),
                               "sampler.prior_time", prior_time_from_string);
    cfg.target_time = enum_from(get<std::string>(s, "target_time", "sampler.target_time", "final"),
                                "sampler.target_time", target_time_from_string);
    cfg.init = enum_from(get<std::string>(s, "init", "sampler.init", "source"), "sampler.init", init_from_string);
    cfg.chains = get<int>(s, "chains", "sampler.chains", 0);
    if (s.contains("chains") && cfg.chains < 1) throw ConfigError("sampler.chains", "must be >= 1");
    cfg.sample_weights = get<bool>(s, "sample_weights", "sampler.sample_weights", false);
  }
  if (doc.contains("rectify")) {
    const auto& r = doc.at("rectify");
    if (!r.is_object()) throw ConfigError("rectify", "must be an object");
    check_keys(r, "rectify", {"rounds", "mode", "steps", "tc_steps", "n_pairs"});
    cfg.rounds = get<int>(r, "rounds", "rectify.rounds", cfg.rounds);
    cfg.rectify_mode = enum_from(get<std::string>(r, "mode", "rectify.mode", "multiplicative"), "rectify.mode",
                                 rectify_mode_from_string);
    cfg.rectify_steps = get<int>(r, "steps", "rectify.steps", cfg.rectify_steps);
    cfg.tc_steps = get<int>(r, "tc_steps", "rectify.tc_steps", cfg.tc_steps);
    cfg.n_pairs = get<int>(r, "n_pairs", "rectify.n_pairs", cfg.n_pairs);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  const auto text = read_file(path, "config");
  const auto dir = fs::path(path).parent_path();
  return parse_config(text, dir.empty() ? "." : dir.string());
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(s, &used);
      if (used != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(s);
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ConfigError("seeds", "'" + text + "' is not a seed list");
    }
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = number(text.substr(0, dots));
    const auto hi = number(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("seeds", "empty range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(number(item));
  if (out.empty()) throw ConfigError("seeds", "no seeds given");
  return out;
}

namespace {

json config_to_json(const RunConfig& c) {
  json task{{"name", c.task.name},
            {"K", c.task.vocab_size},
            {"L", c.task.length},
            {"steps", c.task.steps},
            {"chains", c.task.n_chains}};
  json objs = json::array();
  for (const auto& o : c.task.objectives) objs.push_back(to_string(o));
  task["objectives"] = objs;
  if (!c.bounds.empty()) {
    json b = json::array();
    for (const auto& x : c.bounds) b.push_back({{"lower", x.lower}, {"upper", x.upper}});
    task["bounds"] = b;
  }
  json doc{{"task", task},
           {"seed", c.seed},
           {"sampler",
            {{"eta_min", c.anneal.eta_min},
             {"eta_max", c.anneal.eta_max},
             {"steps", c.anneal.steps > 0 ? c.anneal.steps : c.task.steps},
             {"top_p", c.top_p},
             {"cap", c.cap},
             {"balancing", to_string(c.balancing)},
             {"monotone", c.monotone},
             {"scan", to_string(c.scan)},
             {"prior_time", to_string(c.prior_time)},
             {"target_time", to_string(c.target_time)},
             {"init", to_string(c.init)},
             {"chains", c.chains > 0 ? c.chains : c.task.n_chains},
             {"sample_weights", c.sample_weights}}},
           {"rectify",
            {{"rounds", c.rounds},
             {"mode", to_string(c.rectify_mode)},
             {"steps", c.rectify_steps},
             {"tc_steps", c.tc_steps},
             {"n_pairs", c.n_pairs}}}};
  if (c.weights) doc["weights"] = c.weights->values();
  if (!c.coupling_path.empty()) doc["coupling"] = fs::path(c.coupling_path).filename().string();
  if (!c.denoiser_path.empty()) doc["denoiser"] = fs::path(c.denoiser_path).filename().string();
  return doc;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, const json& extra = {}) {
  json m{{"tool", "areuredi"},
         {"version", AREUREDI_VERSION},
         {"command", command},
         {"rng", "philox4x32-10"},
         {"streams", "chain c: (seed, c); sampled weights of chain c: (seed, 2^40 + c)"},
         {"config", config}};
  if (!extra.is_null()) m["extra"] = extra;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

ObjectiveSet objectives_of(const RunConfig& cfg) {
  auto set = cfg.task.objective_set();
  if (cfg.bounds.empty()) return set;
  auto objs = set.objectives();
  for (std::size_t n = 0; n < objs.size(); ++n) {
    objs[n].lower = cfg.bounds[n].lower;
    objs[n].upper = cfg.bounds[n].upper;
  }
  return ObjectiveSet(std::move(objs));
}

PathSchedule parse_schedule(const std::string& text) {
  try {
    if (text == "linear") return PathSchedule::linear();
    if (text.rfind("polynomial:", 0) == 0) return PathSchedule::polynomial(std::stod(text.substr(11)));
    if (text.rfind("bond_aware:", 0) == 0) {
      const auto rest = text.substr(11);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) throw DomainError("bond_aware needs gamma:mask");
      std::vector<std::uint8_t> mask;
      for (char ch : rest.substr(colon + 1)) {
        if (ch != '0' && ch != '1') throw DomainError("bond mask must be a 0/1 string");
        mask.push_back(static_cast<std::uint8_t>(ch - '0'));
      }
      return PathSchedule::bond_aware(std::stod(rest.substr(0, colon)), std::move(mask));
    }
  } catch (const std::invalid_argument&) {
  } catch (const DomainError& e) {
    throw ConfigError("schedule", e.what());
  }
  throw ConfigError("schedule", "expected linear, polynomial:<p> or bond_aware:<gamma>:<mask>");
}

// Flags shared by sample and bench; unset options leave the config untouched.
struct SamplerFlags {
  std::optional<double> eta_min, eta_max, top_p;
  std::optional<int> steps, cap, chains;
  std::optional<std::string> balancing, scan, prior_time, target_time, init, weights, task;
  std::optional<std::uint64_t> seed;
  bool monotone = false;
  bool sample_weights = false;

  void attach(CLI::App* app) {
    app->add_option("--task", task, "Suite task name");
    app->add_option("--eta-min", eta_min, "Initial guidance strength");
    app->add_option("--eta-max", eta_max, "Final guidance strength");
    app->add_option("--steps", steps, "Chain iterations T");
    app->add_option("--top-p", top_p, "Top-p candidate pruning");
    app->add_option("--cap", cap, "Candidate cap (0: none)");
    app->add_option("--balancing", balancing, "barker or sqrt");
    app->add_option("--scan", scan, "random or sweep");
    app->add_option("--prior-time", prior_time, "source or chain");
    app->add_option("--target-time", target_time, "final or next");
    app->add_option("--init", init, "source or model");
    app->add_option("--weights", weights, "Comma-separated simplex weights");
    app->add_option("--seed", seed, "Base seed");
    app->add_option("--chains", chains, "Number of chains");
    app->add_flag("--monotone", monotone, "Reject moves that lower the weighted score sum");
    app->add_flag("--sample-weights", sample_weights, "Draw weights per chain from the flat simplex");
  }

  void apply(RunConfig& c) const {
    if (task) {
      c.task = enum_from(*task, "task", task_from_string);
      c.bounds.clear();
      if (c.weights && c.weights->size() != c.task.objectives.size()) c.weights.reset();
    }
    if (eta_min) c.anneal.eta_min = *eta_min;
    if (eta_max) c.anneal.eta_max = *eta_max;
    if (eta_min && !eta_max && c.anneal.eta_max < *eta_min) c.anneal.eta_max = *eta_min;
    if (steps) {
      if (*steps < 1) throw ConfigError("steps", "must be >= 1");
      c.anneal.steps = *steps;
    }
    if (top_p) c.top_p = *top_p;
    if (cap) c.cap = *cap;
    if (chains) {
      if (*chains < 1) throw ConfigError("chains", "must be >= 1");
      c.chains = *chains;
    }
    if (balancing) c.balancing = enum_from(*balancing, "balancing", balancing_from_string);
    if (scan) c.scan = enum_from(*scan, "scan", scan_from_string);
    if (prior_time) c.prior_time = enum_from(*prior_time, "prior-time", prior_time_from_string);
    if (target_time) c.target_time = enum_from(*target_time, "target-time", target_time_from_string);
    if (init) c.init = enum_from(*init, "init", init_from_string);
    if (weights) c.weights = parse_weights(split_doubles(*weights, "weights"), "weights");
    if (seed) c.seed = *seed;
    if (monotone) c.monotone = true;
    if (sample_weights) c.sample_weights = true;
    validate(c);
  }
};

AreurediConfig areuredi_config(const RunConfig& c) {
  AreurediConfig a;
  a.sampler.anneal = c.anneal;
  a.sampler.weights = c.weights;
  a.sampler.balancing = c.balancing;
  a.sampler.pruning = {c.top_p, c.cap};
  a.sampler.monotone = c.monotone;
  a.sampler.scan = c.scan;
  a.sampler.prior_time = c.prior_time;
  a.sampler.target_time = c.target_time;
  a.sampler.init = c.init;
  a.steps = c.anneal.steps;
  a.n_chains = c.chains;
  a.sample_weights = c.sample_weights;
  return a;
}

RunConfig base_config(const std::optional<std::string>& path) {
  if (path) return load_config(*path);
  RunConfig c;
  c.task = suite_task("lotz6");
  return c;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------

int cmd_fit(const std::string& coupling_path, int steps, const std::string& mode, int window, double smoothing,
            const std::string& targets, const std::string& schedule, const std::string& out_path,
            std::ostream& out) {
  if (steps < 1) throw ConfigError("steps", "must be >= 1");
  const auto coupling = coupling_from_json(read_file(coupling_path, "coupling"));
  DenoiserOptions opts;
  if (mode == "full_state") {
    opts.mode = ContextMode::full_state;
  } else if (mode == "windowed") {
    opts.mode = ContextMode::windowed;
  } else {
    throw ConfigError("mode", "expected full_state or windowed");
  }
  opts.window = window;
  opts.smoothing = smoothing;
  if (targets == "all") {
    opts.targets = TargetTimes::all;
  } else if (targets == "next_and_final") {
    opts.targets = TargetTimes::next_and_final;
  } else {
    throw ConfigError("targets", "expected all or next_and_final");
  }
  const auto d = fit_exact_denoiser(coupling, parse_schedule(schedule), steps, opts);
  write_file(out_path, d.to_json() + "\n");
  out << "denoiser written to " << out_path << " (" << d.hole_count() << " zero-probability contexts)\n";
  return 0;
}

int cmd_rectify(RunConfig cfg, const std::string& schedule_text, std::ostream& out) {
  if (cfg.coupling_path.empty()) throw ConfigError("coupling", "rectify needs --coupling or a config coupling");
  const auto coupling = coupling_from_json(read_file(cfg.coupling_path, "coupling"));
  RectifyConfig rc;
  rc.mode = cfg.rectify_mode;
  rc.steps = cfg.rectify_steps;
  rc.tc_steps = cfg.tc_steps;
  rc.n_pairs = cfg.n_pairs;
  rc.seed = cfg.seed;
  const auto schedule = parse_schedule(schedule_text);
  const auto rounds = rectification_loop(coupling, cfg.rounds, schedule, rc);
  const fs::path dir(cfg.output);
  std::string log;
  for (const auto& r : rounds) {
    const auto line = round_to_jsonl(r, rc);
    out << line << "\n";
    log += line + "\n";
    write_file(dir / ("coupling_round" + std::to_string(r.round + 1) + ".json"), to_json(r.output) + "\n");
  }
  write_file(dir / "rounds.jsonl", log);
  auto conf = config_to_json(cfg);
  conf["schedule"] = schedule_text;
  write_manifest(dir, "rectify", conf);
  return 0;
}

int cmd_sample(RunConfig cfg, const std::string& objectives_text, const std::optional<std::string>& density_text,
               std::ostream& out) {
  std::optional<BaseModel> custom;
  ObjectiveSet objectives = objectives_of(cfg);
  if (!cfg.coupling_path.empty() || !cfg.denoiser_path.empty()) {
    if (cfg.coupling_path.empty() || cfg.denoiser_path.empty()) {
      throw ConfigError("denoiser", "a custom base model needs both a coupling and a denoiser");
    }
    auto coupling = coupling_from_json(read_file(cfg.coupling_path, "coupling"));
    auto d = FactorizedDenoiser::from_json(read_file(cfg.denoiser_path, "denoiser"));
    const auto& space = coupling.space();
    if (!objectives_text.empty()) {
      std::vector<SuiteSpec> specs;
      std::stringstream ss(objectives_text);
      std::string item;
      while (std::getline(ss, item, ';')) specs.push_back(parse_suite_spec(item));
      cfg.task.objectives = specs;
    }
    cfg.task.vocab_size = space.vocab_size();
    cfg.task.length = space.length();
    cfg.task.name = "custom";
    if (cfg.anneal.steps == 0) cfg.task.steps = 20 * space.length();
    objectives = objectives_of(cfg);
    custom.emplace(std::move(coupling), std::move(d));
  }
  validate(cfg);
  const int steps = cfg.anneal.steps > 0 ? cfg.anneal.steps : cfg.task.steps;
  const int n_chains = cfg.chains > 0 ? cfg.chains : cfg.task.n_chains;
  SamplerConfig sc = areuredi_config(cfg).sampler;
  sc.anneal.steps = steps;
  sc.seed = cfg.seed;
  const BaseModel model = custom ? *custom : task_model(cfg.task);
  sc.density = custom ? (model.has_exact_p1() ? TargetDensity::exact_p1 : TargetDensity::factorized_p1)
                      : task_density(cfg.task);
  if (density_text) sc.density = enum_from(*density_text, "density", density_from_string);
  if (!sc.weights) sc.weights = cfg.task.weights();

  std::vector<ChainTrajectory> trajs(static_cast<std::size_t>(n_chains));
  std::vector<WeightVector> used(static_cast<std::size_t>(n_chains), *sc.weights);
  parallel_for(trajs.size(), [&](std::size_t c) {
    SamplerConfig local = sc;
    if (cfg.sample_weights) {
      Rng wr(cfg.seed, (std::uint64_t{1} << 40) + c);
      local.weights = sample_weight(wr, objectives.size());
      used[c] = *local.weights;
    }
    trajs[c] = run_chain(local, model, objectives, std::nullopt, c);
  });

  const fs::path dir(cfg.output);
  std::string traces, csv = "chain,sequence";
  for (std::size_t n = 0; n < objectives.size(); ++n) csv += ",s" + std::to_string(n);
  csv += ",S\n";
  std::size_t accepted = 0, total = 0;
  for (std::size_t c = 0; c < trajs.size(); ++c) {
    for (const auto& rec : trajs[c].records) traces += step_to_jsonl(rec, c) + "\n";
    csv += std::to_string(c) + "," + to_string(trajs[c].final);
    for (double s : trajs[c].final_scores) csv += "," + fmt17(s);
    csv += "," + fmt17(trajs[c].final_scalarized) + "\n";
    accepted += trajs[c].accepted;
    total += trajs[c].records.size();
  }
  write_file(dir / "traces.jsonl", traces);
  write_file(dir / "population.csv", csv);
  auto conf = config_to_json(cfg);
  conf["sampler"]["density"] = to_string(sc.density);
  write_manifest(dir, "sample", conf);
  out << n_chains << " chains x " << steps << " steps, acceptance "
      << (total ? static_cast<double>(accepted) / static_cast<double>(total) : 0.0) << ", output in " << dir.string()
      << "\n";
  return 0;
}

int cmd_oracle(const std::string& check, int k, int l, double eta, std::uint64_t seed,
               const std::optional<std::string>& task_name, std::ostream& out) {
  if (k < 2) throw ConfigError("K", "must be >= 2");
  if (l < 1) throw ConfigError("L", "must be >= 1");
  if (!(eta >= 0.0)) throw ConfigError("eta", "must be >= 0");
  constexpr double threshold = 1e-10;
  if (check == "kernel") {
    if (!(eta > 0.0)) throw ConfigError("eta", "must be positive");
    const auto inst = random_instance(k, l, 2, seed);
    const BaseModel model(inst.coupling, fit_exact_denoiser(inst.coupling, PathSchedule::linear(), 1));
    Rng wr(seed, 1);
    const auto w = sample_weight(wr, 2);
    bool ok = true;
    for (auto g : {Balancing::barker, Balancing::sqrt}) {
      KernelSpec spec;
      spec.eta = eta;
      spec.weights = w;
      spec.balancing = g;
      const auto kern = exact_kernel(model, inst.objectives, spec);
      const double stat = stationarity_residual(kern, kern.target);
      const double db = detailed_balance_residual(kern, kern.target);
      const double rows = row_sum_residual(kern);
      const bool pass = stat <= threshold && db <= threshold && rows <= 1e-12;
      ok = ok && pass;
      out << "balancing=" << to_string(g) << " |piK-pi|_1=" << stat << " detailed_balance=" << db
          << " row_sums=" << rows << " threshold=" << threshold << (pass ? " PASS" : " FAIL") << "\n";
    }
    return ok ? 0 : 1;
  }
  if (check == "front") {
    const auto task = task_name ? enum_from(*task_name, "task", task_from_string) : [&] {
      BenchmarkTask t;
      t.name = "lotz";
      t.vocab_size = k;
      t.length = l;
      t.objectives = {parse_suite_spec("leading_ones"), parse_suite_spec("trailing_zeros")};
      t.steps = 20 * l;
      return t;
    }();
    const auto front = pareto_front(task.objective_set(), task.space());
    out << "index,sequence";
    for (std::size_t n = 0; n < task.objectives.size(); ++n) out << ",s" << n;
    out << "\n";
    for (std::size_t m = 0; m < front.states.size(); ++m) {
      out << front.states[m] << "," << to_string(front.members[m]);
      for (double s : front.scores[m]) out << "," << s;
      out << "\n";
    }
    out << front.states.size() << " Pareto-optimal states\n";
    return 0;
  }
  if (check == "target") {
    const auto inst = random_instance(k, l, 2, seed);
    Rng wr(seed, 1);
    const auto w = sample_weight(wr, 2);
    const auto p1 = inst.coupling.target_marginal();
    const auto pi = exact_target(p1, eta, w, inst.objectives, inst.coupling.space());
    const auto arg = argmax_set(w, inst.objectives, inst.coupling.space());
    double mass = 0.0;
    for (auto idx : arg.states) mass += pi[idx];
    out << "eta=" << eta << " |F_w|=" << arg.states.size() << " max S_w=" << arg.value << " mass(F_w)=" << mass
        << "\n";
    return 0;
  }
  if (check == "tc") {
    const StateSpace space(k, l);
    Rng rng(seed, 0);
    const auto coupling = random_coupling(space, rng);
    const auto schedule = PathSchedule::linear();
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b <= 4; ++b) {
        const auto tc = conditional_tc_exact(coupling, schedule, a / 4.0, b / 4.0);
        out << "t=" << a / 4.0 << " s=" << b / 4.0 << " TC=" << tc.value << "\n";
      }
    }
    return 0;
  }
  throw ConfigError("check", "expected front, kernel, target or tc");
}

int cmd_bench(RunConfig cfg, const std::string& method, const std::string& seeds_text,
              const std::optional<std::string>& ablation, std::optional<std::uint64_t> budget, std::ostream& out) {
  const auto seeds = parse_seeds(seeds_text);
  BenchmarkTask task = cfg.task;
  if (cfg.anneal.steps > 0) task.steps = cfg.anneal.steps;
  if (cfg.chains > 0) task.n_chains = cfg.chains;
  if (!cfg.bounds.empty()) throw ConfigError("task.bounds", "bench uses analytic suite bounds");
  const auto acfg = areuredi_config(cfg);

  std::vector<std::string> methods;
  if (method == "all") {
    methods = {"areuredi", "random_search", "one_plus_one_ea", "nsga2_lite"};
  } else if (method == "areuredi") {
    methods = {method};
  } else {
    (void)enum_from(method, "method", baseline_from_string);
    methods = {method};
  }
  if (ablation && method != "areuredi") throw ConfigError("ablation", "ablations run with --method areuredi");

  std::vector<RunResult> results;
  if (ablation) {
    const auto kind = enum_from(*ablation, "ablation", ablation_from_string);
    for (auto& cell : run_ablation(task, kind, acfg, seeds)) {
      for (auto& r : cell.runs) results.push_back(std::move(r));
    }
  } else {
    std::map<std::uint64_t, std::uint64_t> spent;
    for (const auto& m : methods) {
      for (auto seed : seeds) {
        if (m == "areuredi") {
          results.push_back(run_areuredi(task, acfg, seed));
          spent[seed] = results.back().evaluations;
        } else {
          std::uint64_t b = budget ? *budget : default_budget(task);
          if (!budget && spent.count(seed)) b = spent[seed];
          BaselineOptions bo;
          bo.weights = cfg.weights;
          results.push_back(run_baseline(baseline_from_string(m), task, b, seed, bo));
        }
      }
    }
  }

  const fs::path dir(cfg.output);
  std::string csv = csv_header(task.objectives.size()) + "\n";
  std::string traces, timings = "task,method,setting,seed,seconds\n";
  for (const auto& r : results) {
    csv += to_csv_row(r) + "\n";
    traces += trace_to_jsonl(r);
    timings += r.task + "," + r.method + "," + r.setting + "," + std::to_string(r.seed) + "," + fmt17(r.seconds) + "\n";
  }
  write_file(dir / "results.csv", csv);
  write_file(dir / "traces.jsonl", traces);
  write_file(dir / "summary.md", summary_markdown(results));
  write_file(dir / "timings.csv", timings);
  auto conf = config_to_json(cfg);
  json extra{{"method", method}, {"seeds", seeds}};
  if (ablation) extra["ablation"] = *ablation;
  if (budget) extra["budget"] = *budget;
  write_manifest(dir, "bench", conf, extra);
  out << summary_markdown(results);
  return 0;
}

int cmd_plot(const std::string& trace_path, const std::string& out_path, const std::string& title,
             std::ostream& out) {
  std::ifstream in(trace_path);
  if (!in) throw ConfigError("trace", "cannot read '" + trace_path + "'");
  // (method/setting, objective) -> t -> (sum, count)
  std::map<std::string, std::map<std::size_t, std::vector<std::pair<double, int>>>> acc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error&) {
      throw ConfigError("trace", "line " + std::to_string(lineno) + " is not JSON");
    }
    if (!row.contains("t") || !row.contains("means")) continue;
    std::string label = row.value("method", std::string("trace"));
    const auto setting = row.value("setting", std::string());
    if (!setting.empty()) label += "/" + setting;
    const auto t = row.at("t").get<std::size_t>();
    const auto means = row.at("means").get<std::vector<double>>();
    for (std::size_t n = 0; n < means.size(); ++n) {
      auto& series = acc[label][n];
      if (series.size() <= t) series.resize(t + 1, {0.0, 0});
      series[t].first += means[n];
      series[t].second += 1;
    }
  }
  if (acc.empty()) throw ConfigError("trace", "no per-iteration records found");
  std::vector<Series> series;
  for (const auto& [label, per_obj] : acc) {
    for (const auto& [n, values] : per_obj) {
      Series s;
      s.label = label + " s" + std::to_string(n);
      for (const auto& [sum, count] : values) s.values.push_back(count ? sum / count : 0.0);
      series.push_back(std::move(s));
    }
  }
  write_file(out_path, line_chart_svg(title, series, "iteration", "mean normalized score"));
  out << "wrote " << out_path << " (" << series.size() << " series)\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Annealed multi-objective discrete-flow sampling with exact small-space oracles", "areuredi"};
  app.set_version_flag("--version", AREUREDI_VERSION);
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "JSON run configuration");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit an exact tabular denoiser to a coupling");
  std::string fit_coupling, fit_mode = "full_state", fit_targets = "all", fit_schedule = "linear",
                            fit_out = "denoiser.json";
  int fit_steps = 4, fit_window = 1;
  double fit_smoothing = 0.1;
  fit->add_option("--coupling", fit_coupling, "Coupling JSON")->required();
  fit->add_option("--steps", fit_steps, "Uniform grid steps");
  fit->add_option("--mode", fit_mode, "full_state or windowed");
  fit->add_option("--window", fit_window, "Window radius (windowed mode)");
  fit->add_option("--smoothing", fit_smoothing, "Additive count smoothing (windowed mode)");
  fit->add_option("--targets", fit_targets, "all or next_and_final");
  fit->add_option("--schedule", fit_schedule, "linear | polynomial:<p> | bond_aware:<gamma>:<mask>");
  fit->add_option("--out", fit_out, "Output file");

  // rectify
  auto* rect = app.add_subcommand("rectify", "Iterate coupling rectification and log conditional TC");
  std::optional<std::string> r_coupling, r_mode, r_out;
  std::optional<int> r_rounds, r_steps, r_tc_steps, r_pairs;
  std::optional<std::uint64_t> r_seed;
  std::string r_schedule = "linear";
  rect->add_option("--coupling", r_coupling, "Coupling JSON");
  rect->add_option("--rounds", r_rounds, "Number of rounds");
  rect->add_option("--mode", r_mode, "multiplicative, model_coupling or empirical");
  rect->add_option("--steps", r_steps, "Composition and sampling steps");
  rect->add_option("--tc-steps", r_tc_steps, "TC is logged for every pair on this grid");
  rect->add_option("--n-pairs", r_pairs, "Pairs per empirical round");
  rect->add_option("--seed", r_seed, "Seed");
  rect->add_option("--schedule", r_schedule, "linear | polynomial:<p> | bond_aware:<gamma>:<mask>");
  rect->add_option("--out", r_out, "Output directory");

  // sample
  auto* sample = app.add_subcommand("sample", "Run annealed chains on a task or a fitted base model");
  SamplerFlags sflags;
  sflags.attach(sample);
  std::optional<std::string> s_coupling, s_denoiser, s_out, s_density;
  std::string s_objectives;
  sample->add_option("--coupling", s_coupling, "Coupling JSON of a custom base model");
  sample->add_option("--denoiser", s_denoiser, "Denoiser JSON of a custom base model");
  sample->add_option("--objectives", s_objectives, "Semicolon-separated suite objectives for a custom model");
  sample->add_option("--density", s_density, "exact_p1 or factorized_p1");
  sample->add_option("--out", s_out, "Output directory");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Exact checks on enumerable instances");
  std::string o_check;
  int o_k = 3, o_l = 3;
  double o_eta = 1.0;
  std::uint64_t o_seed = 0;
  std::optional<std::string> o_task;
  oracle->add_option("--check", o_check, "front, kernel, target or tc")->required();
  oracle->add_option("--K", o_k, "Vocabulary size");
  oracle->add_option("--L", o_l, "Sequence length");
  oracle->add_option("--eta", o_eta, "Guidance strength");
  oracle->add_option("--seed", o_seed, "Instance seed");
  oracle->add_option("--task", o_task, "Suite task (front check)");

  // bench
  auto* bench = app.add_subcommand("bench", "Run methods or ablations over seeds");
  SamplerFlags bflags;
  bflags.attach(bench);
  std::string b_method = "areuredi", b_seeds = "0..19";
  std::optional<std::string> b_ablation, b_out;
  std::optional<std::uint64_t> b_budget;
  bench->add_option("--method", b_method, "areuredi, random_search, one_plus_one_ea, nsga2_lite or all");
  bench->add_option("--seeds", b_seeds, "Seed range a..b or list");
  bench->add_option("--ablation", b_ablation, "guidance, annealing, monotone or rectification");
  bench->add_option("--budget", b_budget, "Evaluation budget for baselines");
  bench->add_option("--out", b_out, "Output directory");

  // plot
  auto* plot = app.add_subcommand("plot", "Render per-iteration means from a JSONL trace as SVG");
  std::string p_trace, p_out = "trace.svg", p_title = "mean normalized scores";
  plot->add_option("--trace", p_trace, "traces.jsonl from bench")->required();
  plot->add_option("--out", p_out, "SVG file");
  plot->add_option("--title", p_title, "Chart title");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << AREUREDI_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (fit->parsed()) {
      return cmd_fit(fit_coupling, fit_steps, fit_mode, fit_window, fit_smoothing, fit_targets, fit_schedule, fit_out,
                     out);
    }
    if (rect->parsed()) {
      auto cfg = base_config(config_path);
      if (r_coupling) cfg.coupling_path = *r_coupling;
      if (r_rounds) cfg.rounds = *r_rounds;
      if (r_mode) cfg.rectify_mode = enum_from(*r_mode, "mode", rectify_mode_from_string);
      if (r_steps) cfg.rectify_steps = *r_steps;
      if (r_tc_steps) cfg.tc_steps = *r_tc_steps;
      if (r_pairs) cfg.n_pairs = *r_pairs;
      if (r_seed) cfg.seed = *r_seed;
      if (r_out) cfg.output = *r_out;
      validate(cfg);
      return cmd_rectify(cfg, r_schedule, out);
    }
    if (sample->parsed()) {
      auto cfg = base_config(config_path);
      sflags.apply(cfg);
      if (s_coupling) cfg.coupling_path = *s_coupling;
      if (s_denoiser) cfg.denoiser_path = *s_denoiser;
      if (s_out) cfg.output = *s_out;
      validate(cfg);
      return cmd_sample(cfg, s_objectives, s_density, out);
    }
    if (oracle->parsed()) return cmd_oracle(o_check, o_k, o_l, o_eta, o_seed, o_task, out);
    if (bench->parsed()) {
      auto cfg = base_config(config_path);
      bflags.apply(cfg);
      if (b_out) cfg.output = *b_out;
      return cmd_bench(cfg, b_method, b_seeds, b_ablation, b_budget, out);
    }
    if (plot->parsed()) return cmd_plot(p_trace, p_out, p_title, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "error: malformed document: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace areuredi::cli
