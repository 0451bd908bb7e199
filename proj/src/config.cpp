#include "fugu/config.hpp"

#include "fugu/text.hpp"

#include <algorithm>
#include <set>

namespace fugu {

namespace fs = std::filesystem;

KeyValueConfig KeyValueConfig::parse(std::string_view text_in) {
  KeyValueConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  for (auto line : text::lines(text_in)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const auto key = std::string(text::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "empty key");
    auto& sec = cfg.values_[section];
    if (sec.contains(key)) throw ConfigError(where + "duplicate key " + section + "." + key);
    sec[key] = std::string(text::trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  auto cfg = parse(text::read_file(path.string()));
  cfg.base_dir_ = path.parent_path();
  return cfg;
}

void KeyValueConfig::set(const std::string& section, const std::string& key, std::string value) {
  values_[section][key] = std::move(value);
}

bool KeyValueConfig::has(const std::string& section, const std::string& key) const {
  return get(section, key).has_value();
}

std::optional<std::string> KeyValueConfig::get(const std::string& section,
                                               const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string KeyValueConfig::get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key,
                                  double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  const auto x = text::parse_number<double>(*v);
  if (!x) throw ConfigError(section + "." + key + ": not a number: " + *v);
  return *x;
}

std::int64_t KeyValueConfig::get_int(const std::string& section, const std::string& key,
                                     std::int64_t fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  const auto x = text::parse_number<std::int64_t>(*v);
  if (!x) throw ConfigError(section + "." + key + ": not an integer: " + *v);
  return *x;
}

bool KeyValueConfig::get_bool(const std::string& section, const std::string& key,
                              bool fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  throw ConfigError(section + "." + key + ": not a boolean: " + *v);
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& section,
                                                  const std::string& key) const {
  std::vector<std::string> out;
  const auto v = get(section, key);
  if (!v) return out;
  for (auto item : text::split(*v, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

fs::path KeyValueConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment",
       {"schemes", "sessions", "seed", "out", "traces", "video", "days", "epoch_start",
        "base_delay"}},
      {"models", {}},  // any scheme name
      {"watch", {"median", "sigma"}},
      {"qoe", {"lambda", "mu", "max_buffer"}},
      {"horizon", {"steps", "buffer_bin"}},
      {"bba", {"reservoir", "cushion_top"}},
      {"train",
       {"archives", "model", "warm_start", "variant", "window_days", "as_of_day", "decay",
        "horizon_feature", "learning_rate", "batch_size", "epochs", "seed"}},
      {"evaluate", {"resamples"}},
      {"generate",
       {"traces", "duration", "median_capacity", "trace_sigma", "regime_mean", "regime_sigma",
        "noise_sigma", "chunks", "chunk_duration", "bitrates"}},
      {"ablate", {"holdout", "epsilon"}},
      {"loop", {"rounds", "bootstrap_schemes"}},
  };
  return keys;
}

bool is_known_scheme(const std::string& s) {
  try {
    scheme_kind_from_string(s);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::size_t to_count(std::int64_t v, const std::string& name) {
  if (v < 0) throw ConfigError(name + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
  for (const auto& [section, values] : kv.sections()) {
    const auto known = known_keys().find(section);
    if (known == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    if (section == "models") continue;
    for (const auto& [key, value] : values)
      if (!known->second.contains(key)) throw ConfigError("unknown config key " + section + "." + key);
  }

  ExperimentConfig c;
  c.schemes = kv.get_list("experiment", "schemes");
  c.sessions_per_arm = to_count(kv.get_int("experiment", "sessions", 1), "experiment.sessions");
  c.seed = static_cast<std::uint64_t>(kv.get_int("experiment", "seed", 0));
  c.out = kv.resolve(kv.get_string("experiment", "out", "out"));
  if (const auto t = kv.get("experiment", "traces")) c.trace_dir = kv.resolve(*t);
  if (const auto v = kv.get("experiment", "video")) c.video = kv.resolve(*v);
  c.days = kv.get_int("experiment", "days", c.days);
  c.epoch_start = kv.get_double("experiment", "epoch_start", c.epoch_start);
  c.base_delay = kv.get_double("experiment", "base_delay", c.base_delay);

  if (const auto m = kv.sections().find("models"); m != kv.sections().end())
    for (const auto& [scheme, path] : m->second) c.models[scheme] = kv.resolve(path);

  c.watch.median = kv.get_double("watch", "median", c.watch.median);
  c.watch.sigma = kv.get_double("watch", "sigma", c.watch.sigma);
  c.weights.lambda = kv.get_double("qoe", "lambda", c.weights.lambda);
  c.weights.mu = kv.get_double("qoe", "mu", c.weights.mu);
  c.weights.max_buffer = kv.get_double("qoe", "max_buffer", c.weights.max_buffer);
  c.horizon.steps = to_count(kv.get_int("horizon", "steps", 5), "horizon.steps");
  c.horizon.buffer_bin = kv.get_double("horizon", "buffer_bin", c.horizon.buffer_bin);
  c.bba.reservoir = kv.get_double("bba", "reservoir", c.bba.reservoir);
  c.bba.cushion_top = kv.get_double("bba", "cushion_top", c.bba.cushion_top);
  c.bootstrap_resamples =
      to_count(kv.get_int("evaluate", "resamples", 1000), "evaluate.resamples");

  auto& t = c.training;
  for (const auto& a : kv.get_list("train", "archives")) t.archives.push_back(kv.resolve(a));
  t.model = kv.resolve(kv.get_string("train", "model", "model.txt"));
  if (const auto w = kv.get("train", "warm_start"); w && !w->empty()) t.warm_start = kv.resolve(*w);
  try {
    t.variant = predictor_variant_from_string(kv.get_string("train", "variant", "full"));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("train.variant: ") + e.what());
  }
  t.window_days = kv.get_int("train", "window_days", t.window_days);
  if (kv.has("train", "as_of_day")) t.as_of_day = kv.get_int("train", "as_of_day", 0);
  t.decay = kv.get_double("train", "decay", t.decay);
  t.horizon_feature = kv.get_bool("train", "horizon_feature", t.horizon_feature);
  t.train.learning_rate = kv.get_double("train", "learning_rate", t.train.learning_rate);
  t.train.batch_size = kv.get_int("train", "batch_size", t.train.batch_size);
  t.train.epochs = static_cast<int>(kv.get_int("train", "epochs", t.train.epochs));
  t.train.seed = static_cast<std::uint64_t>(
      kv.get_int("train", "seed", static_cast<std::int64_t>(c.seed)));

  c.trace_count = to_count(kv.get_int("generate", "traces", 20), "generate.traces");
  auto& g = c.trace_gen;
  g.duration = kv.get_double("generate", "duration", g.duration);
  g.median_capacity = kv.get_double("generate", "median_capacity", g.median_capacity);
  g.trace_sigma = kv.get_double("generate", "trace_sigma", g.trace_sigma);
  g.regime_mean = kv.get_double("generate", "regime_mean", g.regime_mean);
  g.regime_sigma = kv.get_double("generate", "regime_sigma", g.regime_sigma);
  g.noise_sigma = kv.get_double("generate", "noise_sigma", g.noise_sigma);
  g.base_delay = c.base_delay;
  c.video_gen.chunks = to_count(kv.get_int("generate", "chunks", 900), "generate.chunks");
  c.video_gen.chunk_duration = kv.get_double("generate", "chunk_duration", kDefaultChunkDuration);
  if (kv.has("generate", "bitrates")) {
    c.video_gen.bitrates_mbps.clear();
    for (const auto& b : kv.get_list("generate", "bitrates")) {
      const auto x = text::parse_number<double>(b);
      if (!x) throw ConfigError("generate.bitrates: not a number: " + b);
      c.video_gen.bitrates_mbps.push_back(*x);
    }
  }

  c.ablate_holdout = kv.get_double("ablate", "holdout", c.ablate_holdout);
  c.ablate_epsilon = kv.get_double("ablate", "epsilon", c.ablate_epsilon);

  c.bootstrap_schemes = kv.get_list("loop", "bootstrap_schemes");
  if (c.bootstrap_schemes.empty())
    for (const auto& s : c.schemes)
      if (!is_known_scheme(s) || !scheme_needs_predictor(scheme_kind_from_string(s)))
        c.bootstrap_schemes.push_back(s);
  c.loop_rounds = to_count(kv.get_int("loop", "rounds", 1), "loop.rounds");
  return c;
}

void ExperimentConfig::validate() const {
  std::set<std::string> seen;
  for (const auto& s : schemes) {
    if (!is_known_scheme(s)) throw ConfigError("unknown scheme: " + s);
    if (!seen.insert(s).second) throw ConfigError("scheme listed twice: " + s);
  }
  for (const auto& s : bootstrap_schemes) {
    if (!is_known_scheme(s)) throw ConfigError("unknown scheme: " + s);
    if (scheme_needs_predictor(scheme_kind_from_string(s)))
      throw ConfigError("loop.bootstrap_schemes cannot include " + s + ", which needs a model");
  }
  if (loop_rounds == 0) throw ConfigError("loop.rounds must be positive");
  if (trace_count == 0) throw ConfigError("generate.traces must be positive");
  if (!(ablate_holdout > 0.0 && ablate_holdout < 1.0))
    throw ConfigError("ablate.holdout must be in (0, 1)");
  if (!(ablate_epsilon > 0.0 && ablate_epsilon < 1.0))
    throw ConfigError("ablate.epsilon must be in (0, 1)");
  if (sessions_per_arm == 0) throw ConfigError("experiment.sessions must be positive");
  if (days <= 0) throw ConfigError("experiment.days must be positive");
  if (!(base_delay >= 0.0)) throw ConfigError("experiment.base_delay must be non-negative");
  if (!(watch.median > 0.0) || !(watch.sigma >= 0.0))
    throw ConfigError("watch.median must be positive and watch.sigma non-negative");
  if (training.window_days <= 0) throw ConfigError("train.window_days must be positive");
  if (!(training.decay > 0.0 && training.decay <= 1.0))
    throw ConfigError("train.decay must be in (0, 1]");
  if (bootstrap_resamples == 0) throw ConfigError("evaluate.resamples must be positive");
  try {
    weights.validate();
    horizon.validate(weights.max_buffer);
    training.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(bba.reservoir >= 0.0 && bba.cushion_top > bba.reservoir))
    throw ConfigError("bba.cushion_top must exceed bba.reservoir");
}

void ExperimentConfig::validate_paths() const {
  if (trace_dir.empty()) throw ConfigError("experiment.traces is not set");
  if (!fs::is_directory(trace_dir)) throw ConfigError("trace directory not found: " + trace_dir.string());
  if (video.empty()) throw ConfigError("experiment.video is not set");
  if (!fs::is_regular_file(video)) throw ConfigError("video spec not found: " + video.string());
  for (const auto& s : schemes) {
    if (!scheme_needs_predictor(scheme_kind_from_string(s))) continue;
    const auto m = model_for(s);
    if (!m) throw ConfigError("scheme " + s + " needs a model in [models]");
    if (!fs::is_regular_file(*m)) throw ConfigError("model not found: " + m->string());
  }
}

std::optional<fs::path> ExperimentConfig::model_for(const std::string& scheme) const {
  if (const auto m = models.find(scheme); m != models.end()) return m->second;
  if (scheme == "fugu_point")
    if (const auto m = models.find("fugu"); m != models.end()) return m->second;
  return std::nullopt;
}

std::vector<fs::path> list_trace_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("trace directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("trace directory is empty: " + dir.string());
  return files;
}

}  // namespace fugu
