#include "commands.hpp"

#include "fugu/config.hpp"
#include "fugu/pipeline.hpp"
#include "fugu/simulator.hpp"
#include "fugu/stats.hpp"
#include "fugu/text.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace fugu::cli {

namespace fs = std::filesystem;

namespace {

ExperimentConfig load_config(const CommandOptions& o) {
  KeyValueConfig kv = o.config ? KeyValueConfig::load(*o.config) : KeyValueConfig{};
  // Flags override file values.
  if (o.seed) kv.set("experiment", "seed", std::to_string(*o.seed));
  if (o.schemes) kv.set("experiment", "schemes", *o.schemes);
  if (o.sessions) kv.set("experiment", "sessions", std::to_string(*o.sessions));
  if (o.window_days) kv.set("train", "window_days", std::to_string(*o.window_days));
  auto cfg = ExperimentConfig::from(kv);
  if (o.warm_start) cfg.training.warm_start = *o.warm_start;
  return cfg;
}

void require_schemes(const ExperimentConfig& cfg) {
  if (cfg.schemes.empty()) throw ConfigError("no schemes configured (experiment.schemes or --schemes)");
  cfg.validate();
}

std::vector<fs::path> archive_inputs(const CommandOptions& o, const ExperimentConfig& cfg) {
  const auto& roots = o.inputs.empty() ? cfg.training.archives : o.inputs;
  if (roots.empty()) throw ConfigError("no telemetry archives given");
  std::vector<fs::path> out;
  for (const auto& r : roots) {
    const auto dirs = expand_archives(r);
    out.insert(out.end(), dirs.begin(), dirs.end());
  }
  return out;
}

Telemetry read_archives(const std::vector<fs::path>& dirs, std::ostream& out) {
  auto parsed = parse_archives(dirs);
  if (parsed.report.malformed > 0) {
    out << "skipped " << parsed.report.malformed << " malformed rows\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(parsed.report.messages.size(), 5); ++i)
      out << "  " << parsed.report.messages[i] << '\n';
  }
  return std::move(parsed.telemetry);
}

PredictorVariant variant_for(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::fugu_throughput: return PredictorVariant::throughput;
    case SchemeKind::fugu_linear: return PredictorVariant::linear;
    default: return PredictorVariant::full;
  }
}

using PredictorMap = std::map<std::string, std::shared_ptr<const TransmissionTimePredictor>>;

struct Inputs {
  std::vector<NetworkTrace> traces;
  std::vector<VideoSpec> videos;
};

Inputs load_inputs(const ExperimentConfig& cfg) {
  Inputs in;
  for (const auto& p : list_trace_files(cfg.trace_dir)) {
    try {
      in.traces.push_back(load_trace_file(p, cfg.base_delay));
    } catch (const std::exception& e) {
      throw std::runtime_error(p.string() + ": " + e.what());
    }
  }
  if (!fs::is_regular_file(cfg.video)) throw ConfigError("video spec not found: " + cfg.video.string());
  in.videos.push_back(load_video_spec_file(cfg.video));
  return in;
}

ExperimentSpec make_spec(const ExperimentConfig& cfg, const Inputs& in,
                         const std::vector<std::string>& schemes, const PredictorMap& predictors) {
  ExperimentSpec spec;
  for (const auto& name : schemes) {
    SchemeSpec s{name, scheme_kind_from_string(name), nullptr};
    if (scheme_needs_predictor(s.kind)) {
      const auto p = predictors.find(name);
      if (p == predictors.end()) throw ConfigError("scheme " + name + " has no model");
      s.predictor = p->second;
    }
    spec.schemes.push_back(std::move(s));
  }
  spec.traces = in.traces;
  spec.videos = in.videos;
  spec.sessions_per_arm = cfg.sessions_per_arm;
  spec.seed = cfg.seed;
  spec.watch = cfg.watch;
  spec.epoch_start = cfg.epoch_start;
  spec.days = cfg.days;
  spec.weights = cfg.weights;
  spec.horizon = cfg.horizon;
  spec.bba = cfg.bba;
  return spec;
}

ExperimentResult simulate(const ExperimentSpec& spec, const fs::path& dir, std::ostream& out) {
  auto result = run_experiment(spec);
  std::size_t aborted = 0;
  for (const auto& s : result.sessions) {
    if (!s.result.accounting_holds())
      throw InvariantViolation("session time accounting does not balance");
    aborted += s.result.aborted ? 1 : 0;
  }
  write_experiment(spec, result, dir);
  out << "simulated " << result.sessions.size() << " sessions (" << aborted << " aborted) into "
      << dir.string() << '\n';
  return result;
}

void print_train_report(const TrainReport& r, const TrainingSettings& s, std::ostream& out) {
  out << "variant: " << to_string(s.variant) << '\n'
      << "examples: " << r.examples << '\n'
      << "window: " << s.window_days << " days ending day " << r.as_of_day << '\n'
      << "never acknowledged: " << r.never_acknowledged << ", rejected: " << r.rejected << '\n'
      << "loss: " << text::format_number(r.initial_loss) << " -> " << text::format_number(r.final_loss)
      << '\n'
      << "warm start: " << (s.warm_start ? s.warm_start->string() : std::string("none")) << '\n';
}

std::vector<SchemeReport> evaluate_archives(const std::vector<fs::path>& dirs,
                                            const BootstrapOptions& options, std::ostream& out) {
  std::vector<SchemeReport> reports;
  for (const auto& d : dirs) {
    const auto telemetry = read_archives({d}, out);
    const auto summaries = summarize_telemetry(telemetry);
    reports.push_back(make_scheme_report(d.filename().string(), summaries, options));
  }
  return reports;
}

void write_reports(const std::vector<SchemeReport>& reports, const fs::path& dir,
                   std::ostream& out) {
  const auto comparison = compare_schemes(reports);
  fs::create_directories(dir);
  text::write_file((dir / "table.txt").string(), format_table(comparison));
  text::write_file((dir / "table.csv").string(), format_table_csv(comparison));
  text::write_file((dir / "plot.csv").string(), format_plot_data(reports));
  out << format_table(comparison);
}

BootstrapOptions bootstrap_options(const ExperimentConfig& cfg) {
  BootstrapOptions b;
  b.resamples = cfg.bootstrap_resamples;
  b.seed = cfg.seed;
  return b;
}

}  // namespace

std::vector<fs::path> expand_archives(const fs::path& path) {
  if (!fs::is_directory(path)) throw std::runtime_error("archive not found: " + path.string());
  if (fs::is_regular_file(path / kVideoSentFile)) return {path};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_directory() && fs::is_regular_file(e.path() / kVideoSentFile)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no telemetry archives under " + path.string());
  return out;
}

void cmd_generate(const CommandOptions& o, std::ostream& out) {
  auto cfg = load_config(o);
  fs::path trace_dir = cfg.trace_dir, video = cfg.video;
  if (o.out) {
    trace_dir = *o.out / "traces";
    video = *o.out / "video.txt";
  }
  if (trace_dir.empty() || video.empty())
    throw ConfigError("generate needs --out or experiment.traces and experiment.video");
  fs::create_directories(trace_dir);
  if (video.has_parent_path()) fs::create_directories(video.parent_path());
  for (std::size_t i = 0; i < cfg.trace_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%03zu.csv", i);
    text::write_file((trace_dir / name).string(), format_trace(synth_trace(cfg.trace_gen, cfg.seed * 1000003 + i)));
  }
  text::write_file(video.string(), format_video_spec(synth_video(cfg.video_gen, cfg.seed)));
  out << "wrote " << cfg.trace_count << " traces to " << trace_dir.string() << " and video spec "
      << video.string() << '\n';
}

void cmd_simulate(const CommandOptions& o, std::ostream& out) {
  auto cfg = load_config(o);
  require_schemes(cfg);
  cfg.validate_paths();
  const auto inputs = load_inputs(cfg);
  PredictorMap predictors;
  for (const auto& s : cfg.schemes)
    if (const auto m = cfg.model_for(s); m && scheme_needs_predictor(scheme_kind_from_string(s)))
      predictors[s] = std::make_shared<const TransmissionTimePredictor>(load_predictor(m->string()));
  simulate(make_spec(cfg, inputs, cfg.schemes, predictors), o.out.value_or(cfg.out), out);
}

void cmd_train(const CommandOptions& o, std::ostream& out) {
  auto cfg = load_config(o);
  cfg.validate();
  const auto telemetry = read_archives(archive_inputs(o, cfg), out);
  std::optional<TransmissionTimePredictor> warm;
  if (cfg.training.warm_start) warm = load_predictor(cfg.training.warm_start->string());
  const auto trained = train_predictor(telemetry, cfg.training, warm);
  const fs::path model = o.out.value_or(cfg.training.model);
  if (model.has_parent_path()) fs::create_directories(model.parent_path());
  save_predictor(trained.predictor, model.string());
  print_train_report(trained.report, cfg.training, out);
  out << "model: " << model.string() << '\n';
}

void cmd_evaluate(const CommandOptions& o, std::ostream& out) {
  auto cfg = load_config(o);
  cfg.validate();
  std::vector<fs::path> dirs;
  for (const auto& root : o.inputs.empty() ? std::vector<fs::path>{cfg.out} : o.inputs) {
    const auto d = expand_archives(root);
    dirs.insert(dirs.end(), d.begin(), d.end());
  }
  const auto reports = evaluate_archives(dirs, bootstrap_options(cfg), out);
  write_reports(reports, o.out.value_or(cfg.out / "report"), out);
}

void cmd_ablate(const CommandOptions& o, std::ostream& out) {
  auto cfg = load_config(o);
  cfg.validate();
  const auto telemetry = read_archives(archive_inputs(o, cfg), out);
  AblationOptions a;
  a.settings = cfg.training;
  a.holdout = cfg.ablate_holdout;
  a.epsilon = cfg.ablate_epsilon;
  a.seed = cfg.seed;
  const auto table = format_ablation(run_ablation(telemetry, a));
  if (o.out) {
    if (o.out->has_parent_path()) fs::create_directories(o.out->parent_path());
    text::write_file(o.out->string(), table);
  }
  out << table;
}

void cmd_report(const CommandOptions& o, std::ostream& out) {
  if (o.inputs.size() != 1) throw ConfigError("report takes one table.csv file");
  const auto& path = o.inputs.front();
  if (!fs::is_regular_file(path)) throw std::runtime_error("table not found: " + path.string());
  const auto reports = parse_table_csv(text::read_file(path.string()));
  out << format_table(compare_schemes(reports));
  if (o.out) text::write_file(o.out->string(), format_plot_data(reports));
}

void cmd_loop(const CommandOptions& o, std::ostream& out) {
  auto cfg = load_config(o);
  require_schemes(cfg);
  if (cfg.bootstrap_schemes.empty()) throw ConfigError("loop needs at least one baseline scheme");
  const auto inputs = load_inputs(cfg);
  const fs::path root = o.out.value_or(cfg.out);

  // Each round is a separate block of days with its own stream ids, so the
  // training window sees every earlier round.
  std::uint64_t next_stream = 1;
  const auto run_round = [&](std::size_t round, const std::vector<std::string>& schemes,
                             const PredictorMap& predictors) {
    auto spec = make_spec(cfg, inputs, schemes, predictors);
    spec.seed = cfg.seed + round;
    spec.first_stream_id = next_stream;
    spec.epoch_start = cfg.epoch_start + static_cast<double>(round) *
                                             static_cast<double>(cfg.days) * kSecondsPerDay;
    next_stream += spec.sessions_per_arm * spec.schemes.size();
    const auto dir = root / ("round" + std::to_string(round));
    simulate(spec, dir, out);
    return dir;
  };

  const auto model_path = [&](std::size_t round, PredictorVariant v) {
    return root / "models" / ("round" + std::to_string(round) + "-" + std::string(to_string(v)) + ".txt");
  };

  std::vector<fs::path> archives = expand_archives(run_round(0, cfg.bootstrap_schemes, PredictorMap{}));
  std::map<PredictorVariant, TransmissionTimePredictor> models;
  for (std::size_t round = 1; round <= cfg.loop_rounds; ++round) {
    const auto telemetry = read_archives(archives, out);
    PredictorMap predictors;
    std::map<PredictorVariant, std::shared_ptr<const TransmissionTimePredictor>> trained_now;
    for (const auto& name : cfg.schemes) {
      const auto kind = scheme_kind_from_string(name);
      if (!scheme_needs_predictor(kind)) continue;
      const auto variant = variant_for(kind);
      if (!trained_now.contains(variant)) {
        auto settings = cfg.training;
        settings.variant = variant;
        std::optional<TransmissionTimePredictor> warm;
        if (const auto prev = models.find(variant); prev != models.end()) {
          warm = prev->second;
          settings.warm_start = model_path(round - 1, variant);
        } else if (settings.warm_start) {
          warm = load_predictor(settings.warm_start->string());
        }
        const auto trained = train_predictor(telemetry, settings, warm);
        const auto path = model_path(round, variant);
        fs::create_directories(path.parent_path());
        save_predictor(trained.predictor, path.string());
        print_train_report(trained.report, settings, out);
        out << "model: " << path.string() << '\n';
        models.insert_or_assign(variant, trained.predictor);
        trained_now[variant] = std::make_shared<const TransmissionTimePredictor>(trained.predictor);
      }
      predictors[name] = trained_now[variant];
    }
    const auto dir = run_round(round, cfg.schemes, predictors);
    const auto round_archives = expand_archives(dir);
    const auto reports = evaluate_archives(round_archives, bootstrap_options(cfg), out);
    write_reports(reports, dir / "report", out);
    archives.insert(archives.end(), round_archives.begin(), round_archives.end());
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trace-driven ABR experiments with a learned transmission-time predictor"};
  app.require_subcommand(1);
  CommandOptions o;
  std::string config, out_path, warm_start;
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  std::size_t sessions = 0;
  std::int64_t window_days = 0;
  std::string schemes;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--out", out_path, "Output path");
  };
  auto* generate = app.add_subcommand("generate", "Write synthetic traces and a video spec");
  add_common(generate);
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a randomized experiment");
  add_common(simulate_cmd);
  simulate_cmd->add_option("--schemes", schemes, "Comma-separated schemes");
  simulate_cmd->add_option("--sessions", sessions, "Sessions per scheme")->check(CLI::PositiveNumber);
  auto* train = app.add_subcommand("train", "Train a transmission-time predictor");
  add_common(train);
  train->add_option("--window-days", window_days, "Days of data to train on")->check(CLI::PositiveNumber);
  train->add_option("--warm-start", warm_start, "Initialize from this model")->check(CLI::ExistingFile);
  train->add_option("archives", inputs, "Telemetry directories");
  auto* evaluate = app.add_subcommand("evaluate", "Summarize archives per scheme");
  add_common(evaluate);
  evaluate->add_option("archives", inputs, "Telemetry directories");
  auto* ablate = app.add_subcommand("ablate", "Compare predictor variants on held-out streams");
  add_common(ablate);
  ablate->add_option("--window-days", window_days, "Days of data to train on")->check(CLI::PositiveNumber);
  ablate->add_option("archives", inputs, "Telemetry directories");
  auto* report = app.add_subcommand("report", "Print a saved table and write plot data");
  report->add_option("--out", out_path, "Plot data file");
  report->add_option("table", inputs, "table.csv from evaluate")->required();
  auto* loop = app.add_subcommand("loop", "Simulate baselines, train, simulate all schemes, evaluate");
  add_common(loop);
  loop->add_option("--schemes", schemes, "Comma-separated schemes");
  loop->add_option("--sessions", sessions, "Sessions per scheme")->check(CLI::PositiveNumber);
  loop->add_option("--window-days", window_days, "Days of data to train on")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  const auto given = [](CLI::App* cmd, const char* name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  CLI::App* cmd = app.get_subcommands().front();
  if (given(cmd, "--config")) o.config = config;
  if (given(cmd, "--seed")) o.seed = seed;
  if (given(cmd, "--out")) o.out = out_path;
  if (given(cmd, "--schemes")) o.schemes = schemes;
  if (given(cmd, "--sessions")) o.sessions = sessions;
  if (given(cmd, "--window-days")) o.window_days = window_days;
  if (given(cmd, "--warm-start")) o.warm_start = warm_start;
  for (const auto& i : inputs) o.inputs.emplace_back(i);

  try {
    const std::string name = cmd->get_name();
    if (name == "generate") cmd_generate(o, out);
    else if (name == "simulate") cmd_simulate(o, out);
    else if (name == "train") cmd_train(o, out);
    else if (name == "evaluate") cmd_evaluate(o, out);
    else if (name == "ablate") cmd_ablate(o, out);
    else if (name == "report") cmd_report(o, out);
    else if (name == "loop") cmd_loop(o, out);
    return kSuccess;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvariantViolation& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariantViolation;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::runtime_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariantViolation;
  }
}

}  // namespace fugu::cli
