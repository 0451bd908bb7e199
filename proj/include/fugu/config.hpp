#ifndef FUGU_CONFIG_HPP
#define FUGU_CONFIG_HPP

// Experiment configuration.
//
// File format, one setting per line:
//
//   # comment
//   [section]
//   key = value
//
// Keys before the first section header belong to section "". Lists are
// comma-separated. Relative paths are resolved against the config file's
// directory.

#include "fugu/control.hpp"
#include "fugu/domain.hpp"
#include "fugu/nn.hpp"
#include "fugu/predictors.hpp"
#include "fugu/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fugu {

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, std::string value);
  [[nodiscard]] bool has(const std::string& section, const std::string& key) const;
  [[nodiscard]] std::optional<std::string> get(const std::string& section,
                                               const std::string& key) const;

  [[nodiscard]] std::string get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& section, const std::string& key,
                                  double fallback) const;
  [[nodiscard]] std::int64_t get_int(const std::string& section, const std::string& key,
                                     std::int64_t fallback) const;
  [[nodiscard]] bool get_bool(const std::string& section, const std::string& key,
                              bool fallback) const;
  [[nodiscard]] std::vector<std::string> get_list(const std::string& section,
                                                  const std::string& key) const;

  /// Directory the file was loaded from; empty for parsed text.
  [[nodiscard]] const std::filesystem::path& base_dir() const { return base_dir_; }
  [[nodiscard]] std::filesystem::path resolve(const std::string& path) const;

  [[nodiscard]] const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return values_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
  std::filesystem::path base_dir_;
};

struct TrainingSettings {
  std::vector<std::filesystem::path> archives;  // telemetry directories
  std::filesystem::path model;                  // output predictor
  std::optional<std::filesystem::path> warm_start;
  PredictorVariant variant = PredictorVariant::full;
  std::int64_t window_days = 14;
  std::optional<std::int64_t> as_of_day;  // defaults to the newest day in the data
  double decay = 0.9;
  bool horizon_feature = false;
  nn::TrainConfig train;
};

struct ExperimentConfig {
  std::vector<std::string> schemes;
  std::map<std::string, std::filesystem::path> models;  // scheme name -> predictor file
  std::filesystem::path trace_dir;
  std::filesystem::path video;
  std::size_t sessions_per_arm = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::int64_t days = 1;
  double epoch_start = 1.6e9;
  WatchDurationModel watch;
  QoeWeights weights;
  Horizon horizon;
  BbaConfig bba;
  double base_delay = kDefaultBaseDelay;
  TrainingSettings training;
  std::size_t bootstrap_resamples = 1000;

  // Synthetic inputs.
  std::size_t trace_count = 20;
  TraceGenConfig trace_gen;
  VideoGenConfig video_gen;

  double ablate_holdout = 0.2;
  double ablate_epsilon = 1e-3;

  // In-situ loop: baseline schemes collect the first telemetry, then each
  // round retrains and runs all schemes.
  std::vector<std::string> bootstrap_schemes;
  std::size_t loop_rounds = 1;

  /// Reads all sections; throws ConfigError on bad values.
  static ExperimentConfig from(const KeyValueConfig& kv);

  /// Schemes known and unique; numeric settings in range. An empty scheme
  /// list is allowed here since only simulation needs one.
  void validate() const;
  /// Trace directory, video spec and models exist.
  void validate_paths() const;

  /// Predictor file for a scheme; fugu_point falls back to the fugu model.
  [[nodiscard]] std::optional<std::filesystem::path> model_for(const std::string& scheme) const;
};

/// Files in the trace directory, sorted by name.
std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir);

}  // namespace fugu

#endif  // FUGU_CONFIG_HPP
