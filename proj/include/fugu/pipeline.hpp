#ifndef FUGU_PIPELINE_HPP
#define FUGU_PIPELINE_HPP

// Training and ablation on collected telemetry.

#include "fugu/config.hpp"
#include "fugu/data.hpp"
#include "fugu/predictors.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fugu {

struct TrainReport {
  std::size_t examples = 0;
  std::size_t never_acknowledged = 0;
  std::size_t rejected = 0;
  std::int64_t as_of_day = 0;
  double initial_loss = 0.0;  // mean weighted cross-entropy before training
  double final_loss = 0.0;    // and after
  bool warm_started = false;
};

struct TrainedPredictor {
  TransmissionTimePredictor predictor;
  TrainReport report;
};

/// Day of the newest sent chunk. Throws on telemetry without sent rows.
std::int64_t newest_day(const Telemetry& telemetry);

std::vector<TrainingExample> training_examples(const JoinResult& joined,
                                               const TrainingSettings& settings,
                                               std::int64_t as_of_day);

/// Joins, builds the windowed training set and trains one predictor.
/// Throws std::invalid_argument when the window holds no examples.
TrainedPredictor train_predictor(const Telemetry& telemetry, const TrainingSettings& settings,
                                 const std::optional<TransmissionTimePredictor>& warm_start = {});

/// Mean negative log-likelihood of the true time bins under the predictor,
/// each distribution first mixed with the uniform: (1 - eps) p + eps / 21.
double time_bin_cross_entropy(const TransmissionTimePredictor& predictor,
                              const std::vector<TrainingExample>& examples, double epsilon);

struct AblationOptions {
  TrainingSettings settings;
  double holdout = 0.2;    // fraction of streams held out
  double epsilon = 1e-3;
  std::uint64_t seed = 0;  // stream split and network initialization
};

struct AblationRow {
  PredictorVariant variant = PredictorVariant::full;
  double cross_entropy = 0.0;  // held out
  std::size_t train_examples = 0;
  std::size_t heldout_examples = 0;
};

/// Trains the full, linear and throughput-only variants on identical data
/// and seeds and scores them, plus the point-estimate use of the full net,
/// on held-out streams.
std::vector<AblationRow> run_ablation(const Telemetry& telemetry, const AblationOptions& options);

std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace fugu

#endif  // FUGU_PIPELINE_HPP
