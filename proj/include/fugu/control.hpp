#ifndef FUGU_CONTROL_HPP
#define FUGU_CONTROL_HPP

#include "fugu/domain.hpp"
#include "fugu/predictors.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace fugu {

struct Horizon {
  std::size_t steps = 5;
  double buffer_bin = 0.25;  // seconds

  /// Throws unless steps >= 1 and buffer_bin divides max_buffer.
  void validate(double max_buffer) const;
};

struct PlanResult {
  std::size_t version = 0;    // index into the next chunk's versions
  double expected_qoe = 0.0;  // of the optimal plan over the horizon
  // Expected QoE of each first action (optimal continuation afterwards).
  std::vector<double> action_values;
  bool fallback = false;  // predictor failed; lowest version chosen
  std::size_t evaluated_states = 0;  // memoized DP states visited
};

/// Predicted transmission-time distributions, indexed [step][version].
using PredictionTable = std::vector<std::vector<TransmissionDistribution>>;

/// Produces a PredictionTable for the upcoming chunks (one row per step).
using PredictionSource = std::function<PredictionTable(std::span<const Chunk>)>;

/// Stochastic MPC by value iteration over (step, buffer level, previous
/// version), with buffer levels rounded to the horizon's grid after the
/// first step. Only states reachable from `state` are evaluated. Plans over
/// min(horizon.steps, upcoming.size()) chunks; ties go to the lower version.
PlanResult mpc_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                    const PredictionTable& table, const QoeWeights& weights,
                    const Horizon& horizon);

/// As above; if `source` throws, returns the lowest version with `fallback`.
PlanResult mpc_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                    const PredictionSource& source, const QoeWeights& weights,
                    const Horizon& horizon);

/// Exhaustive expectimax over every action and bin outcome with exact buffer
/// arithmetic. Limited to H <= 4, <= 4 versions and <= 4 active bins per
/// distribution; larger instances throw std::invalid_argument.
PlanResult brute_force_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                            const PredictionTable& table, const QoeWeights& weights,
                            const Horizon& horizon);

/// Point-mass table from a single throughput estimate.
PredictionTable deterministic_table(std::span<const Chunk> upcoming, std::size_t steps,
                                    double bytes_per_second);

/// MPC with the harmonic-mean throughput predictor. With no history, plans
/// with `cold_start_rate` if positive, otherwise returns the lowest version.
PlanResult mpc_hm_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                       const ThroughputHistory& history, const QoeWeights& weights,
                       const Horizon& horizon, std::optional<double> cold_start_rate = {});

/// Relative errors |predicted - actual| / actual of the last few throughput
/// predictions.
class PredictionErrors {
 public:
  explicit PredictionErrors(std::size_t window = kDefaultHmWindow) : window_(window) {}

  void record(double predicted, double actual);
  [[nodiscard]] double max_error() const;
  [[nodiscard]] std::size_t size() const { return errors_.size(); }

 private:
  std::size_t window_;
  std::deque<double> errors_;
};

/// Harmonic mean deflated by 1 + max recent relative error.
double robust_throughput(const ThroughputHistory& history, const PredictionErrors& errors);

PlanResult robust_mpc_hm_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                              const ThroughputHistory& history, const PredictionErrors& errors,
                              const QoeWeights& weights, const Horizon& horizon,
                              std::optional<double> cold_start_rate = {});

struct BbaConfig {
  double reservoir = 3.0;     // seconds
  double cushion_top = 13.5;  // seconds
};

/// Size budget from the buffer level: min size below the reservoir, max size
/// above the cushion, linear in between.
double bba_budget(const Chunk& next, double buffer, double reservoir, double cushion_top);

/// Highest-quality version within the budget, else the smallest version.
std::size_t bba_select(const Chunk& next, const PlaybackState& state, double reservoir,
                       double cushion_top);

}  // namespace fugu

#endif  // FUGU_CONTROL_HPP
