#include "fugu/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fugu {

void Horizon::validate(double max_buffer) const {
  if (steps < 1) throw std::invalid_argument("horizon must have at least one step");
  if (!(buffer_bin > 0.0)) throw std::invalid_argument("buffer_bin must be positive");
  const double levels = max_buffer / buffer_bin;
  if (std::abs(levels - std::round(levels)) > 1e-9)
    throw std::invalid_argument("buffer_bin must divide max_buffer evenly");
}

namespace {

std::size_t planning_steps(std::span<const Chunk> upcoming, const Horizon& horizon) {
  if (upcoming.empty()) throw std::invalid_argument("nothing to plan: no upcoming chunks");
  return std::min(horizon.steps, upcoming.size());
}

void check_table(std::span<const Chunk> upcoming, const PredictionTable& table,
                 std::size_t steps) {
  if (table.size() < steps) throw std::invalid_argument("prediction table has too few steps");
  for (std::size_t s = 0; s < steps; ++s)
    if (table[s].size() != upcoming[s].versions.size())
      throw std::invalid_argument("prediction table row " + std::to_string(s) +
                                  " does not match the chunk's version count");
}

// Picks the best first action; strict comparison keeps the lowest index on ties.
PlanResult pick_first_action(std::vector<double> action_values) {
  PlanResult result;
  result.version = 0;
  result.expected_qoe = action_values.front();
  for (std::size_t v = 1; v < action_values.size(); ++v) {
    if (action_values[v] > result.expected_qoe) {
      result.expected_qoe = action_values[v];
      result.version = v;
    }
  }
  result.action_values = std::move(action_values);
  return result;
}

class ValueIteration {
 public:
  ValueIteration(std::span<const Chunk> upcoming, const PredictionTable& table,
                 const QoeWeights& weights, const Horizon& horizon, std::size_t steps)
      : upcoming_(upcoming), table_(table), weights_(weights), bin_(horizon.buffer_bin),
        steps_(steps) {
    levels_ = static_cast<std::size_t>(std::lround(weights.max_buffer / bin_)) + 1;
    for (std::size_t s = 0; s < steps_; ++s)
      max_versions_ = std::max(max_versions_, upcoming_[s].versions.size());
    memo_.assign(steps_ * levels_ * max_versions_, std::numeric_limits<double>::quiet_NaN());
  }

  // Expected QoE of sending `version` at `step` from an exact buffer level,
  // followed by the optimal continuation.
  double action_value(std::size_t step, double buffer, double prev_quality,
                      std::size_t version) {
    const ChunkVersion& cv = upcoming_[step].versions[version];
    const auto& probs = table_[step][version].probabilities();
    double total = 0.0;
    for (std::size_t b = 0; b < kTimeBins; ++b) {
      if (probs[b] <= 0.0) continue;
      const double t = bin_representative(b);
      double v = chunk_qoe(cv, prev_quality, t, buffer, weights_);
      if (step + 1 < steps_) {
        const BufferStep next = advance_buffer(buffer, t, cv.duration, weights_.max_buffer);
        v += value(step + 1, level_of(next.new_buffer), version);
      }
      total += probs[b] * v;
    }
    return total;
  }

  std::size_t evaluated_states() const {
    return static_cast<std::size_t>(
        std::count_if(memo_.begin(), memo_.end(), [](double x) { return !std::isnan(x); }));
  }

 private:
  std::size_t level_of(double buffer) const {
    const auto level = std::lround(buffer / bin_);
    return static_cast<std::size_t>(std::clamp<long>(level, 0, static_cast<long>(levels_) - 1));
  }

  // v*(step, buffer level, previous version); terminal value is zero.
  double value(std::size_t step, std::size_t level, std::size_t prev) {
    double& slot = memo_[(step * levels_ + level) * max_versions_ + prev];
    if (!std::isnan(slot)) return slot;
    const double buffer = static_cast<double>(level) * bin_;
    const double prev_quality = upcoming_[step - 1].versions[prev].quality;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < upcoming_[step].versions.size(); ++v)
      best = std::max(best, action_value(step, buffer, prev_quality, v));
    slot = best;
    return best;
  }

  std::span<const Chunk> upcoming_;
  const PredictionTable& table_;
  const QoeWeights& weights_;
  double bin_;
  std::size_t steps_;
  std::size_t levels_ = 0;
  std::size_t max_versions_ = 0;
  std::vector<double> memo_;
};

double exhaustive_value(std::span<const Chunk> upcoming, const PredictionTable& table,
                        const QoeWeights& weights, std::size_t steps, std::size_t step,
                        double buffer, double prev_quality, std::size_t version) {
  const ChunkVersion& cv = upcoming[step].versions[version];
  const auto& probs = table[step][version].probabilities();
  double total = 0.0;
  for (std::size_t b = 0; b < kTimeBins; ++b) {
    if (probs[b] <= 0.0) continue;
    const double t = bin_representative(b);
    double v = chunk_qoe(cv, prev_quality, t, buffer, weights);
    if (step + 1 < steps) {
      const BufferStep next = advance_buffer(buffer, t, cv.duration, weights.max_buffer);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t w = 0; w < upcoming[step + 1].versions.size(); ++w)
        best = std::max(best, exhaustive_value(upcoming, table, weights, steps, step + 1,
                                               next.new_buffer, cv.quality, w));
      v += best;
    }
    total += probs[b] * v;
  }
  return total;
}

}  // namespace

PlanResult mpc_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                    const PredictionTable& table, const QoeWeights& weights,
                    const Horizon& horizon) {
  weights.validate();
  horizon.validate(weights.max_buffer);
  const std::size_t steps = planning_steps(upcoming, horizon);
  check_table(upcoming, table, steps);

  ValueIteration vi(upcoming, table, weights, horizon, steps);
  const double buffer = std::clamp(state.buffer, 0.0, weights.max_buffer);
  std::vector<double> values;
  for (std::size_t v = 0; v < upcoming[0].versions.size(); ++v) {
    const double prev = state.last_quality.value_or(upcoming[0].versions[v].quality);
    values.push_back(vi.action_value(0, buffer, prev, v));
  }
  PlanResult result = pick_first_action(std::move(values));
  result.evaluated_states = vi.evaluated_states();
  return result;
}

PlanResult mpc_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                    const PredictionSource& source, const QoeWeights& weights,
                    const Horizon& horizon) {
  PredictionTable table;
  try {
    table = source(upcoming.first(planning_steps(upcoming, horizon)));
  } catch (const std::exception&) {
    PlanResult fallback;
    fallback.fallback = true;
    return fallback;
  }
  return mpc_plan(upcoming, state, table, weights, horizon);
}

PlanResult brute_force_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                            const PredictionTable& table, const QoeWeights& weights,
                            const Horizon& horizon) {
  weights.validate();
  const std::size_t steps = planning_steps(upcoming, horizon);
  check_table(upcoming, table, steps);
  if (steps > 4) throw std::invalid_argument("brute force planner limited to 4 steps");
  for (std::size_t s = 0; s < steps; ++s) {
    if (upcoming[s].versions.size() > 4)
      throw std::invalid_argument("brute force planner limited to 4 versions");
    for (const auto& d : table[s])
      if (d.support_size() > 4)
        throw std::invalid_argument("brute force planner limited to 4 active bins");
  }

  const double buffer = std::clamp(state.buffer, 0.0, weights.max_buffer);
  std::vector<double> values;
  for (std::size_t v = 0; v < upcoming[0].versions.size(); ++v) {
    const double prev = state.last_quality.value_or(upcoming[0].versions[v].quality);
    values.push_back(exhaustive_value(upcoming, table, weights, steps, 0, buffer, prev, v));
  }
  return pick_first_action(std::move(values));
}

PredictionTable deterministic_table(std::span<const Chunk> upcoming, std::size_t steps,
                                    double bytes_per_second) {
  PredictionTable table(steps);
  for (std::size_t s = 0; s < steps; ++s)
    for (const auto& v : upcoming[s].versions)
      table[s].push_back(TransmissionDistribution::point_mass(
          discretize(throughput_time(static_cast<double>(v.size), bytes_per_second))));
  return table;
}

namespace {

PlanResult plan_with_rate(std::span<const Chunk> upcoming, const PlaybackState& state,
                          std::optional<double> rate, const QoeWeights& weights,
                          const Horizon& horizon) {
  if (!rate || !(*rate > 0.0)) {
    PlanResult fallback;
    fallback.fallback = true;
    return fallback;
  }
  const std::size_t steps = planning_steps(upcoming, horizon);
  return mpc_plan(upcoming, state, deterministic_table(upcoming, steps, *rate), weights, horizon);
}

}  // namespace

PlanResult mpc_hm_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                       const ThroughputHistory& history, const QoeWeights& weights,
                       const Horizon& horizon, std::optional<double> cold_start_rate) {
  const std::optional<double> rate =
      history.empty() ? cold_start_rate : std::optional<double>(hm_predict(history));
  return plan_with_rate(upcoming, state, rate, weights, horizon);
}

void PredictionErrors::record(double predicted, double actual) {
  if (!(actual > 0.0) || !(predicted >= 0.0))
    throw std::invalid_argument("prediction error needs positive actual throughput");
  errors_.push_back(std::abs(predicted - actual) / actual);
  while (errors_.size() > window_) errors_.pop_front();
}

double PredictionErrors::max_error() const {
  if (errors_.empty()) return 0.0;
  return *std::max_element(errors_.begin(), errors_.end());
}

double robust_throughput(const ThroughputHistory& history, const PredictionErrors& errors) {
  return hm_predict(history) / (1.0 + errors.max_error());
}

PlanResult robust_mpc_hm_plan(std::span<const Chunk> upcoming, const PlaybackState& state,
                              const ThroughputHistory& history, const PredictionErrors& errors,
                              const QoeWeights& weights, const Horizon& horizon,
                              std::optional<double> cold_start_rate) {
  const std::optional<double> rate = history.empty()
                                         ? cold_start_rate
                                         : std::optional<double>(robust_throughput(history, errors));
  return plan_with_rate(upcoming, state, rate, weights, horizon);
}

double bba_budget(const Chunk& next, double buffer, double reservoir, double cushion_top) {
  if (!(reservoir < cushion_top)) throw std::invalid_argument("reservoir must be below cushion");
  const auto min_size = static_cast<double>(next.versions.front().size);
  const auto max_size = static_cast<double>(next.versions.back().size);
  if (buffer <= reservoir) return min_size;
  if (buffer >= cushion_top) return max_size;
  const double frac = (buffer - reservoir) / (cushion_top - reservoir);
  return min_size + frac * (max_size - min_size);
}

std::size_t bba_select(const Chunk& next, const PlaybackState& state, double reservoir,
                       double cushion_top) {
  if (next.versions.empty()) throw std::invalid_argument("chunk has no versions");
  const double budget = bba_budget(next, state.buffer, reservoir, cushion_top);
  std::optional<std::size_t> best;
  for (std::size_t v = 0; v < next.versions.size(); ++v) {
    if (static_cast<double>(next.versions[v].size) > budget) continue;
    if (!best || next.versions[v].quality > next.versions[*best].quality) best = v;
  }
  return best.value_or(0);
}

}  // namespace fugu
