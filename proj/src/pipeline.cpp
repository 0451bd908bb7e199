#include "fugu/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fugu {

std::int64_t newest_day(const Telemetry& telemetry) {
  if (telemetry.video_sent.empty()) throw std::invalid_argument("telemetry has no sent chunks");
  double newest = telemetry.video_sent.front().time;
  for (const auto& r : telemetry.video_sent) newest = std::max(newest, r.time);
  return epoch_day(newest);
}

std::vector<TrainingExample> training_examples(const JoinResult& joined,
                                               const TrainingSettings& settings,
                                               std::int64_t as_of_day) {
  TrainingSetOptions options;
  options.as_of_day = as_of_day;
  options.window_days = settings.window_days;
  options.decay = settings.decay;
  options.horizon_steps = settings.horizon_feature ? Horizon{}.steps : 0;
  return build_training_set(joined, options);
}

namespace {

std::size_t horizon_of(const TrainingSettings& settings) {
  return settings.horizon_feature ? Horizon{}.steps : 0;
}

TransmissionTimePredictor fit(const std::vector<TrainingExample>& examples,
                              PredictorVariant variant, const TrainingSettings& settings,
                              const std::optional<TransmissionTimePredictor>& warm_start,
                              TrainReport* report) {
  // The point variant is a way of using the full network, so it trains as one.
  const auto net_variant = variant == PredictorVariant::point ? PredictorVariant::full : variant;
  const std::size_t horizon = horizon_of(settings);
  const auto data = to_dataset(examples, net_variant, horizon);
  const auto init = nn::Mlp<double>::initialize(
      default_predictor_spec(net_variant, settings.train.seed, settings.horizon_feature));
  std::optional<nn::Mlp<double>> warm;
  if (warm_start) {
    if (warm_start->horizon_steps() != horizon)
      throw std::invalid_argument("warm-start model has a different horizon setting");
    warm = warm_start->net();
  }
  auto result = nn::train(init, data, settings.train, warm);
  if (report) {
    report->initial_loss = nn::mean_cross_entropy(warm ? *warm : init, data);
    report->final_loss = nn::mean_cross_entropy(result.net, data);
    report->warm_started = result.warm_started;
  }
  return TransmissionTimePredictor(variant, std::move(result.net), horizon);
}

}  // namespace

TrainedPredictor train_predictor(const Telemetry& telemetry, const TrainingSettings& settings,
                                 const std::optional<TransmissionTimePredictor>& warm_start) {
  const auto joined = join_transmission_times(telemetry.video_sent, telemetry.video_acked);
  TrainReport report;
  report.as_of_day = settings.as_of_day.value_or(newest_day(telemetry));
  report.never_acknowledged = joined.never_acknowledged;
  report.rejected = joined.rejected;
  const auto examples = training_examples(joined, settings, report.as_of_day);
  if (examples.empty()) throw std::invalid_argument("no training examples in the window");
  report.examples = examples.size();
  auto predictor = fit(examples, settings.variant, settings, warm_start, &report);
  return {std::move(predictor), report};
}

double time_bin_cross_entropy(const TransmissionTimePredictor& predictor,
                              const std::vector<TrainingExample>& examples, double epsilon) {
  if (examples.empty()) throw std::invalid_argument("no examples to score");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  double total = 0.0;
  for (const auto& ex : examples) {
    const double p = predictor.predict(ex.input, ex.step)[ex.target_bin];
    total -= std::log((1.0 - epsilon) * p + epsilon / static_cast<double>(kTimeBins));
  }
  return total / static_cast<double>(examples.size());
}

std::vector<AblationRow> run_ablation(const Telemetry& telemetry, const AblationOptions& options) {
  if (!(options.holdout > 0.0 && options.holdout < 1.0))
    throw std::invalid_argument("holdout fraction must be in (0, 1)");
  const auto joined = join_transmission_times(telemetry.video_sent, telemetry.video_acked);

  std::vector<std::uint64_t> streams;
  for (const auto& c : joined.chunks)
    if (streams.empty() || streams.back() != c.stream_id) streams.push_back(c.stream_id);
  if (streams.size() < 2) throw std::invalid_argument("ablation needs at least two streams");
  std::mt19937_64 rng(options.seed);
  std::shuffle(streams.begin(), streams.end(), rng);
  const auto n_held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(options.holdout * static_cast<double>(streams.size()))), 1,
      streams.size() - 1);
  const std::set<std::uint64_t> held(streams.begin(), streams.begin() + static_cast<long>(n_held));

  JoinResult train_part, test_part;
  for (const auto& c : joined.chunks) (held.contains(c.stream_id) ? test_part : train_part).chunks.push_back(c);

  const std::int64_t as_of = options.settings.as_of_day.value_or(newest_day(telemetry));
  const auto train_set = training_examples(train_part, options.settings, as_of);
  const auto test_set = training_examples(test_part, options.settings, as_of);
  if (train_set.empty() || test_set.empty())
    throw std::invalid_argument("ablation split left no training or held-out examples");

  auto settings = options.settings;
  settings.train.seed = options.seed;
  std::vector<AblationRow> rows;
  std::optional<TransmissionTimePredictor> full;
  for (auto v : {PredictorVariant::full, PredictorVariant::point, PredictorVariant::linear,
                 PredictorVariant::throughput}) {
    TransmissionTimePredictor predictor =
        v == PredictorVariant::point
            ? TransmissionTimePredictor(v, full->net(), full->horizon_steps())
            : fit(train_set, v, settings, std::nullopt, nullptr);
    if (v == PredictorVariant::full) full = predictor;
    rows.push_back({v, time_bin_cross_entropy(predictor, test_set, options.epsilon),
                    train_set.size(), test_set.size()});
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "variant" << std::right << std::setw(16) << "cross-entropy"
     << std::setw(10) << "train" << std::setw(10) << "held-out" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(12) << to_string(r.variant) << std::right << std::setw(16)
       << std::fixed << std::setprecision(6) << r.cross_entropy << std::setw(10) << r.train_examples
       << std::setw(10) << r.heldout_examples << '\n';
  return os.str();
}

}  // namespace fugu
