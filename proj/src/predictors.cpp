#include "fugu/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fugu {

std::size_t discretize(double t) {
  if (!(t >= 0.0)) throw std::domain_error("transmission time must be non-negative");
  if (t < kFirstBinUpper) return 0;
  if (t >= kLastBinLower) return kTimeBins - 1;
  const auto k = static_cast<std::size_t>(std::floor((t - kFirstBinUpper) / kBinWidth)) + 1;
  return std::min(k, kTimeBins - 2);
}

double bin_lower(std::size_t bin) {
  if (bin >= kTimeBins) throw std::out_of_range("time bin out of range");
  return bin == 0 ? 0.0 : kFirstBinUpper + kBinWidth * static_cast<double>(bin - 1);
}

double bin_upper(std::size_t bin) {
  if (bin >= kTimeBins) throw std::out_of_range("time bin out of range");
  if (bin + 1 == kTimeBins) return std::numeric_limits<double>::infinity();
  return kFirstBinUpper + kBinWidth * static_cast<double>(bin);
}

double bin_representative(std::size_t bin) {
  if (bin >= kTimeBins) throw std::out_of_range("time bin out of range");
  if (bin + 1 == kTimeBins) return kLastBinRepresentative;
  return 0.5 * (bin_lower(bin) + bin_upper(bin));
}

TransmissionDistribution TransmissionDistribution::from_probabilities(std::span<const double> p) {
  if (p.size() != kTimeBins)
    throw std::invalid_argument("distribution needs exactly 21 probabilities");
  TransmissionDistribution d;
  double total = 0.0;
  for (std::size_t i = 0; i < kTimeBins; ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i]))
      throw std::invalid_argument("probabilities must be finite and non-negative");
    d.p_[i] = p[i];
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("probabilities must sum to 1");
  return d;
}

TransmissionDistribution TransmissionDistribution::point_mass(std::size_t bin) {
  if (bin >= kTimeBins) throw std::out_of_range("time bin out of range");
  TransmissionDistribution d;
  d.p_.fill(0.0);
  d.p_[bin] = 1.0;
  return d;
}

TransmissionDistribution TransmissionDistribution::uniform() {
  TransmissionDistribution d;
  d.p_.fill(1.0 / static_cast<double>(kTimeBins));
  return d;
}

std::size_t TransmissionDistribution::argmax() const {
  // max_element returns the first maximum, i.e. the lowest bin on ties.
  return static_cast<std::size_t>(std::max_element(p_.begin(), p_.end()) - p_.begin());
}

std::size_t TransmissionDistribution::support_size() const {
  return static_cast<std::size_t>(std::count_if(p_.begin(), p_.end(), [](double x) { return x > 0.0; }));
}

void TransportStats::validate() const {
  if (cwnd < 0 || in_flight < 0 || min_rtt < 0 || srtt < 0 || delivery_rate < 0)
    throw std::invalid_argument("transport statistics must be non-negative");
  if (min_rtt > 0 && srtt > 0 && min_rtt > srtt)
    throw std::invalid_argument("min_rtt exceeds srtt");
}

TtpInput TtpInput::from_history(std::span<const ChunkRecord> history,
                                const TransportStats& stats, double candidate_size) {
  TtpInput in;
  in.stats = stats;
  in.candidate_size = candidate_size;
  const std::size_t n = std::min(history.size(), kHistoryLength);
  const std::size_t first_slot = kHistoryLength - n;
  const auto recent = history.subspan(history.size() - n);
  for (std::size_t i = 0; i < n; ++i) {
    in.past_sizes[first_slot + i] = recent[i].size;
    in.past_times[first_slot + i] = recent[i].transmission_time;
    in.valid[first_slot + i] = true;
  }
  return in;
}

namespace {

constexpr double kBytesToMb = 1e-6;
constexpr double kPacketsScale = 1e-3;

void fill_shared_features(const TtpInput& input, Eigen::VectorXd& x) {
  Eigen::Index k = 0;
  for (double s : input.past_sizes) x(k++) = s * kBytesToMb;
  for (double t : input.past_times) x(k++) = t;
  x(k++) = input.stats.cwnd * kPacketsScale;
  x(k++) = input.stats.in_flight * kPacketsScale;
  x(k++) = input.stats.min_rtt;
  x(k++) = input.stats.srtt;
  x(k++) = input.stats.delivery_rate * kBytesToMb;
}

// Log-spaced throughput centers.
constexpr double kMinRate = 0.05e6;
constexpr double kMaxRate = 50e6;

double log_step() {
  return std::log(kMaxRate / kMinRate) / static_cast<double>(kThroughputBins - 1);
}

}  // namespace

Eigen::VectorXd throughput_features(const TtpInput& input) {
  Eigen::VectorXd x(kThroughputInputDim);
  fill_shared_features(input, x);
  return x;
}

Eigen::VectorXd ttp_features(const TtpInput& input) {
  Eigen::VectorXd x(kTtpInputDim);
  fill_shared_features(input, x);
  x(kTtpInputDim - 1) = input.candidate_size * kBytesToMb;
  return x;
}

Eigen::VectorXd build_ttp_input(std::span<const ChunkRecord> history,
                                const TransportStats& stats, double candidate_size) {
  return ttp_features(TtpInput::from_history(history, stats, candidate_size));
}

Eigen::VectorXd with_horizon_feature(const Eigen::VectorXd& features, std::size_t step,
                                     std::size_t horizon) {
  if (horizon == 0 || step >= horizon) throw std::out_of_range("horizon step out of range");
  Eigen::VectorXd x(features.size() + 1);
  x.head(features.size()) = features;
  x(features.size()) = static_cast<double>(step) / static_cast<double>(horizon);
  return x;
}

namespace {

TransmissionDistribution distribution_from_logits(const Eigen::VectorXd& logits) {
  if (logits.size() != static_cast<Eigen::Index>(kTimeBins))
    throw std::invalid_argument("predictor network must have 21 outputs");
  const Eigen::VectorXd p = nn::softmax(logits);
  return TransmissionDistribution::from_probabilities(std::span<const double>(p.data(), kTimeBins));
}

}  // namespace

TransmissionDistribution ttp_predict(const nn::Mlp<double>& net, const TtpInput& input) {
  return distribution_from_logits(nn::forward(net, ttp_features(input)));
}

double ttp_point_predict(const nn::Mlp<double>& net, const TtpInput& input) {
  return bin_representative(ttp_predict(net, input).argmax());
}

double throughput_representative(std::size_t bin) {
  if (bin >= kThroughputBins) throw std::out_of_range("throughput bin out of range");
  return kMinRate * std::exp(log_step() * static_cast<double>(bin));
}

std::size_t discretize_throughput(double bytes_per_second) {
  if (!(bytes_per_second > 0.0)) return 0;
  const double pos = std::log(bytes_per_second / kMinRate) / log_step();
  const double k = std::round(pos);
  if (k <= 0.0) return 0;
  if (k >= static_cast<double>(kThroughputBins - 1)) return kThroughputBins - 1;
  return static_cast<std::size_t>(k);
}

double throughput_time(double size, double bytes_per_second) {
  if (!(bytes_per_second > 0.0)) throw std::domain_error("throughput must be positive");
  return size / bytes_per_second;
}

TransmissionDistribution time_distribution_from_throughput(std::span<const double> rate_probs,
                                                           double size) {
  if (rate_probs.size() != kThroughputBins)
    throw std::invalid_argument("throughput distribution needs 21 probabilities");
  std::array<double, kTimeBins> p{};
  for (std::size_t k = 0; k < kThroughputBins; ++k)
    p[discretize(throughput_time(size, throughput_representative(k)))] += rate_probs[k];
  return TransmissionDistribution::from_probabilities(p);
}

std::vector<double> throughput_distribution(const nn::Mlp<double>& net, const TtpInput& input) {
  const Eigen::VectorXd p = nn::softmax(nn::forward(net, throughput_features(input)));
  if (p.size() != static_cast<Eigen::Index>(kThroughputBins))
    throw std::invalid_argument("throughput network must have 21 outputs");
  return {p.data(), p.data() + p.size()};
}

TransmissionDistribution throughput_only_predict(const nn::Mlp<double>& net,
                                                 const TtpInput& input, double size) {
  return time_distribution_from_throughput(throughput_distribution(net, input), size);
}

void ThroughputHistory::push(double bytes_per_second) {
  if (!(bytes_per_second > 0.0) || !std::isfinite(bytes_per_second))
    throw std::invalid_argument("throughput samples must be positive");
  samples_.push_back(bytes_per_second);
  while (samples_.size() > window_) samples_.pop_front();
}

double hm_predict(const ThroughputHistory& history) {
  if (history.empty()) throw std::invalid_argument("harmonic mean of an empty history");
  double inv = 0.0;
  for (double x : history.samples()) inv += 1.0 / x;
  return static_cast<double>(history.size()) / inv;
}

std::string_view to_string(PredictorVariant v) {
  switch (v) {
    case PredictorVariant::full: return "full";
    case PredictorVariant::point: return "point";
    case PredictorVariant::throughput: return "throughput";
    case PredictorVariant::linear: return "linear";
  }
  return "unknown";
}

PredictorVariant predictor_variant_from_string(std::string_view s) {
  if (s == "full") return PredictorVariant::full;
  if (s == "point") return PredictorVariant::point;
  if (s == "throughput") return PredictorVariant::throughput;
  if (s == "linear") return PredictorVariant::linear;
  throw std::invalid_argument("unknown predictor variant '" + std::string(s) + "'");
}

nn::MlpSpec default_predictor_spec(PredictorVariant variant, std::uint64_t seed,
                                   bool horizon_feature) {
  nn::MlpSpec spec;
  spec.seed = seed;
  spec.output_dim = static_cast<Eigen::Index>(kTimeBins);
  spec.hidden_layers = {64, 64};
  spec.input_dim = kTtpInputDim;
  if (variant == PredictorVariant::linear) spec.hidden_layers.clear();
  if (variant == PredictorVariant::throughput) {
    spec.input_dim = kThroughputInputDim;
    spec.output_dim = static_cast<Eigen::Index>(kThroughputBins);
  }
  if (horizon_feature) spec.input_dim += 1;
  return spec;
}

TransmissionTimePredictor::TransmissionTimePredictor(PredictorVariant variant, nn::Mlp<double> net,
                                                     std::size_t horizon_steps)
    : variant_(variant), net_(std::move(net)), horizon_steps_(horizon_steps) {
  const Eigen::Index base =
      variant_ == PredictorVariant::throughput ? kThroughputInputDim : kTtpInputDim;
  const Eigen::Index expected = base + (horizon_steps_ > 0 ? 1 : 0);
  if (net_.input_dim() != expected)
    throw std::invalid_argument("predictor network has input_dim " +
                                std::to_string(net_.input_dim()) + ", expected " +
                                std::to_string(expected));
  if (net_.output_dim() != static_cast<Eigen::Index>(kTimeBins))
    throw std::invalid_argument("predictor network must have 21 outputs");
}

std::vector<TransmissionDistribution> TransmissionTimePredictor::predict_sizes(
    const TtpInput& base, std::span<const double> sizes, std::size_t step) const {
  std::vector<TransmissionDistribution> out;
  out.reserve(sizes.size());
  const bool has_step = horizon_steps_ > 0;
  const std::size_t clamped_step = has_step ? std::min(step, horizon_steps_ - 1) : 0;

  if (variant_ == PredictorVariant::throughput) {
    Eigen::VectorXd x = throughput_features(base);
    if (has_step) x = with_horizon_feature(x, clamped_step, horizon_steps_);
    const Eigen::VectorXd p = nn::softmax(nn::forward(net_, x));
    for (double s : sizes)
      out.push_back(time_distribution_from_throughput(
          std::span<const double>(p.data(), kThroughputBins), s));
    return out;
  }

  Eigen::MatrixXd batch(net_.input_dim(), static_cast<Eigen::Index>(sizes.size()));
  TtpInput in = base;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    in.candidate_size = sizes[i];
    Eigen::VectorXd x = ttp_features(in);
    if (has_step) x = with_horizon_feature(x, clamped_step, horizon_steps_);
    batch.col(static_cast<Eigen::Index>(i)) = x;
  }
  const Eigen::MatrixXd logits = nn::forward_batch(net_, batch);
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    auto d = distribution_from_logits(logits.col(c));
    if (variant_ == PredictorVariant::point) d = TransmissionDistribution::point_mass(d.argmax());
    out.push_back(d);
  }
  return out;
}

TransmissionDistribution TransmissionTimePredictor::predict(const TtpInput& input,
                                                            std::size_t step) const {
  const double size = input.candidate_size;
  return predict_sizes(input, std::span<const double>(&size, 1), step).front();
}

void TransmissionTimePredictor::write(std::ostream& os) const {
  os << "fugu-predictor 1\n";
  os << "variant " << to_string(variant_) << '\n';
  os << "horizon " << horizon_steps_ << '\n';
  nn::write_mlp(os, net_);
}

TransmissionTimePredictor TransmissionTimePredictor::read(std::istream& is) {
  nn::detail::expect_key(is, "fugu-predictor");
  const int version = nn::detail::read_value<int>(is, "predictor format version");
  if (version != 1) throw std::runtime_error("unsupported predictor format version");
  nn::detail::expect_key(is, "variant");
  const auto variant = predictor_variant_from_string(nn::detail::read_value<std::string>(is, "variant"));
  nn::detail::expect_key(is, "horizon");
  const auto horizon = nn::detail::read_value<std::size_t>(is, "horizon");
  return TransmissionTimePredictor(variant, nn::read_mlp<double>(is), horizon);
}

TransmissionTimePredictor load_predictor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  return TransmissionTimePredictor::read(in);
}

void save_predictor(const TransmissionTimePredictor& predictor, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  predictor.write(out);
  if (!out) throw std::runtime_error("failed writing model file " + path);
}

}  // namespace fugu
