#ifndef FUGU_PREDICTORS_HPP
#define FUGU_PREDICTORS_HPP

#include "fugu/nn.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <deque>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fugu {

// Transmission-time bins: [0, 0.25), [0.25, 0.75), ..., [9.25, 9.75), [9.75, inf).
inline constexpr std::size_t kTimeBins = 21;
inline constexpr double kFirstBinUpper = 0.25;
inline constexpr double kBinWidth = 0.5;
inline constexpr double kLastBinLower = 9.75;
inline constexpr double kLastBinRepresentative = 10.0;

inline constexpr std::size_t kHistoryLength = 8;
inline constexpr Eigen::Index kTransportFeatures = 5;
inline constexpr Eigen::Index kTtpInputDim = 2 * kHistoryLength + kTransportFeatures + 1;  // 22
inline constexpr Eigen::Index kThroughputInputDim = kTtpInputDim - 1;               // 21
inline constexpr std::size_t kDefaultHmWindow = 5;

/// Bin index of a transmission time. Throws std::domain_error for t < 0.
std::size_t discretize(double t);

/// Midpoint of a bin; 10 s for the unbounded last bin.
double bin_representative(std::size_t bin);
double bin_lower(std::size_t bin);
double bin_upper(std::size_t bin);  // +inf for the last bin

class TransmissionDistribution {
 public:
  using Probabilities = std::array<double, kTimeBins>;

  TransmissionDistribution() = default;  // all mass on bin 0

  /// Validates non-negativity and a total within 1e-9 of one.
  static TransmissionDistribution from_probabilities(std::span<const double> p);
  static TransmissionDistribution point_mass(std::size_t bin);
  static TransmissionDistribution uniform();

  [[nodiscard]] double operator[](std::size_t bin) const { return p_.at(bin); }
  [[nodiscard]] const Probabilities& probabilities() const { return p_; }
  /// Most likely bin, lowest index on ties.
  [[nodiscard]] std::size_t argmax() const;
  [[nodiscard]] std::size_t support_size() const;

 private:
  Probabilities p_{1.0};
};

struct TransportStats {
  double cwnd = 0.0;       // packets
  double in_flight = 0.0;  // packets
  double min_rtt = 0.0;    // seconds
  double srtt = 0.0;       // seconds
  double delivery_rate = 0.0;  // bytes/second

  void validate() const;
  friend bool operator==(const TransportStats&, const TransportStats&) = default;
};

/// A completed past chunk as seen by the predictor.
struct ChunkRecord {
  double size = 0.0;               // bytes
  double transmission_time = 0.0;  // seconds
};

/// Raw predictor input. History slots run oldest to newest; when fewer than
/// eight chunks exist the oldest slots are zero and marked invalid.
struct TtpInput {
  std::array<double, kHistoryLength> past_sizes{};
  std::array<double, kHistoryLength> past_times{};
  std::array<bool, kHistoryLength> valid{};
  TransportStats stats;
  double candidate_size = 0.0;

  /// Uses the most recent kHistoryLength records of `history`.
  static TtpInput from_history(std::span<const ChunkRecord> history,
                               const TransportStats& stats, double candidate_size);
};

/// Scaled feature vector of length 22: 8 sizes (MB), 8 times (s),
/// cwnd and in_flight (thousands of packets), min_rtt and srtt (s),
/// delivery rate (MB/s), candidate size (MB).
Eigen::VectorXd ttp_features(const TtpInput& input);
/// The first 21 coordinates of ttp_features (no candidate size).
Eigen::VectorXd throughput_features(const TtpInput& input);
Eigen::VectorXd build_ttp_input(std::span<const ChunkRecord> history,
                                const TransportStats& stats, double candidate_size);

/// Distribution over transmission-time bins from a 22- (or 23-, with a
/// horizon feature) input network.
TransmissionDistribution ttp_predict(const nn::Mlp<double>& net, const TtpInput& input);

/// Representative time of the most likely bin.
double ttp_point_predict(const nn::Mlp<double>& net, const TtpInput& input);

// Throughput bins for the throughput-only ablation: 21 geometric centers from
// 0.05 MB/s to 50 MB/s, boundaries at geometric midpoints.
inline constexpr std::size_t kThroughputBins = 21;
double throughput_representative(std::size_t bin);  // bytes/second
std::size_t discretize_throughput(double bytes_per_second);

/// Time to send `size` bytes at `bytes_per_second`.
double throughput_time(double size, double bytes_per_second);

/// Pushes a throughput distribution through t = size / rate onto time bins.
TransmissionDistribution time_distribution_from_throughput(std::span<const double> rate_probs,
                                                           double size);

/// Predicted throughput distribution from a 21-input network (the candidate
/// size is not a feature).
std::vector<double> throughput_distribution(const nn::Mlp<double>& net, const TtpInput& input);

/// Throughput-only prediction of the time to send `size` bytes.
TransmissionDistribution throughput_only_predict(const nn::Mlp<double>& net,
                                                 const TtpInput& input, double size);

/// Last few per-chunk throughput samples.
class ThroughputHistory {
 public:
  explicit ThroughputHistory(std::size_t window = kDefaultHmWindow) : window_(window) {}

  void push(double bytes_per_second);
  [[nodiscard]] bool empty() const { return samples_.empty(); }
  [[nodiscard]] std::size_t size() const { return samples_.size(); }
  [[nodiscard]] const std::deque<double>& samples() const { return samples_; }

 private:
  std::size_t window_;
  std::deque<double> samples_;
};

/// Harmonic mean of the available samples.
double hm_predict(const ThroughputHistory& history);

enum class PredictorVariant { full, point, throughput, linear };

std::string_view to_string(PredictorVariant v);
PredictorVariant predictor_variant_from_string(std::string_view s);

/// Default network shape for each variant. `horizon_feature` adds the
/// planning step as one extra input.
nn::MlpSpec default_predictor_spec(PredictorVariant variant, std::uint64_t seed,
                                   bool horizon_feature = false);

/// A trained predictor of any variant.
class TransmissionTimePredictor {
 public:
  TransmissionTimePredictor(PredictorVariant variant, nn::Mlp<double> net,
                            std::size_t horizon_steps = 0);

  [[nodiscard]] PredictorVariant variant() const { return variant_; }
  [[nodiscard]] const nn::Mlp<double>& net() const { return net_; }
  /// Planning horizon of the step feature; 0 when the net has none.
  [[nodiscard]] std::size_t horizon_steps() const { return horizon_steps_; }

  [[nodiscard]] TransmissionDistribution predict(const TtpInput& input,
                                                 std::size_t step = 0) const;

  /// Distributions for several candidate sizes sharing one history, in one
  /// batched forward pass.
  [[nodiscard]] std::vector<TransmissionDistribution> predict_sizes(
      const TtpInput& base, std::span<const double> sizes, std::size_t step = 0) const;

  /// Serialized as "fugu-predictor 1", "variant <name>", "horizon <H>",
  /// followed by the network in the nn text format.
  void write(std::ostream& os) const;
  static TransmissionTimePredictor read(std::istream& is);

  friend bool operator==(const TransmissionTimePredictor&,
                         const TransmissionTimePredictor&) = default;

 private:
  PredictorVariant variant_;
  nn::Mlp<double> net_;
  std::size_t horizon_steps_;
};

/// Appends the scaled planning-step feature step / horizon.
Eigen::VectorXd with_horizon_feature(const Eigen::VectorXd& features, std::size_t step,
                                     std::size_t horizon);

TransmissionTimePredictor load_predictor(const std::string& path);
void save_predictor(const TransmissionTimePredictor& predictor, const std::string& path);

}  // namespace fugu

#endif  // FUGU_PREDICTORS_HPP
