#ifndef FUGU_STATS_HPP
#define FUGU_STATS_HPP

#include "fugu/data.hpp"
#include "fugu/simulator.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fugu {

inline constexpr double kMinEligiblePlayTime = 4.0;  // seconds

struct StreamSummary {
  std::uint64_t stream_id = 0;
  double watch_time = 0.0;    // playback start to end of session
  double stall_time = 0.0;
  double startup_time = 0.0;
  double played_time = 0.0;
  std::optional<double> mean_ssim_db;  // weighted by chunk play duration
  double ssim_variation_db = 0.0;      // mean |dQ| between consecutive chunks
  bool eligible = false;               // played at least 4 s
};

StreamSummary summarize_stream(const SessionResult& result, std::uint64_t stream_id = 0);

/// One summary per stream in the telemetry, ordered by stream_id. Throws
/// std::invalid_argument if a stream's cum_rebuf ever decreases.
std::vector<StreamSummary> summarize_telemetry(const Telemetry& telemetry);

/// Pooled stall time over pooled watch time of eligible streams.
double aggregate_stall_ratio(std::span<const StreamSummary> summaries);

struct SsimAggregate {
  double mean_db = 0.0;
  std::optional<double> standard_error;  // needs two or more streams
};

/// Watch-time-weighted mean SSIM and its weighted standard error
/// sqrt(sum w (x - m)^2 / sum w / (n_eff - 1)), n_eff = (sum w)^2 / sum w^2.
SsimAggregate aggregate_ssim(std::span<const StreamSummary> summaries);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] bool contains(double x) const { return lower <= x && x <= upper; }
  [[nodiscard]] double width() const { return upper - lower; }
  [[nodiscard]] bool overlaps(const Interval& o) const {
    return lower <= o.upper && o.lower <= upper;
  }
};

struct BootstrapOptions {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t strata = 10;  // watch-duration quantile groups
};

/// Stratified percentile bootstrap of the pooled stall ratio. Streams are
/// grouped by watch-time decile; each resample redraws every group with
/// replacement at its own size.
Interval bootstrap_stall_ci(std::span<const StreamSummary> summaries,
                            const BootstrapOptions& options = {});

struct SchemeReport {
  std::string scheme;
  double stall_ratio = 0.0;
  Interval stall_ci;
  double mean_ssim_db = 0.0;
  Interval ssim_ci;
  double ssim_variation_db = 0.0;
  std::size_t streams = 0;
  double total_watch_time = 0.0;
};

SchemeReport make_scheme_report(std::string scheme, std::span<const StreamSummary> summaries,
                                const BootstrapOptions& options = {});

struct Comparison {
  std::vector<SchemeReport> reports;
  // Pairs of report indices whose stall-ratio intervals do not overlap.
  std::vector<std::pair<std::size_t, std::size_t>> distinguishable;
};

Comparison compare_schemes(std::vector<SchemeReport> reports);

/// Aligned plain-text table.
std::string format_table(const Comparison& comparison);
/// Comma-separated variant of the table.
std::string format_table_csv(const Comparison& comparison);

/// Plot data: header then one row per scheme
/// "name,stall,stall_lo,stall_hi,ssim,ssim_lo,ssim_hi".
/// Stall values are percentages of time stalled.
std::string format_plot_data(const std::vector<SchemeReport>& reports);

struct PlotRow {
  std::string name;
  double stall = 0, stall_lo = 0, stall_hi = 0;
  double ssim = 0, ssim_lo = 0, ssim_hi = 0;
  friend bool operator==(const PlotRow&, const PlotRow&) = default;
};
std::vector<PlotRow> parse_plot_data(std::string_view text);

/// Reads the comma-separated table back into reports.
std::vector<SchemeReport> parse_table_csv(std::string_view text);

}  // namespace fugu

#endif  // FUGU_STATS_HPP
