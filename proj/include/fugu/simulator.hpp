#ifndef FUGU_SIMULATOR_HPP
#define FUGU_SIMULATOR_HPP

// Trace-driven streaming simulator. The network is a fluid-flow link whose
// capacity follows a piecewise-constant trace; the session loop fetches one
// chunk at a time, playing while it downloads.

#include "fugu/control.hpp"
#include "fugu/data.hpp"
#include "fugu/domain.hpp"
#include "fugu/predictors.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fugu {

inline constexpr double kDefaultBaseDelay = 0.040;    // seconds
inline constexpr double kPacketBytes = 1500.0;
inline constexpr double kNeverDeliveredStall = 20.0;  // seconds charged on abort

struct TraceBreakpoint {
  double time = 0.0;      // seconds from trace start
  double capacity = 0.0;  // bytes/second from `time` to the next breakpoint
};

struct NetworkTrace {
  std::vector<TraceBreakpoint> points;
  double base_delay = kDefaultBaseDelay;

  /// Throws unless the first time is 0, times strictly increase, and
  /// capacities are non-negative.
  void validate() const;
  [[nodiscard]] double capacity_at(double t) const;
  [[nodiscard]] double duration() const { return points.back().time; }
};

/// Parses "time_s,bytes_per_s" lines; '#' starts a comment. Errors carry the
/// line number.
NetworkTrace load_trace(std::string_view text, double base_delay = kDefaultBaseDelay);
NetworkTrace load_trace_file(const std::filesystem::path& path,
                             double base_delay = kDefaultBaseDelay);
std::string format_trace(const NetworkTrace& trace);

/// Time for `size` bytes sent at `start` to arrive: the base delay, then the
/// time for the capacity integral from start + base_delay to reach `size`.
/// The last capacity holds forever. Empty when the bytes never arrive.
std::optional<double> transmit(double size, const NetworkTrace& trace, double start);

struct TraceGenConfig {
  double duration = 3600.0;       // seconds
  double step = 1.0;              // seconds between breakpoints
  double median_capacity = 0.6e6; // bytes/second, median across traces
  double trace_sigma = 0.6;       // log-sd of the per-trace mean
  double regime_mean = 20.0;      // mean seconds between regime changes
  double regime_sigma = 0.5;      // log-sd of regime levels around the mean
  double noise_sigma = 0.3;       // log-sd of per-step noise
  double base_delay = kDefaultBaseDelay;
};

/// Regime-switching log-normal capacity trace.
NetworkTrace synth_trace(const TraceGenConfig& config, std::uint64_t seed);

struct VideoSpec {
  double chunk_duration = kDefaultChunkDuration;
  std::vector<Chunk> chunks;

  void validate() const;
  [[nodiscard]] std::size_t version_count() const { return chunks.front().versions.size(); }
};

/// Video spec text: "chunks <N> duration <seconds> versions <V>", then one
/// line per chunk of V "size_bytes:ssim_db" pairs separated by spaces.
VideoSpec load_video_spec(std::string_view text);
VideoSpec load_video_spec_file(const std::filesystem::path& path);
std::string format_video_spec(const VideoSpec& video);

struct VideoGenConfig {
  std::size_t chunks = 900;
  double chunk_duration = kDefaultChunkDuration;
  std::vector<double> bitrates_mbps{0.3, 0.6, 1.0, 1.6, 2.5, 4.0};
  double jitter = 0.3;         // per-chunk size factor in [1 - jitter, 1 + jitter]
  double ssim_db_at_1mbps = 13.0;
  double ssim_db_per_log_rate = 3.3;
  double ssim_noise_db = 0.3;
};

/// VBR-like video: every version of a chunk shares one size factor, and
/// quality grows with the log of the chunk's bitrate.
VideoSpec synth_video(const VideoGenConfig& config, std::uint64_t seed);

/// Transport statistics derived from the last delivery.
TransportStats synth_transport_stats(std::optional<ChunkRecord> last_delivery,
                                     double base_delay);

enum class SchemeKind { fugu, fugu_point, fugu_throughput, fugu_linear, mpc_hm, robust_mpc_hm, bba };

std::string_view to_string(SchemeKind k);
SchemeKind scheme_kind_from_string(std::string_view s);
bool scheme_needs_predictor(SchemeKind k);

/// What a scheme sees when choosing the next chunk.
struct DecisionContext {
  std::span<const Chunk> upcoming;  // next chunk first
  PlaybackState state;
  TransportStats stats;
  std::span<const ChunkRecord> history;  // delivered chunks, oldest first
  const QoeWeights* weights = nullptr;
  const Horizon* horizon = nullptr;
};

class AbrScheme {
 public:
  virtual ~AbrScheme() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  virtual std::size_t select(const DecisionContext& ctx) = 0;
  virtual void on_delivered(const ChunkRecord& /*chunk*/) {}
};

struct SchemeSpec {
  std::string name;
  SchemeKind kind = SchemeKind::mpc_hm;
  std::shared_ptr<const TransmissionTimePredictor> predictor;  // Fugu variants only
};

/// A fresh scheme instance (schemes carry per-session state).
std::unique_ptr<AbrScheme> make_scheme(const SchemeSpec& spec, const BbaConfig& bba = {});

struct SessionConfig {
  double max_buffer = kDefaultMaxBuffer;
  double watch_duration = 300.0;  // seconds of video the viewer wants
  double trace_offset = 0.0;      // where in the trace the session starts
  double start_epoch = 0.0;       // epoch seconds of the first request
  std::uint64_t stream_id = 0;
  std::int64_t expt_id = 0;
  QoeWeights weights;
  Horizon horizon;

  void validate() const;
};

struct ChunkOutcome {
  std::size_t index = 0;
  std::size_t version = 0;
  double quality = 0.0;  // SSIM-dB
  std::int64_t size = 0;
  double send_time = 0.0;  // seconds since session start
  double transmission_time = 0.0;
  double buffer_before = 0.0;
  double buffer_after = 0.0;
  double stall = 0.0;
  double duration = 0.0;
};

/// Session outcome. All clock quantities are kept in integer microseconds so
/// that wall = startup + played + stalled holds exactly.
struct SessionResult {
  std::vector<ChunkOutcome> chunks;
  std::int64_t wall_us = 0;
  std::int64_t startup_us = 0;
  std::int64_t played_us = 0;
  std::int64_t stall_us = 0;
  bool aborted = false;
  std::string abort_reason;

  [[nodiscard]] double startup_time() const { return static_cast<double>(startup_us) * 1e-6; }
  [[nodiscard]] double stall_time() const { return static_cast<double>(stall_us) * 1e-6; }
  [[nodiscard]] double played_time() const { return static_cast<double>(played_us) * 1e-6; }
  [[nodiscard]] double wall_time() const { return static_cast<double>(wall_us) * 1e-6; }
  /// Time from playback start to the end of the session.
  [[nodiscard]] double watch_time() const { return played_time() + stall_time(); }
  [[nodiscard]] bool accounting_holds() const {
    return wall_us == startup_us + played_us + stall_us;
  }
};

struct SessionOutcome {
  SessionResult result;
  Telemetry telemetry;
};

SessionOutcome run_session(const SessionConfig& config, const NetworkTrace& trace,
                           const VideoSpec& video, AbrScheme& scheme);

struct WatchDurationModel {
  double median = 300.0;  // seconds
  double sigma = 1.0;     // log-normal shape
};

struct ExperimentSpec {
  std::vector<SchemeSpec> schemes;
  std::vector<NetworkTrace> traces;
  std::vector<VideoSpec> videos;
  std::size_t sessions_per_arm = 1;
  std::uint64_t seed = 0;
  WatchDurationModel watch;
  double epoch_start = 1.6e9;  // seconds; day 0 begins at epoch_day(epoch_start)
  std::int64_t days = 1;       // sessions spread uniformly over this many days
  std::uint64_t first_stream_id = 1;
  QoeWeights weights;
  Horizon horizon;
  BbaConfig bba;
};

struct SessionAssignment {
  std::uint64_t stream_id = 0;
  std::size_t scheme = 0;  // index into ExperimentSpec::schemes
  std::size_t trace = 0;
  std::size_t video = 0;
  double watch_duration = 0.0;
  double trace_offset = 0.0;
  double start_epoch = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

struct ExperimentResult {
  std::vector<SessionAssignment> assignments;  // ordered by stream_id
  std::vector<SessionOutcome> sessions;        // parallel to assignments

  /// Merged telemetry of one arm, in stream_id order.
  [[nodiscard]] Telemetry arm_telemetry(std::size_t scheme) const;
};

/// Draws a pool of sessions_per_arm * schemes (trace, video, duration, start)
/// tuples from the seed, shuffles it, and deals consecutive blocks to schemes.
std::vector<SessionAssignment> draw_assignments(const ExperimentSpec& spec);

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Writes <dir>/<scheme name>/ archives and <dir>/assignments.csv.
void write_experiment(const ExperimentSpec& spec, const ExperimentResult& result,
                      const std::filesystem::path& dir);

std::string format_assignment_log(const ExperimentSpec& spec,
                                  const std::vector<SessionAssignment>& assignments);

}  // namespace fugu

#endif  // FUGU_SIMULATOR_HPP
