#ifndef FUGU_DATA_HPP
#define FUGU_DATA_HPP

// Telemetry archives in the open-data layout: one CSV per measurement type
// (video_sent, video_acked, client_buffer), a header line naming the fields,
// floats written in shortest round-trip form. video_ts is the chunk's
// presentation timestamp in 90 kHz ticks and joins sent rows to acked rows.

#include "fugu/nn.hpp"
#include "fugu/predictors.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fugu {

inline constexpr std::int64_t kVideoTsPerSecond = 90000;
inline constexpr double kSecondsPerDay = 86400.0;

struct VideoSentRow {
  double time = 0.0;  // epoch seconds when the chunk is sent
  std::uint64_t stream_id = 0;
  std::int64_t expt_id = 0;
  std::int64_t video_ts = 0;
  std::int64_t size = 0;  // bytes
  double ssim_index = 0.0;
  double cwnd = 0.0;       // packets
  double in_flight = 0.0;  // packets
  double min_rtt = 0.0;    // seconds
  double rtt = 0.0;        // smoothed RTT, seconds
  double delivery_rate = 0.0;  // bytes/second

  friend bool operator==(const VideoSentRow&, const VideoSentRow&) = default;
};

struct VideoAckedRow {
  double time = 0.0;
  std::uint64_t stream_id = 0;
  std::int64_t expt_id = 0;
  std::int64_t video_ts = 0;

  friend bool operator==(const VideoAckedRow&, const VideoAckedRow&) = default;
};

enum class BufferEvent { periodic, startup, play, rebuffer };

std::string_view to_string(BufferEvent e);
BufferEvent buffer_event_from_string(std::string_view s);

struct ClientBufferRow {
  double time = 0.0;
  std::uint64_t stream_id = 0;
  std::int64_t expt_id = 0;
  BufferEvent event = BufferEvent::periodic;
  double buffer = 0.0;     // seconds
  double cum_rebuf = 0.0;  // seconds stalled so far in this stream

  friend bool operator==(const ClientBufferRow&, const ClientBufferRow&) = default;
};

struct Telemetry {
  std::vector<VideoSentRow> video_sent;
  std::vector<VideoAckedRow> video_acked;
  std::vector<ClientBufferRow> client_buffer;

  void append(const Telemetry& other);
  [[nodiscard]] bool empty() const {
    return video_sent.empty() && video_acked.empty() && client_buffer.empty();
  }
  friend bool operator==(const Telemetry&, const Telemetry&) = default;
};

struct ParseReport {
  std::size_t rows = 0;
  std::size_t malformed = 0;
  std::vector<std::string> messages;  // "<file>:<line>: <reason>"

  void merge(const ParseReport& other);
};

struct ParsedArchive {
  Telemetry telemetry;
  ParseReport report;
};

inline constexpr std::string_view kVideoSentFile = "video_sent.csv";
inline constexpr std::string_view kVideoAckedFile = "video_acked.csv";
inline constexpr std::string_view kClientBufferFile = "client_buffer.csv";

std::string format_video_sent(const std::vector<VideoSentRow>& rows);
std::string format_video_acked(const std::vector<VideoAckedRow>& rows);
std::string format_client_buffer(const std::vector<ClientBufferRow>& rows);

/// Parsers skip and count malformed rows; `source` labels report messages.
std::vector<VideoSentRow> parse_video_sent(std::string_view text, ParseReport& report,
                                           std::string_view source = "video_sent");
std::vector<VideoAckedRow> parse_video_acked(std::string_view text, ParseReport& report,
                                             std::string_view source = "video_acked");
std::vector<ClientBufferRow> parse_client_buffer(std::string_view text, ParseReport& report,
                                                 std::string_view source = "client_buffer");

/// Writes the three CSV files into `dir` (created if needed).
void emit_archive(const Telemetry& telemetry, const std::filesystem::path& dir);

/// Reads the three CSV files from `dir`. Throws std::runtime_error if a file
/// cannot be read.
ParsedArchive parse_archive(const std::filesystem::path& dir);

/// Merges several archives in the given order.
ParsedArchive parse_archives(const std::vector<std::filesystem::path>& dirs);

struct JoinedChunk {
  std::uint64_t stream_id = 0;
  std::int64_t expt_id = 0;
  std::int64_t video_ts = 0;
  double sent_time = 0.0;
  double transmission_time = 0.0;
  std::int64_t size = 0;
  double ssim_index = 0.0;
  TransportStats stats;
};

struct JoinResult {
  std::vector<JoinedChunk> chunks;  // ordered by (stream_id, video_ts)
  std::size_t never_acknowledged = 0;
  std::size_t rejected = 0;  // acked at or before send time
};

/// Matches sent and acked rows on (stream_id, video_ts). Duplicate keys in
/// either table throw std::invalid_argument.
JoinResult join_transmission_times(const std::vector<VideoSentRow>& sent,
                                   const std::vector<VideoAckedRow>& acked);

/// Day index of an epoch timestamp.
std::int64_t epoch_day(double epoch_seconds);

struct TrainingSetOptions {
  std::int64_t as_of_day = 0;
  std::int64_t window_days = 14;
  double decay = 0.9;  // weight = decay^day_age
  // Planning-step examples per chunk; 0 builds single-step examples without
  // a step feature.
  std::size_t horizon_steps = 0;
};

struct TrainingExample {
  TtpInput input;
  std::size_t target_bin = 0;
  double weight = 1.0;
  std::int64_t day_age = 0;
  double transmission_time = 0.0;
  std::size_t step = 0;
};

/// One example per acknowledged chunk sent within the window, with the
/// stream's prior eight chunks as history. With horizon_steps = H, chunk j
/// yields H examples predicting chunk j+k from the history before j.
std::vector<TrainingExample> build_training_set(const JoinResult& joined,
                                                const TrainingSetOptions& options);

/// Network-ready dataset for a predictor variant.
nn::Dataset<double> to_dataset(const std::vector<TrainingExample>& examples,
                               PredictorVariant variant, std::size_t horizon_steps = 0);

}  // namespace fugu

#endif  // FUGU_DATA_HPP
