#ifndef FUGU_DOMAIN_HPP
#define FUGU_DOMAIN_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace fugu {

inline constexpr double kDefaultChunkDuration = 2.002;  // seconds
inline constexpr double kMaxSsimDb = 60.0;
inline constexpr double kDefaultMaxBuffer = 15.0;  // seconds

/// One encoded version of a chunk. Quality is SSIM in dB.
struct ChunkVersion {
  std::int64_t size = 1;  // bytes
  double quality = 0.0;   // SSIM-dB
  double duration = kDefaultChunkDuration;

  /// Throws std::invalid_argument if size or duration is not positive or
  /// quality is not finite.
  void validate() const;
};

/// All versions of one chunk, ordered by strictly increasing size.
struct Chunk {
  std::size_t index = 0;
  std::vector<ChunkVersion> versions;

  void validate() const;

  [[nodiscard]] std::size_t smallest() const { return 0; }
  [[nodiscard]] std::size_t largest() const { return versions.size() - 1; }
};

/// Weights of the per-chunk QoE: quality - lambda*|dQ| - mu*stall.
struct QoeWeights {
  double lambda = 1.0;
  double mu = 100.0;
  double max_buffer = kDefaultMaxBuffer;

  void validate() const;
};

struct PlaybackState {
  double buffer = 0.0;  // seconds of video buffered
  // Quality of the previously played chunk; empty before the first chunk,
  // in which case the variation term is zero.
  std::optional<double> last_quality;
  bool playing = false;
  double cumulative_stall = 0.0;
};

struct BufferStep {
  double new_buffer = 0.0;
  double stall = 0.0;
};

/// -10*log10(1 - ssim), clamped to kMaxSsimDb near 1.
/// Throws std::domain_error outside [0, 1].
double ssim_to_db(double ssim_index);

/// Inverse of ssim_to_db on [0, kMaxSsimDb].
double db_to_ssim(double ssim_db);

/// QoE of sending `version` after a chunk of quality `prev_quality`, given the
/// chunk takes `transmission_time` to arrive while `buffer` seconds are queued.
double chunk_qoe(const ChunkVersion& version, double prev_quality,
                 double transmission_time, double buffer,
                 const QoeWeights& weights);

/// Drain the buffer for the transmission, then append the chunk (capped).
BufferStep advance_buffer(double buffer, double transmission_time,
                          double chunk_duration, double max_buffer);

}  // namespace fugu

#endif  // FUGU_DOMAIN_HPP
