#include "fugu/domain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fugu {

void ChunkVersion::validate() const {
  if (size <= 0) throw std::invalid_argument("chunk version size must be positive");
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw std::invalid_argument("chunk duration must be positive");
  if (!std::isfinite(quality)) throw std::invalid_argument("chunk quality must be finite");
}

void Chunk::validate() const {
  if (versions.empty())
    throw std::invalid_argument("chunk " + std::to_string(index) + " has no versions");
  for (std::size_t i = 0; i < versions.size(); ++i) {
    versions[i].validate();
    if (i > 0 && versions[i].size <= versions[i - 1].size)
      throw std::invalid_argument("chunk " + std::to_string(index) +
                                  ": version sizes must be strictly increasing");
  }
}

void QoeWeights::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(mu >= 0.0)) throw std::invalid_argument("mu must be >= 0");
  if (!(max_buffer > 0.0)) throw std::invalid_argument("max_buffer must be > 0");
}

double ssim_to_db(double ssim_index) {
  if (!(ssim_index >= 0.0 && ssim_index <= 1.0))
    throw std::domain_error("SSIM index outside [0, 1]");
  if (ssim_index >= 1.0 - 1e-6) return kMaxSsimDb;
  return -10.0 * std::log10(1.0 - ssim_index);
}

double db_to_ssim(double ssim_db) {
  const double db = std::clamp(ssim_db, 0.0, kMaxSsimDb);
  return 1.0 - std::pow(10.0, -db / 10.0);
}

double chunk_qoe(const ChunkVersion& version, double prev_quality,
                 double transmission_time, double buffer,
                 const QoeWeights& weights) {
  const double q = version.quality;
  const double stall = std::max(transmission_time - buffer, 0.0);
  return q - weights.lambda * std::abs(q - prev_quality) - weights.mu * stall;
}

BufferStep advance_buffer(double buffer, double transmission_time,
                          double chunk_duration, double max_buffer) {
  BufferStep out;
  out.stall = std::max(transmission_time - buffer, 0.0);
  out.new_buffer = std::min(std::max(buffer - transmission_time, 0.0) + chunk_duration,
                            max_buffer);
  return out;
}

}  // namespace fugu
