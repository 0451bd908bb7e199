#include "fugu/simulator.hpp"

#include "fugu/text.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fugu {

// ---------------------------------------------------------------------------
// Traces

void NetworkTrace::validate() const {
  if (points.empty()) throw std::invalid_argument("trace has no breakpoints");
  if (points.front().time != 0.0) throw std::invalid_argument("trace must start at time 0");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].capacity >= 0.0) || !std::isfinite(points[i].capacity))
      throw std::invalid_argument("trace capacity must be finite and non-negative");
    if (i > 0 && !(points[i].time > points[i - 1].time))
      throw std::invalid_argument("trace times must be strictly increasing");
  }
  if (!(base_delay >= 0.0)) throw std::invalid_argument("base delay must be non-negative");
}

double NetworkTrace::capacity_at(double t) const {
  auto it = std::upper_bound(points.begin(), points.end(), t,
                             [](double v, const TraceBreakpoint& p) { return v < p.time; });
  if (it == points.begin()) return points.front().capacity;
  return std::prev(it)->capacity;
}

NetworkTrace load_trace(std::string_view text_in, double base_delay) {
  NetworkTrace trace;
  trace.base_delay = base_delay;
  const auto all = text::lines(text_in);
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto line = all[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto where = "trace line " + std::to_string(i + 1) + ": ";
    const auto fields = text::split(line, ',');
    if (fields.size() != 2) throw std::runtime_error(where + "expected 'time_s,bytes_per_s'");
    const auto t = text::parse_number<double>(text::trim(fields[0]));
    const auto c = text::parse_number<double>(text::trim(fields[1]));
    if (!t || !c || !std::isfinite(*t) || !std::isfinite(*c))
      throw std::runtime_error(where + "malformed number");
    if (*c < 0) throw std::runtime_error(where + "negative capacity");
    if (trace.points.empty() && *t != 0.0) throw std::runtime_error(where + "trace must start at 0");
    if (!trace.points.empty() && !(*t > trace.points.back().time))
      throw std::runtime_error(where + "time is not increasing");
    trace.points.push_back({*t, *c});
  }
  if (trace.points.empty()) throw std::runtime_error("trace is empty");
  return trace;
}

NetworkTrace load_trace_file(const std::filesystem::path& path, double base_delay) {
  try {
    return load_trace(text::read_file(path.string()), base_delay);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string format_trace(const NetworkTrace& trace) {
  std::string out = "# time_s,bytes_per_s\n";
  for (const auto& p : trace.points)
    out += text::format_number(p.time) + "," + text::format_number(p.capacity) + "\n";
  return out;
}

std::optional<double> transmit(double size, const NetworkTrace& trace, double start) {
  if (!(size > 0.0)) throw std::invalid_argument("transmit size must be positive");
  const auto& pts = trace.points;
  double t = start + trace.base_delay;
  double remaining = size;
  auto it = std::upper_bound(pts.begin(), pts.end(), t,
                             [](double v, const TraceBreakpoint& p) { return v < p.time; });
  std::size_t i = it == pts.begin() ? 0 : static_cast<std::size_t>(std::prev(it) - pts.begin());
  while (true) {
    const double cap = pts[i].capacity;
    if (i + 1 == pts.size()) {
      if (cap <= 0.0) return std::nullopt;
      t += remaining / cap;
      break;
    }
    const double seg_end = pts[i + 1].time;
    const double avail = cap * (seg_end - t);
    if (cap > 0.0 && avail >= remaining) {
      t += remaining / cap;
      break;
    }
    remaining -= avail;
    t = seg_end;
    ++i;
  }
  return t - start;
}

NetworkTrace synth_trace(const TraceGenConfig& config, std::uint64_t seed) {
  if (!(config.duration > 0.0 && config.step > 0.0))
    throw std::invalid_argument("trace duration and step must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> regime_len(1.0 / config.regime_mean);

  const double trace_log_mean = std::log(config.median_capacity) + config.trace_sigma * normal(rng);
  double regime_log = trace_log_mean + config.regime_sigma * normal(rng);
  double next_switch = regime_len(rng);

  NetworkTrace trace;
  trace.base_delay = config.base_delay;
  const auto steps = static_cast<std::size_t>(std::ceil(config.duration / config.step));
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * config.step;
    while (t >= next_switch) {
      regime_log = trace_log_mean + config.regime_sigma * normal(rng);
      next_switch += regime_len(rng);
    }
    trace.points.push_back({t, std::exp(regime_log + config.noise_sigma * normal(rng))});
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Video

void VideoSpec::validate() const {
  if (!(chunk_duration > 0.0)) throw std::invalid_argument("chunk duration must be positive");
  if (chunks.empty()) throw std::invalid_argument("video has no chunks");
  for (const auto& c : chunks) {
    c.validate();
    if (c.versions.size() != chunks.front().versions.size())
      throw std::invalid_argument("every chunk must have the same number of versions");
  }
}

VideoSpec load_video_spec(std::string_view text_in) {
  std::vector<std::string_view> rows;
  for (auto line : text::lines(text_in)) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::runtime_error("video spec is empty");

  std::istringstream header{std::string(rows.front())};
  std::string k1, k2, k3;
  std::size_t n_chunks = 0, n_versions = 0;
  double duration = 0.0;
  if (!(header >> k1 >> n_chunks >> k2 >> duration >> k3 >> n_versions) || k1 != "chunks" ||
      k2 != "duration" || k3 != "versions")
    throw std::runtime_error("video spec header must be 'chunks <N> duration <s> versions <V>'");
  if (rows.size() != n_chunks + 1)
    throw std::runtime_error("video spec declares " + std::to_string(n_chunks) + " chunks but has " +
                             std::to_string(rows.size() - 1));

  VideoSpec video;
  video.chunk_duration = duration;
  for (std::size_t i = 0; i < n_chunks; ++i) {
    const auto where = "video spec chunk " + std::to_string(i) + ": ";
    Chunk chunk;
    chunk.index = i;
    std::size_t start = 0;
    const auto row = rows[i + 1];
    while (start < row.size()) {
      auto end = row.find_first_of(" \t", start);
      if (end == std::string_view::npos) end = row.size();
      const auto tok = row.substr(start, end - start);
      start = end + 1;
      if (tok.empty()) continue;
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw std::runtime_error(where + "expected size:ssim_db");
      const auto size = text::parse_number<std::int64_t>(tok.substr(0, colon));
      const auto q = text::parse_number<double>(tok.substr(colon + 1));
      if (!size || !q) throw std::runtime_error(where + "malformed version '" + std::string(tok) + "'");
      chunk.versions.push_back({*size, *q, duration});
    }
    if (chunk.versions.size() != n_versions)
      throw std::runtime_error(where + "expected " + std::to_string(n_versions) + " versions");
    video.chunks.push_back(std::move(chunk));
  }
  try {
    video.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("video spec: ") + e.what());
  }
  return video;
}

VideoSpec load_video_spec_file(const std::filesystem::path& path) {
  try {
    return load_video_spec(text::read_file(path.string()));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string format_video_spec(const VideoSpec& video) {
  std::string out = "chunks " + std::to_string(video.chunks.size()) + " duration " +
                    text::format_number(video.chunk_duration) + " versions " +
                    std::to_string(video.chunks.empty() ? 0 : video.version_count()) + "\n";
  for (const auto& c : video.chunks) {
    for (std::size_t v = 0; v < c.versions.size(); ++v) {
      if (v) out += ' ';
      out += text::format_number(c.versions[v].size) + ":" +
             text::format_number(c.versions[v].quality);
    }
    out += '\n';
  }
  return out;
}

VideoSpec synth_video(const VideoGenConfig& config, std::uint64_t seed) {
  if (config.bitrates_mbps.empty()) throw std::invalid_argument("no bitrates given");
  if (!(config.jitter >= 0.0 && config.jitter < 1.0))
    throw std::invalid_argument("jitter must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> factor(1.0 - config.jitter, 1.0 + config.jitter);
  std::normal_distribution<double> noise(0.0, config.ssim_noise_db);

  VideoSpec video;
  video.chunk_duration = config.chunk_duration;
  for (std::size_t i = 0; i < config.chunks; ++i) {
    Chunk chunk;
    chunk.index = i;
    const double f = factor(rng);
    for (double mbps : config.bitrates_mbps) {
      const double bytes = mbps * 1e6 / 8.0 * config.chunk_duration * f;
      const double rate_mbps = bytes * 8.0 / 1e6 / config.chunk_duration;
      const double q = config.ssim_db_at_1mbps +
                       config.ssim_db_per_log_rate * std::log(rate_mbps) + noise(rng);
      chunk.versions.push_back({std::llround(bytes), std::clamp(q, 0.0, kMaxSsimDb),
                                config.chunk_duration});
    }
    video.chunks.push_back(std::move(chunk));
  }
  video.validate();
  return video;
}

// ---------------------------------------------------------------------------
// Schemes

TransportStats synth_transport_stats(std::optional<ChunkRecord> last_delivery,
                                     double base_delay) {
  TransportStats s;
  s.min_rtt = base_delay;
  s.srtt = base_delay;
  if (last_delivery && last_delivery->transmission_time > 0.0) {
    s.delivery_rate = last_delivery->size / last_delivery->transmission_time;
    s.cwnd = s.delivery_rate * s.srtt / kPacketBytes;
    s.in_flight = s.cwnd;
  }
  return s;
}

std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::fugu: return "fugu";
    case SchemeKind::fugu_point: return "fugu_point";
    case SchemeKind::fugu_throughput: return "fugu_throughput";
    case SchemeKind::fugu_linear: return "fugu_linear";
    case SchemeKind::mpc_hm: return "mpc_hm";
    case SchemeKind::robust_mpc_hm: return "robust_mpc_hm";
    case SchemeKind::bba: return "bba";
  }
  return "unknown";
}

SchemeKind scheme_kind_from_string(std::string_view s) {
  for (auto k : {SchemeKind::fugu, SchemeKind::fugu_point, SchemeKind::fugu_throughput,
                 SchemeKind::fugu_linear, SchemeKind::mpc_hm, SchemeKind::robust_mpc_hm,
                 SchemeKind::bba})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

bool scheme_needs_predictor(SchemeKind k) {
  return k == SchemeKind::fugu || k == SchemeKind::fugu_point ||
         k == SchemeKind::fugu_throughput || k == SchemeKind::fugu_linear;
}

namespace {

class FuguScheme final : public AbrScheme {
 public:
  FuguScheme(std::string name, std::shared_ptr<const TransmissionTimePredictor> predictor)
      : name_(std::move(name)), predictor_(std::move(predictor)) {}

  std::string name() const override { return name_; }

  std::size_t select(const DecisionContext& ctx) override {
    const TtpInput base = TtpInput::from_history(ctx.history, ctx.stats, 0.0);
    const PredictionSource source = [&](std::span<const Chunk> chunks) {
      PredictionTable table;
      std::vector<double> sizes;
      for (std::size_t s = 0; s < chunks.size(); ++s) {
        sizes.clear();
        for (const auto& v : chunks[s].versions) sizes.push_back(static_cast<double>(v.size));
        table.push_back(predictor_->predict_sizes(base, sizes, s));
      }
      return table;
    };
    return mpc_plan(ctx.upcoming, ctx.state, source, *ctx.weights, *ctx.horizon).version;
  }

 private:
  std::string name_;
  std::shared_ptr<const TransmissionTimePredictor> predictor_;
};

std::optional<double> cold_start_rate(const TransportStats& stats) {
  if (stats.delivery_rate > 0.0) return stats.delivery_rate;
  return std::nullopt;
}

class MpcHmScheme final : public AbrScheme {
 public:
  explicit MpcHmScheme(std::string name) : name_(std::move(name)) {}
  std::string name() const override { return name_; }

  std::size_t select(const DecisionContext& ctx) override {
    return mpc_hm_plan(ctx.upcoming, ctx.state, history_, *ctx.weights, *ctx.horizon,
                       cold_start_rate(ctx.stats))
        .version;
  }
  void on_delivered(const ChunkRecord& c) override {
    history_.push(c.size / c.transmission_time);
  }

 private:
  std::string name_;
  ThroughputHistory history_;
};

class RobustMpcHmScheme final : public AbrScheme {
 public:
  explicit RobustMpcHmScheme(std::string name) : name_(std::move(name)) {}
  std::string name() const override { return name_; }

  std::size_t select(const DecisionContext& ctx) override {
    last_prediction_ = history_.empty() ? std::nullopt : std::optional<double>(hm_predict(history_));
    return robust_mpc_hm_plan(ctx.upcoming, ctx.state, history_, errors_, *ctx.weights,
                              *ctx.horizon, cold_start_rate(ctx.stats))
        .version;
  }
  void on_delivered(const ChunkRecord& c) override {
    const double actual = c.size / c.transmission_time;
    if (last_prediction_) errors_.record(*last_prediction_, actual);
    history_.push(actual);
  }

 private:
  std::string name_;
  ThroughputHistory history_;
  PredictionErrors errors_;
  std::optional<double> last_prediction_;
};

class BbaScheme final : public AbrScheme {
 public:
  BbaScheme(std::string name, BbaConfig config) : name_(std::move(name)), config_(config) {}
  std::string name() const override { return name_; }

  std::size_t select(const DecisionContext& ctx) override {
    return bba_select(ctx.upcoming.front(), ctx.state, config_.reservoir, config_.cushion_top);
  }

 private:
  std::string name_;
  BbaConfig config_;
};

}  // namespace

std::unique_ptr<AbrScheme> make_scheme(const SchemeSpec& spec, const BbaConfig& bba) {
  const std::string name = spec.name.empty() ? std::string(to_string(spec.kind)) : spec.name;
  switch (spec.kind) {
    case SchemeKind::fugu:
    case SchemeKind::fugu_point:
    case SchemeKind::fugu_throughput:
    case SchemeKind::fugu_linear: {
      if (!spec.predictor)
        throw std::invalid_argument("scheme " + name + " requires a trained predictor");
      auto predictor = spec.predictor;
      if (spec.kind == SchemeKind::fugu_point && predictor->variant() != PredictorVariant::point)
        predictor = std::make_shared<const TransmissionTimePredictor>(
            PredictorVariant::point, predictor->net(), predictor->horizon_steps());
      return std::make_unique<FuguScheme>(name, std::move(predictor));
    }
    case SchemeKind::mpc_hm: return std::make_unique<MpcHmScheme>(name);
    case SchemeKind::robust_mpc_hm: return std::make_unique<RobustMpcHmScheme>(name);
    case SchemeKind::bba: return std::make_unique<BbaScheme>(name, bba);
  }
  throw std::invalid_argument("unknown scheme kind");
}

// ---------------------------------------------------------------------------
// Session loop

void SessionConfig::validate() const {
  if (!(watch_duration > 0.0)) throw std::invalid_argument("watch_duration must be positive");
  if (!(max_buffer > 0.0)) throw std::invalid_argument("max_buffer must be positive");
  if (!(trace_offset >= 0.0)) throw std::invalid_argument("trace_offset must be non-negative");
  weights.validate();
  horizon.validate(weights.max_buffer);
}

namespace {

std::int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }
double to_s(std::int64_t us) { return static_cast<double>(us) * 1e-6; }

}  // namespace

SessionOutcome run_session(const SessionConfig& config, const NetworkTrace& trace,
                           const VideoSpec& video, AbrScheme& scheme) {
  config.validate();
  trace.validate();
  video.validate();

  QoeWeights weights = config.weights;
  weights.max_buffer = config.max_buffer;

  SessionOutcome out;
  SessionResult& r = out.result;
  Telemetry& tel = out.telemetry;

  const std::int64_t dur_us = to_us(video.chunk_duration);
  const std::int64_t max_us = to_us(config.max_buffer);
  const std::int64_t watch_us = to_us(config.watch_duration);
  const std::int64_t video_ts_step = std::llround(video.chunk_duration * kVideoTsPerSecond);
  const auto epoch = [&](std::int64_t us) { return config.start_epoch + to_s(us); };

  std::int64_t buffer_us = 0;
  std::int64_t delivered_us = 0;
  bool playing = false;
  std::optional<double> last_quality;
  std::vector<ChunkRecord> history;

  const auto buffer_row = [&](std::int64_t at_us, BufferEvent ev) {
    tel.client_buffer.push_back({epoch(at_us), config.stream_id, config.expt_id, ev,
                                 to_s(buffer_us), to_s(r.stall_us)});
  };

  for (std::size_t i = 0; i < video.chunks.size() && delivered_us < watch_us; ++i) {
    // Hold off while the buffer has no room for another chunk.
    if (playing && buffer_us > max_us - dur_us) {
      const std::int64_t wait = buffer_us - (max_us - dur_us);
      r.wall_us += wait;
      r.played_us += wait;
      buffer_us -= wait;
    }

    const TransportStats stats = synth_transport_stats(
        history.empty() ? std::nullopt : std::optional<ChunkRecord>(history.back()),
        trace.base_delay);

    DecisionContext ctx;
    const std::size_t n_upcoming = std::min(config.horizon.steps, video.chunks.size() - i);
    ctx.upcoming = std::span<const Chunk>(video.chunks).subspan(i, n_upcoming);
    ctx.state.buffer = to_s(buffer_us);
    ctx.state.last_quality = last_quality;
    ctx.state.playing = playing;
    ctx.state.cumulative_stall = to_s(r.stall_us);
    ctx.stats = stats;
    ctx.history = history;
    ctx.weights = &weights;
    ctx.horizon = &config.horizon;

    std::size_t version = 0;
    try {
      version = scheme.select(ctx);
      if (version >= video.chunks[i].versions.size())
        throw std::out_of_range("scheme chose a nonexistent version");
    } catch (const std::exception& e) {
      r.aborted = true;
      r.abort_reason = std::string("scheme error: ") + e.what();
      break;
    }
    const ChunkVersion& cv = video.chunks[i].versions[version];

    const std::int64_t send_us = r.wall_us;
    const std::int64_t video_ts = static_cast<std::int64_t>(i) * video_ts_step;
    tel.video_sent.push_back({epoch(send_us), config.stream_id, config.expt_id, video_ts, cv.size,
                              db_to_ssim(cv.quality), stats.cwnd, stats.in_flight, stats.min_rtt,
                              stats.srtt, stats.delivery_rate});

    const auto tt = transmit(static_cast<double>(cv.size), trace, config.trace_offset + to_s(send_us));
    if (!tt) {
      r.aborted = true;
      r.abort_reason = "never delivered";
      const std::int64_t cap_us = to_us(kNeverDeliveredStall);
      if (!playing) {
        r.wall_us += cap_us;
        r.startup_us = r.wall_us;
      } else {
        r.wall_us += buffer_us;
        r.played_us += buffer_us;
        buffer_us = 0;
        buffer_row(r.wall_us, BufferEvent::rebuffer);
        r.wall_us += cap_us;
        r.stall_us += cap_us;
        buffer_row(r.wall_us, BufferEvent::periodic);
      }
      break;
    }
    const std::int64_t tt_us = std::max<std::int64_t>(1, to_us(*tt));

    ChunkOutcome rec;
    rec.index = i;
    rec.version = version;
    rec.quality = cv.quality;
    rec.size = cv.size;
    rec.send_time = to_s(send_us);
    rec.transmission_time = to_s(tt_us);
    rec.buffer_before = to_s(buffer_us);
    rec.duration = video.chunk_duration;

    if (!playing) {
      r.wall_us += tt_us;
      r.startup_us = r.wall_us;
      buffer_us = dur_us;
      playing = true;
      buffer_row(r.wall_us, BufferEvent::startup);
    } else {
      // Integer-valued doubles keep advance_buffer exact here.
      const BufferStep step = advance_buffer(static_cast<double>(buffer_us),
                                             static_cast<double>(tt_us),
                                             static_cast<double>(dur_us),
                                             static_cast<double>(max_us));
      const auto stall_us = static_cast<std::int64_t>(step.stall);
      if (stall_us > 0) {
        const std::int64_t empty_at = r.wall_us + buffer_us;
        const std::int64_t before = buffer_us;
        buffer_us = 0;
        buffer_row(empty_at, BufferEvent::rebuffer);
        buffer_us = before;
      }
      r.played_us += tt_us - stall_us;
      r.stall_us += stall_us;
      r.wall_us += tt_us;
      buffer_us = static_cast<std::int64_t>(step.new_buffer);
      rec.stall = to_s(stall_us);
      buffer_row(r.wall_us, stall_us > 0 ? BufferEvent::play : BufferEvent::periodic);
    }
    rec.buffer_after = to_s(buffer_us);
    delivered_us += dur_us;
    last_quality = cv.quality;

    tel.video_acked.push_back({epoch(r.wall_us), config.stream_id, config.expt_id, video_ts});
    const ChunkRecord delivered{static_cast<double>(cv.size), to_s(tt_us)};
    history.push_back(delivered);
    scheme.on_delivered(delivered);
    r.chunks.push_back(rec);
  }

  // The viewer watches whatever is still buffered.
  if (playing && buffer_us > 0) {
    r.wall_us += buffer_us;
    r.played_us += buffer_us;
    buffer_us = 0;
    buffer_row(r.wall_us, BufferEvent::periodic);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

Telemetry ExperimentResult::arm_telemetry(std::size_t scheme) const {
  Telemetry t;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i].scheme == scheme) t.append(sessions[i].telemetry);
  return t;
}

std::vector<SessionAssignment> draw_assignments(const ExperimentSpec& spec) {
  if (spec.schemes.empty()) throw std::invalid_argument("experiment needs at least one scheme");
  if (spec.traces.empty()) throw std::invalid_argument("experiment needs at least one trace");
  if (spec.videos.empty()) throw std::invalid_argument("experiment needs at least one video");
  if (spec.days < 1) throw std::invalid_argument("experiment must span at least one day");

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick_trace(0, spec.traces.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_video(0, spec.videos.size() - 1);
  std::uniform_int_distribution<std::int64_t> pick_day(0, spec.days - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::lognormal_distribution<double> watch(std::log(spec.watch.median), spec.watch.sigma);

  const double day0 = static_cast<double>(epoch_day(spec.epoch_start)) * kSecondsPerDay;
  const std::size_t total = spec.sessions_per_arm * spec.schemes.size();
  std::vector<SessionAssignment> pool(total);
  for (std::size_t k = 0; k < total; ++k) {
    auto& a = pool[k];
    a.stream_id = spec.first_stream_id + k;
    a.trace = pick_trace(rng);
    a.video = pick_video(rng);
    a.watch_duration = watch(rng);
    a.trace_offset = unit(rng) * spec.traces[a.trace].duration();
    // Leave an hour before midnight so a session stays within its day.
    a.start_epoch = day0 + static_cast<double>(pick_day(rng)) * kSecondsPerDay +
                    std::floor(unit(rng) * (kSecondsPerDay - 3600.0));
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t p = 0; p < total; ++p) pool[order[p]].scheme = p / spec.sessions_per_arm;
  return pool;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  for (const auto& t : spec.traces) t.validate();
  for (const auto& v : spec.videos) v.validate();
  ExperimentResult result;
  result.assignments = draw_assignments(spec);
  result.sessions.reserve(result.assignments.size());
  for (auto& a : result.assignments) {
    SessionConfig cfg;
    cfg.max_buffer = spec.weights.max_buffer;
    cfg.watch_duration = a.watch_duration;
    cfg.trace_offset = a.trace_offset;
    cfg.start_epoch = a.start_epoch;
    cfg.stream_id = a.stream_id;
    cfg.expt_id = static_cast<std::int64_t>(a.scheme);
    cfg.weights = spec.weights;
    cfg.horizon = spec.horizon;
    auto scheme = make_scheme(spec.schemes[a.scheme], spec.bba);
    auto outcome = run_session(cfg, spec.traces[a.trace], spec.videos[a.video], *scheme);
    a.aborted = outcome.result.aborted;
    a.abort_reason = outcome.result.abort_reason;
    result.sessions.push_back(std::move(outcome));
  }
  return result;
}

std::string format_assignment_log(const ExperimentSpec& spec,
                                  const std::vector<SessionAssignment>& assignments) {
  std::string out = "stream_id,scheme,trace,video,watch_duration,trace_offset,start_epoch,status\n";
  for (const auto& a : assignments) {
    const auto& s = spec.schemes.at(a.scheme);
    std::string reason = a.abort_reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    out += std::to_string(a.stream_id) + "," +
           (s.name.empty() ? std::string(to_string(s.kind)) : s.name) + "," +
           std::to_string(a.trace) + "," + std::to_string(a.video) + "," +
           text::format_number(a.watch_duration) + "," + text::format_number(a.trace_offset) +
           "," + text::format_number(a.start_epoch) + "," +
           (a.aborted ? "aborted:" + reason : std::string("ok")) + "\n";
  }
  return out;
}

void write_experiment(const ExperimentSpec& spec, const ExperimentResult& result,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
    const auto& scheme = spec.schemes[s];
    const std::string name = scheme.name.empty() ? std::string(to_string(scheme.kind)) : scheme.name;
    emit_archive(result.arm_telemetry(s), dir / name);
  }
  text::write_file((dir / "assignments.csv").string(),
                   format_assignment_log(spec, result.assignments));
}

}  // namespace fugu
