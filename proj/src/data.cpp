#include "fugu/data.hpp"

#include "fugu/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace fugu {

std::string_view to_string(BufferEvent e) {
  switch (e) {
    case BufferEvent::periodic: return "periodic";
    case BufferEvent::startup: return "startup";
    case BufferEvent::play: return "play";
    case BufferEvent::rebuffer: return "rebuffer";
  }
  return "periodic";
}

BufferEvent buffer_event_from_string(std::string_view s) {
  if (s == "periodic") return BufferEvent::periodic;
  if (s == "startup") return BufferEvent::startup;
  if (s == "play") return BufferEvent::play;
  if (s == "rebuffer") return BufferEvent::rebuffer;
  throw std::invalid_argument("unknown buffer event '" + std::string(s) + "'");
}

void Telemetry::append(const Telemetry& other) {
  video_sent.insert(video_sent.end(), other.video_sent.begin(), other.video_sent.end());
  video_acked.insert(video_acked.end(), other.video_acked.begin(), other.video_acked.end());
  client_buffer.insert(client_buffer.end(), other.client_buffer.begin(),
                       other.client_buffer.end());
}

void ParseReport::merge(const ParseReport& other) {
  rows += other.rows;
  malformed += other.malformed;
  messages.insert(messages.end(), other.messages.begin(), other.messages.end());
}

namespace {

constexpr std::string_view kSentHeader =
    "time,stream_id,expt_id,video_ts,size,ssim_index,cwnd,in_flight,min_rtt,rtt,delivery_rate";
constexpr std::string_view kAckedHeader = "time,stream_id,expt_id,video_ts";
constexpr std::string_view kBufferHeader = "time,stream_id,expt_id,event,buffer,cum_rebuf";

class RowWriter {
 public:
  explicit RowWriter(std::string_view header) {
    out_.append(header);
    out_.push_back('\n');
  }
  template <typename T>
  RowWriter& field(T value) {
    sep();
    out_.append(text::format_number(value));
    return *this;
  }
  RowWriter& field(std::string_view s) {
    sep();
    out_.append(s);
    return *this;
  }
  void end_row() {
    out_.push_back('\n');
    first_ = true;
  }
  std::string str() && { return std::move(out_); }

 private:
  void sep() {
    if (!first_) out_.push_back(',');
    first_ = false;
  }
  std::string out_;
  bool first_ = true;
};

class RowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
T field_as(std::string_view s, const char* name) {
  const auto v = text::parse_number<T>(s);
  if (!v) throw RowError(std::string("bad ") + name + " '" + std::string(s) + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(*v)) throw RowError(std::string("non-finite ") + name);
  }
  return *v;
}

template <typename Row, typename ParseFn>
std::vector<Row> parse_rows(std::string_view text_in, std::string_view header,
                            std::size_t field_count, ParseReport& report,
                            std::string_view source, ParseFn parse_fn) {
  std::vector<Row> rows;
  const auto all = text::lines(text_in);
  if (all.empty()) return rows;
  if (text::trim(all.front()) != header)
    throw std::runtime_error(std::string(source) + ": unexpected header '" +
                             std::string(all.front()) + "'");
  for (std::size_t i = 1; i < all.size(); ++i) {
    const auto line = all[i];
    if (text::trim(line).empty()) continue;
    try {
      const auto fields = text::split(line, ',');
      if (fields.size() != field_count)
        throw RowError("expected " + std::to_string(field_count) + " fields, got " +
                       std::to_string(fields.size()));
      rows.push_back(parse_fn(fields));
      ++report.rows;
    } catch (const std::exception& e) {
      ++report.malformed;
      report.messages.push_back(std::string(source) + ":" + std::to_string(i + 1) + ": " +
                                e.what());
    }
  }
  return rows;
}

}  // namespace

std::string format_video_sent(const std::vector<VideoSentRow>& rows) {
  RowWriter w(kSentHeader);
  for (const auto& r : rows) {
    w.field(r.time).field(r.stream_id).field(r.expt_id).field(r.video_ts).field(r.size)
        .field(r.ssim_index).field(r.cwnd).field(r.in_flight).field(r.min_rtt).field(r.rtt)
        .field(r.delivery_rate);
    w.end_row();
  }
  return std::move(w).str();
}

std::string format_video_acked(const std::vector<VideoAckedRow>& rows) {
  RowWriter w(kAckedHeader);
  for (const auto& r : rows) {
    w.field(r.time).field(r.stream_id).field(r.expt_id).field(r.video_ts);
    w.end_row();
  }
  return std::move(w).str();
}

std::string format_client_buffer(const std::vector<ClientBufferRow>& rows) {
  RowWriter w(kBufferHeader);
  for (const auto& r : rows) {
    w.field(r.time).field(r.stream_id).field(r.expt_id).field(to_string(r.event))
        .field(r.buffer).field(r.cum_rebuf);
    w.end_row();
  }
  return std::move(w).str();
}

std::vector<VideoSentRow> parse_video_sent(std::string_view text_in, ParseReport& report,
                                           std::string_view source) {
  return parse_rows<VideoSentRow>(text_in, kSentHeader, 11, report, source, [](const auto& f) {
    VideoSentRow r;
    r.time = field_as<double>(f[0], "time");
    r.stream_id = field_as<std::uint64_t>(f[1], "stream_id");
    r.expt_id = field_as<std::int64_t>(f[2], "expt_id");
    r.video_ts = field_as<std::int64_t>(f[3], "video_ts");
    r.size = field_as<std::int64_t>(f[4], "size");
    r.ssim_index = field_as<double>(f[5], "ssim_index");
    r.cwnd = field_as<double>(f[6], "cwnd");
    r.in_flight = field_as<double>(f[7], "in_flight");
    r.min_rtt = field_as<double>(f[8], "min_rtt");
    r.rtt = field_as<double>(f[9], "rtt");
    r.delivery_rate = field_as<double>(f[10], "delivery_rate");
    if (r.size <= 0) throw RowError("size must be positive");
    if (!(r.ssim_index >= 0.0 && r.ssim_index <= 1.0)) throw RowError("ssim_index outside [0, 1]");
    if (r.cwnd < 0 || r.in_flight < 0 || r.min_rtt < 0 || r.rtt < 0 || r.delivery_rate < 0)
      throw RowError("negative transport statistic");
    return r;
  });
}

std::vector<VideoAckedRow> parse_video_acked(std::string_view text_in, ParseReport& report,
                                             std::string_view source) {
  return parse_rows<VideoAckedRow>(text_in, kAckedHeader, 4, report, source, [](const auto& f) {
    VideoAckedRow r;
    r.time = field_as<double>(f[0], "time");
    r.stream_id = field_as<std::uint64_t>(f[1], "stream_id");
    r.expt_id = field_as<std::int64_t>(f[2], "expt_id");
    r.video_ts = field_as<std::int64_t>(f[3], "video_ts");
    return r;
  });
}

std::vector<ClientBufferRow> parse_client_buffer(std::string_view text_in, ParseReport& report,
                                                 std::string_view source) {
  return parse_rows<ClientBufferRow>(text_in, kBufferHeader, 6, report, source, [](const auto& f) {
    ClientBufferRow r;
    r.time = field_as<double>(f[0], "time");
    r.stream_id = field_as<std::uint64_t>(f[1], "stream_id");
    r.expt_id = field_as<std::int64_t>(f[2], "expt_id");
    try {
      r.event = buffer_event_from_string(f[3]);
    } catch (const std::invalid_argument& e) {
      throw RowError(e.what());
    }
    r.buffer = field_as<double>(f[4], "buffer");
    r.cum_rebuf = field_as<double>(f[5], "cum_rebuf");
    if (r.buffer < 0 || r.cum_rebuf < 0) throw RowError("negative buffer or cum_rebuf");
    return r;
  });
}

void emit_archive(const Telemetry& telemetry, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  text::write_file((dir / kVideoSentFile).string(), format_video_sent(telemetry.video_sent));
  text::write_file((dir / kVideoAckedFile).string(), format_video_acked(telemetry.video_acked));
  text::write_file((dir / kClientBufferFile).string(),
                   format_client_buffer(telemetry.client_buffer));
}

ParsedArchive parse_archive(const std::filesystem::path& dir) {
  ParsedArchive out;
  const auto sent_path = (dir / kVideoSentFile).string();
  const auto acked_path = (dir / kVideoAckedFile).string();
  const auto buffer_path = (dir / kClientBufferFile).string();
  out.telemetry.video_sent = parse_video_sent(text::read_file(sent_path), out.report, sent_path);
  out.telemetry.video_acked =
      parse_video_acked(text::read_file(acked_path), out.report, acked_path);
  out.telemetry.client_buffer =
      parse_client_buffer(text::read_file(buffer_path), out.report, buffer_path);
  return out;
}

ParsedArchive parse_archives(const std::vector<std::filesystem::path>& dirs) {
  ParsedArchive out;
  for (const auto& d : dirs) {
    auto one = parse_archive(d);
    out.telemetry.append(one.telemetry);
    out.report.merge(one.report);
  }
  return out;
}

JoinResult join_transmission_times(const std::vector<VideoSentRow>& sent,
                                   const std::vector<VideoAckedRow>& acked) {
  using Key = std::pair<std::uint64_t, std::int64_t>;
  std::map<Key, double> ack_time;
  for (const auto& a : acked) {
    if (!ack_time.emplace(Key{a.stream_id, a.video_ts}, a.time).second)
      throw std::invalid_argument("duplicate video_acked row for stream " +
                                  std::to_string(a.stream_id) + " video_ts " +
                                  std::to_string(a.video_ts));
  }

  JoinResult out;
  std::map<Key, const VideoSentRow*> sent_by_key;
  for (const auto& s : sent) {
    if (!sent_by_key.emplace(Key{s.stream_id, s.video_ts}, &s).second)
      throw std::invalid_argument("duplicate video_sent row for stream " +
                                  std::to_string(s.stream_id) + " video_ts " +
                                  std::to_string(s.video_ts));
  }
  for (const auto& [key, s] : sent_by_key) {
    const auto it = ack_time.find(key);
    if (it == ack_time.end()) {
      ++out.never_acknowledged;
      continue;
    }
    const double tt = it->second - s->time;
    if (!(tt > 0.0)) {
      ++out.rejected;
      continue;
    }
    JoinedChunk c;
    c.stream_id = s->stream_id;
    c.expt_id = s->expt_id;
    c.video_ts = s->video_ts;
    c.sent_time = s->time;
    c.transmission_time = tt;
    c.size = s->size;
    c.ssim_index = s->ssim_index;
    c.stats = {s->cwnd, s->in_flight, s->min_rtt, s->rtt, s->delivery_rate};
    out.chunks.push_back(c);
  }
  return out;
}

std::int64_t epoch_day(double epoch_seconds) {
  return static_cast<std::int64_t>(std::floor(epoch_seconds / kSecondsPerDay));
}

std::vector<TrainingExample> build_training_set(const JoinResult& joined,
                                                const TrainingSetOptions& options) {
  if (options.window_days <= 0) throw std::invalid_argument("window_days must be positive");
  if (!(options.decay > 0.0 && options.decay <= 1.0))
    throw std::invalid_argument("decay must be in (0, 1]");

  std::vector<TrainingExample> out;
  const auto& chunks = joined.chunks;
  std::size_t begin = 0;
  while (begin < chunks.size()) {
    std::size_t end = begin;
    while (end < chunks.size() && chunks[end].stream_id == chunks[begin].stream_id) ++end;

    std::vector<ChunkRecord> history;
    for (std::size_t j = begin; j < end; ++j) {
      const auto& c = chunks[j];
      const std::int64_t age = options.as_of_day - epoch_day(c.sent_time);
      if (age >= 0 && age < options.window_days) {
        const double weight = std::pow(options.decay, static_cast<double>(age));
        const std::size_t steps = std::max<std::size_t>(options.horizon_steps, 1);
        for (std::size_t k = 0; k < steps && j + k < end; ++k) {
          const auto& target = chunks[j + k];
          TrainingExample ex;
          ex.input = TtpInput::from_history(history, c.stats, static_cast<double>(target.size));
          ex.target_bin = discretize(target.transmission_time);
          ex.weight = weight;
          ex.day_age = age;
          ex.transmission_time = target.transmission_time;
          ex.step = k;
          out.push_back(ex);
        }
      }
      history.push_back({static_cast<double>(c.size), c.transmission_time});
      if (history.size() > kHistoryLength) history.erase(history.begin());
    }
    begin = end;
  }
  return out;
}

nn::Dataset<double> to_dataset(const std::vector<TrainingExample>& examples,
                               PredictorVariant variant, std::size_t horizon_steps) {
  nn::Dataset<double> data;
  const bool throughput = variant == PredictorVariant::throughput;
  const Eigen::Index dim =
      (throughput ? kThroughputInputDim : kTtpInputDim) + (horizon_steps > 0 ? 1 : 0);
  const auto n = static_cast<Eigen::Index>(examples.size());
  data.inputs.resize(dim, n);
  data.weights.resize(n);
  data.targets.reserve(examples.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    Eigen::VectorXd x = throughput ? throughput_features(ex.input) : ttp_features(ex.input);
    if (horizon_steps > 0) x = with_horizon_feature(x, ex.step, horizon_steps);
    data.inputs.col(i) = x;
    data.weights(i) = ex.weight;
    data.targets.push_back(static_cast<Eigen::Index>(
        throughput
            ? discretize_throughput(ex.input.candidate_size / ex.transmission_time)
            : ex.target_bin));
  }
  return data;
}

}  // namespace fugu
