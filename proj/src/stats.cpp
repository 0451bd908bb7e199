#include "fugu/stats.hpp"

#include "fugu/text.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fugu {

namespace {

constexpr double kZ95 = 1.959963984540054;

double variation(const std::vector<double>& q) {
  if (q.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < q.size(); ++i) total += std::abs(q[i] - q[i - 1]);
  return total / static_cast<double>(q.size() - 1);
}

double weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
  }
  return swx / sw;
}

void finish_summary(StreamSummary& s, const std::vector<double>& qualities,
                    const std::vector<double>& durations) {
  s.played_time = s.watch_time - s.stall_time;
  if (!qualities.empty()) {
    s.mean_ssim_db = weighted_mean(qualities, durations);
    s.ssim_variation_db = variation(qualities);
  }
  s.eligible = s.mean_ssim_db.has_value() && s.played_time >= kMinEligiblePlayTime;
}

std::vector<const StreamSummary*> eligible_of(std::span<const StreamSummary> summaries) {
  std::vector<const StreamSummary*> out;
  for (const auto& s : summaries)
    if (s.eligible) out.push_back(&s);
  return out;
}

double pooled_ratio(double stall, double watch) {
  if (!(watch > 0.0)) throw std::invalid_argument("total watch time is zero");
  return stall / watch;
}

// Linear-interpolated quantile of sorted values.
double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

StreamSummary summarize_stream(const SessionResult& result, std::uint64_t stream_id) {
  StreamSummary s;
  s.stream_id = stream_id;
  s.startup_time = result.startup_time();
  s.stall_time = result.stall_time();
  s.watch_time = result.watch_time();
  std::vector<double> q, d;
  for (const auto& c : result.chunks) {
    q.push_back(c.quality);
    d.push_back(c.duration);
  }
  finish_summary(s, q, d);
  return s;
}

std::vector<StreamSummary> summarize_telemetry(const Telemetry& telemetry) {
  struct StreamRows {
    std::vector<const VideoSentRow*> sent;
    std::vector<const ClientBufferRow*> buffer;
    std::map<std::int64_t, bool> acked;
  };
  std::map<std::uint64_t, StreamRows> streams;
  for (const auto& r : telemetry.video_sent) streams[r.stream_id].sent.push_back(&r);
  for (const auto& r : telemetry.video_acked) streams[r.stream_id].acked[r.video_ts] = true;
  for (const auto& r : telemetry.client_buffer) streams[r.stream_id].buffer.push_back(&r);

  std::vector<StreamSummary> out;
  for (auto& [id, rows] : streams) {
    std::stable_sort(rows.buffer.begin(), rows.buffer.end(),
                     [](const auto* a, const auto* b) { return a->time < b->time; });
    std::stable_sort(rows.sent.begin(), rows.sent.end(),
                     [](const auto* a, const auto* b) { return a->video_ts < b->video_ts; });
    for (std::size_t i = 1; i < rows.buffer.size(); ++i)
      if (rows.buffer[i]->cum_rebuf < rows.buffer[i - 1]->cum_rebuf)
        throw std::invalid_argument("stream " + std::to_string(id) +
                                    ": cum_rebuf decreases over time");

    StreamSummary s;
    s.stream_id = id;
    const double session_start = rows.sent.empty() ? 0.0 : rows.sent.front()->time;
    const auto startup = std::find_if(rows.buffer.begin(), rows.buffer.end(), [](const auto* r) {
      return r->event == BufferEvent::startup;
    });
    if (startup != rows.buffer.end()) {
      s.startup_time = (*startup)->time - session_start;
      s.watch_time = rows.buffer.back()->time - (*startup)->time;
      s.stall_time = rows.buffer.back()->cum_rebuf;
    }
    std::vector<double> q, d;
    for (const auto* r : rows.sent) {
      if (!rows.acked.contains(r->video_ts)) continue;
      q.push_back(ssim_to_db(r->ssim_index));
      d.push_back(1.0);
    }
    finish_summary(s, q, d);
    out.push_back(s);
  }
  return out;
}

double aggregate_stall_ratio(std::span<const StreamSummary> summaries) {
  double stall = 0.0, watch = 0.0;
  for (const auto* s : eligible_of(summaries)) {
    stall += s->stall_time;
    watch += s->watch_time;
  }
  return pooled_ratio(stall, watch);
}

SsimAggregate aggregate_ssim(std::span<const StreamSummary> summaries) {
  std::vector<double> x, w;
  for (const auto* s : eligible_of(summaries)) {
    x.push_back(*s->mean_ssim_db);
    w.push_back(s->watch_time);
  }
  if (x.empty()) throw std::invalid_argument("no eligible streams with SSIM");
  SsimAggregate out;
  out.mean_db = weighted_mean(x, w);
  if (x.size() < 2) return out;
  double sw = 0.0, sw2 = 0.0, swd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sw2 += w[i] * w[i];
    swd += w[i] * (x[i] - out.mean_db) * (x[i] - out.mean_db);
  }
  const double n_eff = sw * sw / sw2;
  out.standard_error = n_eff > 1.0 ? std::sqrt(swd / sw / (n_eff - 1.0)) : 0.0;
  return out;
}

Interval bootstrap_stall_ci(std::span<const StreamSummary> summaries,
                            const BootstrapOptions& options) {
  auto streams = eligible_of(summaries);
  if (streams.size() < 2) throw std::invalid_argument("bootstrap needs at least two eligible streams");
  if (options.resamples == 0) throw std::invalid_argument("bootstrap needs resamples");
  if (!(options.level > 0.0 && options.level < 1.0))
    throw std::invalid_argument("confidence level must be in (0, 1)");

  std::stable_sort(streams.begin(), streams.end(),
                   [](const auto* a, const auto* b) { return a->watch_time < b->watch_time; });
  // Groups of at least two streams; thin groups merge into their neighbours.
  const std::size_t n = streams.size();
  const std::size_t groups = std::clamp<std::size_t>(options.strata, 1, n / 2);
  std::vector<std::size_t> bounds;
  for (std::size_t g = 0; g <= groups; ++g) bounds.push_back(g * n / groups);

  std::mt19937_64 rng(options.seed);
  std::vector<double> stats;
  stats.reserve(options.resamples);
  for (std::size_t b = 0; b < options.resamples; ++b) {
    double stall = 0.0, watch = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      std::uniform_int_distribution<std::size_t> pick(bounds[g], bounds[g + 1] - 1);
      for (std::size_t k = bounds[g]; k < bounds[g + 1]; ++k) {
        const auto* s = streams[pick(rng)];
        stall += s->stall_time;
        watch += s->watch_time;
      }
    }
    stats.push_back(pooled_ratio(stall, watch));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - options.level;
  return {quantile(stats, alpha / 2.0), quantile(stats, 1.0 - alpha / 2.0)};
}

SchemeReport make_scheme_report(std::string scheme, std::span<const StreamSummary> summaries,
                                const BootstrapOptions& options) {
  SchemeReport r;
  r.scheme = std::move(scheme);
  const auto streams = eligible_of(summaries);
  r.streams = streams.size();
  if (streams.empty()) return r;
  for (const auto* s : streams) r.total_watch_time += s->watch_time;
  r.stall_ratio = aggregate_stall_ratio(summaries);
  r.stall_ci = streams.size() >= 2 ? bootstrap_stall_ci(summaries, options)
                                   : Interval{r.stall_ratio, r.stall_ratio};
  const auto ssim = aggregate_ssim(summaries);
  r.mean_ssim_db = ssim.mean_db;
  const double half = ssim.standard_error ? kZ95 * *ssim.standard_error : 0.0;
  r.ssim_ci = {ssim.mean_db - half, ssim.mean_db + half};
  std::vector<double> v, w;
  for (const auto* s : streams) {
    v.push_back(s->ssim_variation_db);
    w.push_back(s->watch_time);
  }
  r.ssim_variation_db = weighted_mean(v, w);
  return r;
}

Comparison compare_schemes(std::vector<SchemeReport> reports) {
  Comparison c;
  c.reports = std::move(reports);
  for (std::size_t i = 0; i < c.reports.size(); ++i)
    for (std::size_t j = i + 1; j < c.reports.size(); ++j)
      if (!c.reports[i].stall_ci.overlaps(c.reports[j].stall_ci)) c.distinguishable.emplace_back(i, j);
  return c;
}

std::string format_table(const Comparison& comparison) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "scheme" << std::right << std::setw(9) << "streams"
     << std::setw(12) << "watch (h)" << std::setw(26) << "time stalled % [95% CI]"
     << std::setw(26) << "mean SSIM dB [95% CI]" << std::setw(12) << "SSIM var" << '\n';
  for (const auto& r : comparison.reports) {
    std::ostringstream stall, ssim;
    stall << std::fixed << std::setprecision(3) << 100 * r.stall_ratio << " [" << 100 * r.stall_ci.lower
          << ", " << 100 * r.stall_ci.upper << "]";
    ssim << std::fixed << std::setprecision(2) << r.mean_ssim_db << " [" << r.ssim_ci.lower << ", "
         << r.ssim_ci.upper << "]";
    os << std::left << std::setw(18) << r.scheme << std::right << std::setw(9) << r.streams
       << std::setw(12) << std::fixed << std::setprecision(2) << r.total_watch_time / 3600.0
       << std::setw(26) << stall.str() << std::setw(26) << ssim.str() << std::setw(12)
       << std::setprecision(3) << r.ssim_variation_db << '\n';
  }
  for (const auto& [i, j] : comparison.distinguishable)
    os << "distinguishable stall ratios: " << comparison.reports[i].scheme << " vs "
       << comparison.reports[j].scheme << '\n';
  return os.str();
}

std::string format_table_csv(const Comparison& comparison) {
  std::string out =
      "scheme,streams,watch_time,stall_ratio,stall_lo,stall_hi,mean_ssim_db,ssim_lo,ssim_hi,"
      "ssim_variation_db\n";
  for (const auto& r : comparison.reports) {
    out += r.scheme + "," + std::to_string(r.streams) + "," + text::format_number(r.total_watch_time) +
           "," + text::format_number(r.stall_ratio) + "," + text::format_number(r.stall_ci.lower) +
           "," + text::format_number(r.stall_ci.upper) + "," + text::format_number(r.mean_ssim_db) +
           "," + text::format_number(r.ssim_ci.lower) + "," + text::format_number(r.ssim_ci.upper) +
           "," + text::format_number(r.ssim_variation_db) + "\n";
  }
  return out;
}

std::vector<SchemeReport> parse_table_csv(std::string_view text_in) {
  std::vector<SchemeReport> out;
  const auto rows = text::lines(text_in);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i], ',');
    const auto num = [&](std::size_t k) {
      const auto v = k < f.size() ? text::parse_number<double>(f[k]) : std::nullopt;
      if (!v) throw std::runtime_error("report table line " + std::to_string(i + 1) + ": bad field");
      return *v;
    };
    if (f.size() != 10) throw std::runtime_error("report table line " + std::to_string(i + 1) +
                                                 ": expected 10 fields");
    SchemeReport r;
    r.scheme = std::string(f[0]);
    r.streams = static_cast<std::size_t>(num(1));
    r.total_watch_time = num(2);
    r.stall_ratio = num(3);
    r.stall_ci = {num(4), num(5)};
    r.mean_ssim_db = num(6);
    r.ssim_ci = {num(7), num(8)};
    r.ssim_variation_db = num(9);
    out.push_back(r);
  }
  return out;
}

std::string format_plot_data(const std::vector<SchemeReport>& reports) {
  std::string out = "name,stall,stall_lo,stall_hi,ssim,ssim_lo,ssim_hi\n";
  for (const auto& r : reports) {
    out += r.scheme + "," + text::format_number(100 * r.stall_ratio) + "," +
           text::format_number(100 * r.stall_ci.lower) + "," +
           text::format_number(100 * r.stall_ci.upper) + "," + text::format_number(r.mean_ssim_db) +
           "," + text::format_number(r.ssim_ci.lower) + "," + text::format_number(r.ssim_ci.upper) +
           "\n";
  }
  return out;
}

std::vector<PlotRow> parse_plot_data(std::string_view text_in) {
  std::vector<PlotRow> out;
  const auto rows = text::lines(text_in);
  if (rows.empty() || text::trim(rows.front()) != "name,stall,stall_lo,stall_hi,ssim,ssim_lo,ssim_hi")
    throw std::runtime_error("plot data: missing header");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (text::trim(rows[i]).empty()) continue;
    const auto f = text::split(rows[i], ',');
    if (f.size() != 7) throw std::runtime_error("plot data line " + std::to_string(i + 1) +
                                                ": expected 7 fields");
    double v[6];
    for (std::size_t k = 0; k < 6; ++k) {
      const auto x = text::parse_number<double>(f[k + 1]);
      if (!x) throw std::runtime_error("plot data line " + std::to_string(i + 1) + ": bad number");
      v[k] = *x;
    }
    out.push_back({std::string(f[0]), v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  return out;
}

}  // namespace fugu
