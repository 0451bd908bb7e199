#include "fugu/data.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace fugu;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSentHeader =
    "time,stream_id,expt_id,video_ts,size,ssim_index,cwnd,in_flight,min_rtt,rtt,delivery_rate\n";

VideoSentRow sent(double t, std::uint64_t stream, std::int64_t ts, std::int64_t size = 1000) {
  VideoSentRow r;
  r.time = t;
  r.stream_id = stream;
  r.video_ts = ts;
  r.size = size;
  r.ssim_index = 0.95;
  r.cwnd = 10;
  r.in_flight = 2;
  r.min_rtt = 0.04;
  r.rtt = 0.05;
  r.delivery_rate = 1e6;
  return r;
}

VideoAckedRow acked(double t, std::uint64_t stream, std::int64_t ts) {
  return {t, stream, 0, ts};
}

Telemetry random_telemetry(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Telemetry t;
  for (int i = 0; i < 50; ++i) {
    auto s = sent(1.6e9 + 1e4 * u(rng), rng() % 5, i * 180180, 1 + static_cast<std::int64_t>(rng() % 5'000'000));
    s.ssim_index = u(rng);
    s.cwnd = 100 * u(rng);
    s.rtt = u(rng) / 3.0;
    t.video_sent.push_back(s);
    if (i % 3) t.video_acked.push_back(acked(s.time + u(rng), s.stream_id, s.video_ts));
    t.client_buffer.push_back({s.time, s.stream_id, 1, static_cast<BufferEvent>(rng() % 4),
                               15 * u(rng), 0.1 * i});
  }
  return t;
}

}  // namespace

TEST_CASE("header-only files parse to zero rows") {
  ParseReport report;
  CHECK(parse_video_sent(kSentHeader, report).empty());
  CHECK(report.rows == 0);
  CHECK(report.malformed == 0);
}

TEST_CASE("invalid rows are skipped and counted") {
  ParseReport report;
  std::string text(kSentHeader);
  text += "1,1,0,0,100,1.2,1,1,0.1,0.1,1\n";
  text += "2,1,0,1,100,0.9,1,1,0.1,0.1,1\n";
  text += "3,1,0,2,-5,0.9,1,1,0.1,0.1,1\n";
  text += "4,1,0,3,100\n";
  const auto rows = parse_video_sent(text, report, "sent.csv");
  CHECK(rows.size() == 1);
  CHECK(report.malformed == 3);
  REQUIRE(report.messages.size() == 3);
  CHECK(report.messages[0].find("sent.csv:2") != std::string::npos);
  CHECK_THROWS(parse_video_sent("bogus header\n", report));
}

TEST_CASE("text round-trip is bit-exact") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = random_telemetry(seed);
    ParseReport report;
    CHECK(parse_video_sent(format_video_sent(t.video_sent), report) == t.video_sent);
    CHECK(parse_video_acked(format_video_acked(t.video_acked), report) == t.video_acked);
    CHECK(parse_client_buffer(format_client_buffer(t.client_buffer), report) == t.client_buffer);
    CHECK(report.malformed == 0);
  }
}

TEST_CASE("archive round-trip through files") {
  const auto dir = fs::temp_directory_path() / "fugu_test_data_archive";
  fs::remove_all(dir);
  const auto t = random_telemetry(42);
  emit_archive(t, dir);
  const auto back = parse_archive(dir);
  CHECK(back.telemetry == t);
  CHECK(back.report.malformed == 0);

  emit_archive(Telemetry{}, dir);
  CHECK(parse_archive(dir).telemetry.empty());
  fs::remove_all(dir);
  CHECK_THROWS_AS(parse_archive(dir), std::runtime_error);
}

TEST_CASE("buffer events serialize as lowercase tokens") {
  for (auto e : {BufferEvent::periodic, BufferEvent::startup, BufferEvent::play, BufferEvent::rebuffer})
    CHECK(buffer_event_from_string(to_string(e)) == e);
  CHECK(to_string(BufferEvent::rebuffer) == "rebuffer");
}

TEST_CASE("join recovers transmission times") {
  const std::vector<VideoSentRow> s{sent(100.0, 1, 0), sent(102.0, 1, 180180), sent(104.0, 1, 360360),
                                    sent(106.0, 2, 0)};
  const std::vector<VideoAckedRow> a{acked(100.8, 1, 0), acked(101.5, 1, 180180), acked(106.3, 2, 0)};
  const auto j = join_transmission_times(s, a);
  REQUIRE(j.chunks.size() == 2);
  CHECK(j.chunks[0].transmission_time == doctest::Approx(0.8));
  CHECK(j.never_acknowledged == 1);
  CHECK(j.rejected == 1);
  CHECK(j.chunks[1].stream_id == 2);
  CHECK(s.size() - a.size() == j.never_acknowledged);

  auto dup = s;
  dup.push_back(sent(110.0, 1, 0));
  CHECK_THROWS_AS(join_transmission_times(dup, a), std::invalid_argument);
}

TEST_CASE("training set targets, weights and window") {
  const double day0 = 20000 * kSecondsPerDay;
  std::vector<VideoSentRow> s;
  std::vector<VideoAckedRow> a;
  for (int d = 0; d < 16; ++d) {
    const double t = day0 + d * kSecondsPerDay + 10.0;
    s.push_back(sent(t, static_cast<std::uint64_t>(d + 1), 0));
    a.push_back(acked(t + 0.8, static_cast<std::uint64_t>(d + 1), 0));
  }
  const auto j = join_transmission_times(s, a);
  TrainingSetOptions opt;
  opt.as_of_day = epoch_day(day0) + 15;
  const auto ex = build_training_set(j, opt);
  CHECK(ex.size() == 14);
  for (const auto& e : ex) {
    CHECK(e.target_bin == 2);
    CHECK(e.target_bin == discretize(e.transmission_time));
    CHECK(e.weight == doctest::Approx(std::pow(0.9, static_cast<double>(e.day_age))));
    CHECK(e.weight > 0.0);
    CHECK(e.weight <= 1.0);
  }
  const auto oldest = std::max_element(ex.begin(), ex.end(), [](auto& x, auto& y) { return x.day_age < y.day_age; });
  CHECK(oldest->day_age == 13);
  CHECK(oldest->weight == doctest::Approx(0.2542).epsilon(1e-3));
  const auto newest = std::min_element(ex.begin(), ex.end(), [](auto& x, auto& y) { return x.day_age < y.day_age; });
  CHECK(newest->weight == 1.0);
}

TEST_CASE("first chunk has empty history; later chunks see prior sizes") {
  std::vector<VideoSentRow> s;
  std::vector<VideoAckedRow> a;
  for (int i = 0; i < 10; ++i) {
    s.push_back(sent(1000.0 + 2 * i, 7, i * 180180, 1000 * (i + 1)));
    a.push_back(acked(1000.5 + 2 * i, 7, i * 180180));
  }
  TrainingSetOptions opt;
  opt.as_of_day = epoch_day(1000.0);
  const auto ex = build_training_set(join_transmission_times(s, a), opt);
  REQUIRE(ex.size() == 10);
  for (bool v : ex[0].input.valid) CHECK_FALSE(v);
  CHECK(ex[0].input.stats.delivery_rate == 1e6);
  CHECK(ex[0].input.candidate_size == 1000.0);
  CHECK(ex[9].input.past_sizes.back() == 9000.0);
  CHECK(ex[9].input.past_sizes.front() == 2000.0);
  CHECK(ex[9].input.past_times.back() == doctest::Approx(0.5));

  opt.horizon_steps = 5;
  const auto h = build_training_set(join_transmission_times(s, a), opt);
  CHECK(h.size() > ex.size());
  const auto d = to_dataset(h, PredictorVariant::full, 5);
  CHECK(d.inputs.rows() == 23);
  CHECK(to_dataset(ex, PredictorVariant::throughput).inputs.rows() == 21);
}
