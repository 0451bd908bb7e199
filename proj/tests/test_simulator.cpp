#include "fugu/config.hpp"
#include "fugu/pipeline.hpp"
#include "fugu/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>

using namespace fugu;

namespace {

NetworkTrace constant_trace(double rate, double delay = kDefaultBaseDelay) {
  NetworkTrace t;
  t.points = {{0.0, rate}};
  t.base_delay = delay;
  return t;
}

VideoSpec small_video(std::size_t chunks = 120, std::uint64_t seed = 3) {
  VideoGenConfig cfg;
  cfg.chunks = chunks;
  return synth_video(cfg, seed);
}

std::shared_ptr<const TransmissionTimePredictor> untrained(PredictorVariant v) {
  return std::make_shared<TransmissionTimePredictor>(
      v, nn::Mlp<double>::initialize(default_predictor_spec(v, 1)));
}

std::vector<SchemeSpec> all_schemes() {
  return {{"fugu", SchemeKind::fugu, untrained(PredictorVariant::full)},
          {"fugu_point", SchemeKind::fugu_point, untrained(PredictorVariant::full)},
          {"mpc_hm", SchemeKind::mpc_hm, nullptr},
          {"robust_mpc_hm", SchemeKind::robust_mpc_hm, nullptr},
          {"bba", SchemeKind::bba, nullptr}};
}

}  // namespace

TEST_CASE("load_trace examples") {
  const auto one = load_trace("0,125000");
  REQUIRE(one.points.size() == 1);
  CHECK(one.capacity_at(123.0) == 125000.0);
  const auto step = load_trace("0,125000\n10,250000\n");
  CHECK(step.capacity_at(9.99) == 125000.0);
  CHECK(step.capacity_at(10.0) == 250000.0);
  const auto commented = load_trace("# header\n0,1\n\n5,2\n");
  CHECK(commented.points.size() == 2);
  CHECK_THROWS(load_trace(""));
  CHECK_THROWS(load_trace("# only a comment\n"));
}

TEST_CASE("load_trace errors carry line numbers") {
  auto message = [](std::string_view text) {
    try {
      load_trace(text);
    } catch (const std::exception& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("0,1\n5,x\n").find("line 2") != std::string::npos);
  CHECK(message("0,1\n5,2\n4,3\n").find("line 3") != std::string::npos);
  CHECK(message("0,1\n5,-2\n").find("line 2") != std::string::npos);
  CHECK(message("1,1\n").find("line 1") != std::string::npos);
  CHECK(message("0,1,2\n").find("line 1") != std::string::npos);
}

TEST_CASE("trace text round-trips") {
  const auto t = synth_trace(TraceGenConfig{}, 4);
  const auto back = load_trace(format_trace(t), t.base_delay);
  REQUIRE(back.points.size() == t.points.size());
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    CHECK(back.points[i].time == t.points[i].time);
    CHECK(back.points[i].capacity == t.points[i].capacity);
  }
}

TEST_CASE("transmit examples") {
  CHECK(*transmit(125000, constant_trace(125000, 0.04), 0.0) == doctest::Approx(1.04).epsilon(1e-12));
  NetworkTrace piecewise;
  piecewise.points = {{0.0, 250000}, {0.25, 62500}};
  piecewise.base_delay = 0.0;
  CHECK(*transmit(125000, piecewise, 0.0) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(*transmit(1e-9, constant_trace(125000, 0.04), 3.0) == doctest::Approx(0.04).epsilon(1e-6));
}

TEST_CASE("transmit holds the final capacity and elapses zero-capacity gaps") {
  NetworkTrace t;
  t.points = {{0.0, 1000}, {1.0, 0.0}, {2.0, 500}};
  t.base_delay = 0.0;
  CHECK(*transmit(1500, t, 0.0) == doctest::Approx(3.0));
  CHECK(*transmit(1000, t, 100.0) == doctest::Approx(2.0));
  NetworkTrace dead;
  dead.points = {{0.0, 1000}, {1.0, 0.0}};
  dead.base_delay = 0.0;
  CHECK_FALSE(transmit(5000, dead, 0.0).has_value());
}

TEST_CASE("transmit is monotone in size") {
  const auto t = synth_trace(TraceGenConfig{}, 9);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> start(0.0, 3000.0), size(1e3, 5e6);
  for (int i = 0; i < 300; ++i) {
    const double s = start(rng), a = size(rng), b = a + size(rng);
    CHECK(*transmit(a, t, s) <= *transmit(b, t, s));
  }
}

TEST_CASE("synthetic transport stats") {
  const auto cold = synth_transport_stats(std::nullopt, 0.04);
  CHECK(cold.delivery_rate == 0.0);
  CHECK(cold.cwnd == 0.0);
  CHECK(cold.in_flight == 0.0);
  CHECK(cold.min_rtt == 0.04);
  CHECK(cold.srtt == 0.04);
  CHECK(synth_transport_stats(ChunkRecord{1e6, 1.0}, 0.04).delivery_rate == 1e6);
  CHECK(synth_transport_stats(ChunkRecord{1.5e6, 1.0}, 0.04).cwnd == doctest::Approx(40.0));
}

TEST_CASE("zero-capacity trace aborts as never delivered") {
  const auto video = small_video(20);
  auto scheme = make_scheme({"bba", SchemeKind::bba, nullptr});
  SessionConfig cfg;
  cfg.watch_duration = 30.0;
  const auto out = run_session(cfg, constant_trace(0.0), video, *scheme);
  CHECK(out.result.aborted);
  CHECK(out.result.abort_reason == "never delivered");
  CHECK(out.result.accounting_holds());
  CHECK(out.result.chunks.empty());
}

TEST_CASE("an unconstrained network gives max quality and no stalls") {
  const auto video = small_video(40);
  for (const auto& spec : all_schemes()) {
    if (scheme_needs_predictor(spec.kind)) continue;
    auto scheme = make_scheme(spec);
    SessionConfig cfg;
    cfg.watch_duration = 60.0;
    const auto out = run_session(cfg, constant_trace(1e8), video, *scheme);
    CHECK(out.result.stall_us == 0);
    INFO(spec.name);
    const auto& last = out.result.chunks.back();
    // Downloads resume below max_buffer - chunk_duration, under BBA's
    // cushion top, so BBA settles one version below the top.
    const std::size_t top = video.version_count() - 1;
    CHECK(last.version == (spec.kind == SchemeKind::bba ? top - 1 : top));
  }
}

TEST_CASE("accounting, buffer bounds and row counts on random runs") {
  ExperimentSpec spec;
  spec.schemes = all_schemes();
  for (std::uint64_t s = 0; s < 4; ++s) spec.traces.push_back(synth_trace(TraceGenConfig{}, s));
  spec.videos = {small_video(300)};
  spec.sessions_per_arm = 8;
  spec.seed = 21;
  spec.watch.median = 60.0;
  const auto r = run_experiment(spec);
  REQUIRE(r.sessions.size() == 40);
  for (const auto& s : r.sessions) {
    CHECK(s.result.accounting_holds());
    CHECK(s.telemetry.video_sent.size() >= s.telemetry.video_acked.size());
    CHECK(s.telemetry.video_sent.size() == s.result.chunks.size() + (s.result.aborted ? 1u : 0u));
    for (const auto& row : s.telemetry.client_buffer) {
      CHECK(row.buffer >= 0.0);
      CHECK(row.buffer <= spec.weights.max_buffer);
    }
    for (const auto& c : s.result.chunks) {
      CHECK(c.buffer_before >= 0.0);
      CHECK(c.buffer_after <= spec.weights.max_buffer);
    }
  }
}

TEST_CASE("experiments are deterministic and assignments are disjoint") {
  ExperimentSpec spec;
  spec.schemes = {{"mpc_hm", SchemeKind::mpc_hm, nullptr}, {"bba", SchemeKind::bba, nullptr}};
  spec.traces = {synth_trace(TraceGenConfig{}, 1), synth_trace(TraceGenConfig{}, 2)};
  spec.videos = {small_video(200)};
  spec.sessions_per_arm = 6;
  spec.seed = 5;
  spec.watch.median = 40.0;
  const auto a = run_experiment(spec), b = run_experiment(spec);
  CHECK(a.arm_telemetry(0) == b.arm_telemetry(0));
  CHECK(a.arm_telemetry(1) == b.arm_telemetry(1));
  std::map<std::size_t, int> per_arm;
  std::set<std::uint64_t> ids;
  for (const auto& x : a.assignments) {
    per_arm[x.scheme]++;
    ids.insert(x.stream_id);
  }
  CHECK(per_arm[0] == 6);
  CHECK(per_arm[1] == 6);
  CHECK(ids.size() == 12);

  auto other = spec;
  other.seed = 6;
  CHECK_FALSE(run_experiment(other).arm_telemetry(0) == a.arm_telemetry(0));
}

TEST_CASE("watch durations are heavy-tailed") {
  ExperimentSpec spec;
  spec.schemes = {{"bba", SchemeKind::bba, nullptr}};
  spec.traces = {constant_trace(1e6)};
  spec.videos = {small_video(10)};
  spec.sessions_per_arm = 1000;
  spec.seed = 77;
  const auto a = draw_assignments(spec);
  const auto tail = std::count_if(a.begin(), a.end(), [&](const SessionAssignment& x) {
    return x.watch_duration > 10.0 * spec.watch.median;
  });
  CHECK(static_cast<double>(tail) / 1000.0 >= 0.01);
}

TEST_CASE("video spec text round-trips and validates") {
  const auto v = small_video(15);
  const auto back = load_video_spec(format_video_spec(v));
  REQUIRE(back.chunks.size() == v.chunks.size());
  for (std::size_t i = 0; i < v.chunks.size(); ++i)
    for (std::size_t k = 0; k < v.version_count(); ++k) {
      CHECK(back.chunks[i].versions[k].size == v.chunks[i].versions[k].size);
      CHECK(back.chunks[i].versions[k].quality == v.chunks[i].versions[k].quality);
    }
  CHECK_THROWS(load_video_spec("chunks 1 duration 2.002 versions 2\n100:10 50:12\n"));
  CHECK_THROWS(load_video_spec("chunks 2 duration 2.002 versions 1\n100:10\n"));
}

TEST_CASE("Fugu trained on a constant link does not stall") {
  const double rate = 1e6;
  const auto trace = constant_trace(rate);
  const auto video = small_video(300, 8);
  ExperimentSpec spec;
  spec.schemes = {{"mpc_hm", SchemeKind::mpc_hm, nullptr},
                  {"robust_mpc_hm", SchemeKind::robust_mpc_hm, nullptr},
                  {"bba", SchemeKind::bba, nullptr}};
  spec.traces = {trace};
  spec.videos = {video};
  spec.sessions_per_arm = 6;
  spec.seed = 2;
  spec.watch.median = 120.0;
  const auto collected = run_experiment(spec);
  Telemetry all;
  for (std::size_t k = 0; k < spec.schemes.size(); ++k) all.append(collected.arm_telemetry(k));

  TrainingSettings settings;
  settings.train = {0.01, 64, 40, 1};
  const auto trained = train_predictor(all, settings);
  auto fugu = std::make_shared<TransmissionTimePredictor>(trained.predictor);

  ExperimentSpec eval = spec;
  eval.schemes = {{"fugu", SchemeKind::fugu, fugu}};
  eval.seed = 3;
  const auto r = run_experiment(eval);
  const double budget = rate * video.chunk_duration;
  std::size_t checked = 0, close = 0;
  for (const auto& s : r.sessions) {
    CHECK(s.result.stall_us == 0);
    for (std::size_t i = 5; i < s.result.chunks.size(); ++i) {
      const auto& c = s.result.chunks[i];
      std::size_t feasible = 0;
      for (std::size_t k = 0; k < video.version_count(); ++k)
        if (static_cast<double>(video.chunks[c.index].versions[k].size) <= budget) feasible = k;
      ++checked;
      if (c.version + 1 >= feasible) ++close;
    }
  }
  REQUIRE(checked > 0);
  CHECK(static_cast<double>(close) / static_cast<double>(checked) >= 0.9);
}
