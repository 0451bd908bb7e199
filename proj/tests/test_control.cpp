#include "fugu/control.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace fugu;

namespace {

Chunk two_versions(double duration = 2.002) {
  return Chunk{0, {{100'000, 14.0, duration}, {200'000, 16.0, duration}}};
}

PlaybackState at(double buffer, double last) {
  PlaybackState s;
  s.buffer = buffer;
  s.last_quality = last;
  return s;
}

// Versions 0..n-1 with point masses on given bins, for one step.
std::vector<TransmissionDistribution> points(std::initializer_list<std::size_t> bins) {
  std::vector<TransmissionDistribution> row;
  for (auto b : bins) row.push_back(TransmissionDistribution::point_mass(b));
  return row;
}

}  // namespace

TEST_CASE("H=1 hand-evaluated decisions") {
  // Version 1 (A): Q=16, T=0.5. Version 0 (B): Q=14, T=0.125.
  const std::vector<Chunk> up{two_versions()};
  const PredictionTable table{points({0, 1})};
  const Horizon h{1, 0.25};
  auto r = mpc_plan(up, at(2.0, 15.0), table, QoeWeights{}, h);
  CHECK(r.version == 1);
  CHECK(r.expected_qoe == doctest::Approx(15.0));
  r = mpc_plan(up, at(0.125, 15.0), table, QoeWeights{}, h);
  CHECK(r.version == 0);
  CHECK(r.expected_qoe == doctest::Approx(13.0));
  CHECK(r.action_values[1] == doctest::Approx(-22.5));
  const auto b = brute_force_plan(up, at(0.125, 15.0), table, QoeWeights{}, h);
  CHECK(b.version == 0);
  CHECK(b.expected_qoe == doctest::Approx(13.0));
}

TEST_CASE("single action, single outcome equals chunk_qoe") {
  const std::vector<Chunk> up{Chunk{0, {{100'000, 12.0, 2.002}}}};
  const PredictionTable table{points({3})};
  const auto r = brute_force_plan(up, at(1.0, 10.0), table, QoeWeights{}, Horizon{1, 0.25});
  CHECK(r.expected_qoe == doctest::Approx(chunk_qoe(up[0].versions[0], 10.0, 1.5, 1.0, QoeWeights{})));
}

TEST_CASE("ties go to the lower version") {
  const std::vector<Chunk> up{Chunk{0, {{100, 15.0, 2.0}, {200, 15.0, 2.0}}}};
  const PredictionTable table{points({1, 1})};
  CHECK(brute_force_plan(up, at(5.0, 15.0), table, QoeWeights{}, Horizon{1, 0.25}).version == 0);
  CHECK(mpc_plan(up, at(5.0, 15.0), table, QoeWeights{}, Horizon{1, 0.25}).version == 0);
}

TEST_CASE("first step with no previous quality has no variation term") {
  const std::vector<Chunk> up{two_versions()};
  PlaybackState s;
  s.buffer = 2.0;
  const auto r = mpc_plan(up, s, PredictionTable{points({0, 1})}, QoeWeights{}, Horizon{1, 0.25});
  CHECK(r.expected_qoe == doctest::Approx(16.0));
}

namespace {

struct Instance {
  std::vector<Chunk> chunks;
  PredictionTable table;
  PlaybackState state;
};

Instance random_instance(std::mt19937_64& rng, std::size_t steps, std::size_t versions,
                         std::size_t bins, bool on_grid) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  for (std::size_t s = 0; s < steps; ++s) {
    Chunk c{s, {}};
    double q = 8.0 + 4.0 * u(rng);
    for (std::size_t v = 0; v < versions; ++v) {
      c.versions.push_back({static_cast<std::int64_t>(100'000 * (v + 1)), q, on_grid ? 2.0 : 2.002});
      q += 0.5 + 3.0 * u(rng);
    }
    in.chunks.push_back(c);
    std::vector<TransmissionDistribution> row;
    for (std::size_t v = 0; v < versions; ++v) {
      std::vector<double> p(kTimeBins, 0.0);
      double total = 0;
      for (std::size_t k = 0; k < bins; ++k) {
        const std::size_t bin = (on_grid ? 1 : 0) + (v + rng()) % 8;
        const double w = 0.1 + u(rng);
        p[bin] += w;
        total += w;
      }
      for (auto& x : p) x /= total;
      row.push_back(TransmissionDistribution::from_probabilities(p));
    }
    in.table.push_back(row);
  }
  in.state.buffer = on_grid ? 0.25 * static_cast<double>(rng() % 40) : 10.0 * u(rng);
  in.state.last_quality = 10.0 + 4.0 * u(rng);
  return in;
}

}  // namespace

TEST_CASE("deterministic predictors on the grid: DP equals brute force exactly") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 60; ++i) {
    const std::size_t steps = 1 + rng() % 3, versions = 1 + rng() % 3;
    const auto in = random_instance(rng, steps, versions, 1, true);
    const Horizon h{steps, 0.25};
    const auto dp = mpc_plan(in.chunks, in.state, in.table, QoeWeights{}, h);
    const auto bf = brute_force_plan(in.chunks, in.state, in.table, QoeWeights{}, h);
    CHECK(dp.expected_qoe == doctest::Approx(bf.expected_qoe).epsilon(1e-12));
    CHECK(dp.version == bf.version);
  }
}

TEST_CASE("randomized instances agree within the discretization bound") {
  std::mt19937_64 rng(99);
  const QoeWeights w;
  const double bound = w.mu * 0.25;
  for (int i = 0; i < 100; ++i) {
    const std::size_t steps = 1 + rng() % 3, versions = 1 + rng() % 3, bins = 1 + rng() % 3;
    const auto in = random_instance(rng, steps, versions, bins, false);
    const Horizon h{steps, 0.25};
    const auto dp = mpc_plan(in.chunks, in.state, in.table, w, h);
    const auto bf = brute_force_plan(in.chunks, in.state, in.table, w, h);
    CHECK(std::abs(dp.expected_qoe - bf.expected_qoe) <= bound);
    std::vector<double> sorted = bf.action_values;
    std::sort(sorted.rbegin(), sorted.rend());
    if (sorted.size() < 2 || sorted[0] - sorted[1] > bound) CHECK(dp.version == bf.version);
  }
}

TEST_CASE("brute force rejects large instances") {
  std::mt19937_64 rng(1);
  auto in = random_instance(rng, 5, 2, 1, true);
  CHECK_THROWS_AS(brute_force_plan(in.chunks, in.state, in.table, QoeWeights{}, Horizon{5, 0.25}),
                  std::invalid_argument);
}

TEST_CASE("point mass H=1 picks the chunk_qoe argmax") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto in = random_instance(rng, 1, 3, 1, false);
    const auto r = mpc_plan(in.chunks, in.state, in.table, QoeWeights{}, Horizon{1, 0.25});
    std::size_t best = 0;
    double best_q = -1e300;
    for (std::size_t v = 0; v < 3; ++v) {
      const double q = chunk_qoe(in.chunks[0].versions[v], *in.state.last_quality,
                                 bin_representative(in.table[0][v].argmax()), in.state.buffer,
                                 QoeWeights{});
      if (q > best_q) best = v, best_q = q;
    }
    CHECK(r.version == best);
  }
}

TEST_CASE("more buffer never lowers expected QoE") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    auto in = random_instance(rng, 3, 3, 1, true);
    const Horizon h{3, 0.25};
    double prev = -1e300;
    for (double b = 0.0; b <= 15.0; b += 0.5) {
      in.state.buffer = b;
      const double q = mpc_plan(in.chunks, in.state, in.table, QoeWeights{}, h).expected_qoe;
      CHECK(q >= prev - 1e-9);
      prev = q;
    }
  }
}

TEST_CASE("planners are deterministic") {
  std::mt19937_64 rng(5);
  const auto in = random_instance(rng, 3, 3, 3, false);
  const Horizon h{3, 0.25};
  const auto a = mpc_plan(in.chunks, in.state, in.table, QoeWeights{}, h);
  const auto b = mpc_plan(in.chunks, in.state, in.table, QoeWeights{}, h);
  CHECK(a.version == b.version);
  CHECK(a.expected_qoe == b.expected_qoe);
  CHECK(a.action_values == b.action_values);
}

TEST_CASE("predictor failure falls back to the lowest version") {
  const std::vector<Chunk> up{two_versions()};
  const PredictionSource failing = [](std::span<const Chunk>) -> PredictionTable {
    throw std::runtime_error("model unavailable");
  };
  const auto r = mpc_plan(up, at(5.0, 15.0), failing, QoeWeights{}, Horizon{1, 0.25});
  CHECK(r.fallback);
  CHECK(r.version == 0);
}

TEST_CASE("harmonic-mean MPC") {
  const std::vector<Chunk> up{Chunk{0, {{500'000, 14.0, 2.002}, {2'000'000, 16.0, 2.002}}}};
  const auto t = deterministic_table(up, 1, 1e6);
  CHECK(t[0][0].argmax() == 1);
  CHECK(t[0][1].argmax() == discretize(2.0));

  ThroughputHistory fast;
  for (int i = 0; i < 5; ++i) fast.push(1e9);
  CHECK(mpc_hm_plan(up, at(5.0, 16.0), fast, QoeWeights{}, Horizon{1, 0.25}).version == 1);

  ThroughputHistory one;
  for (int i = 0; i < 5; ++i) one.push(1e6);
  const auto a = mpc_hm_plan(up, at(1.0, 15.0), one, QoeWeights{}, Horizon{1, 0.25});
  const auto b = mpc_plan(up, at(1.0, 15.0), deterministic_table(up, 1, 1e6), QoeWeights{},
                          Horizon{1, 0.25});
  CHECK(a.version == b.version);
  CHECK(a.expected_qoe == b.expected_qoe);

  const auto cold = mpc_hm_plan(up, at(5.0, 16.0), ThroughputHistory{}, QoeWeights{}, Horizon{1, 0.25});
  CHECK(cold.version == 0);
  const auto warm = mpc_hm_plan(up, at(5.0, 16.0), ThroughputHistory{}, QoeWeights{},
                                Horizon{1, 0.25}, 1e9);
  CHECK(warm.version == 1);
}

TEST_CASE("robust deflation") {
  ThroughputHistory h;
  for (int i = 0; i < 5; ++i) h.push(2e6);
  PredictionErrors none;
  CHECK(robust_throughput(h, none) == hm_predict(h));
  PredictionErrors e;
  e.record(2e6, 1e6);
  CHECK(e.max_error() == doctest::Approx(1.0));
  CHECK(robust_throughput(h, e) == doctest::Approx(1e6));

  const std::vector<Chunk> up{Chunk{0, {{500'000, 14.0, 2.002}, {2'000'000, 16.0, 2.002}}}};
  const auto plain = deterministic_table(up, 1, hm_predict(h));
  const auto halved = deterministic_table(up, 1, robust_throughput(h, e));
  CHECK(bin_representative(halved[0][1].argmax()) == 2 * bin_representative(plain[0][1].argmax()));

  const auto r0 = robust_mpc_hm_plan(up, at(1.0, 15.0), h, none, QoeWeights{}, Horizon{1, 0.25});
  const auto m0 = mpc_hm_plan(up, at(1.0, 15.0), h, QoeWeights{}, Horizon{1, 0.25});
  CHECK(r0.version == m0.version);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1e5, 1e7);
  PredictionErrors many;
  for (int i = 0; i < 20; ++i) {
    many.record(u(rng), u(rng));
    CHECK(robust_throughput(h, many) <= hm_predict(h));
  }
  CHECK(many.size() == 5);
}

TEST_CASE("buffer-based selection") {
  const Chunk c{0, {{1'000'000, 10.0, 2.002}, {2'000'000, 12.0, 2.002}, {3'000'000, 14.0, 2.002}}};
  CHECK(bba_select(c, at(0.0, 0.0), 3.0, 13.5) == 0);
  CHECK(bba_select(c, at(15.0, 0.0), 3.0, 13.5) == 2);
  CHECK(bba_budget(c, 8.25, 3.0, 13.5) == doctest::Approx(2'000'000));
  CHECK(bba_select(c, at(8.25, 0.0), 3.0, 13.5) == 1);

  const Chunk odd{0, {{1'000'000, 10.0, 2.002}, {2'000'000, 13.0, 2.002}, {3'000'000, 12.0, 2.002}}};
  CHECK(bba_select(odd, at(15.0, 0.0), 3.0, 13.5) == 1);

  double prev = 0;
  for (double b = 0; b <= 15.0; b += 0.1) {
    const double budget = bba_budget(c, b, 3.0, 13.5);
    CHECK(budget >= prev);
    prev = budget;
    CHECK(c.versions[bba_select(c, at(b, 0.0), 3.0, 13.5)].size <= std::max(budget, 1e6));
  }
}

TEST_CASE("horizon validation") {
  CHECK_NOTHROW(Horizon{}.validate(15.0));
  CHECK_THROWS(Horizon{0, 0.25}.validate(15.0));
  CHECK_THROWS(Horizon{5, 0.4}.validate(15.0));
}
