#include "fugu/domain.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace fugu;

TEST_CASE("ssim_to_db closed forms") {
  CHECK(ssim_to_db(0.9) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(ssim_to_db(0.0) == 0.0);
  CHECK(ssim_to_db(0.99) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("ssim_to_db clamps near one and rejects out of range") {
  CHECK(ssim_to_db(1.0) == kMaxSsimDb);
  CHECK(ssim_to_db(1.0 - 1e-7) == kMaxSsimDb);
  CHECK(ssim_to_db(1.0 - 1e-6) == kMaxSsimDb);
  CHECK_THROWS_AS(ssim_to_db(-0.01), std::domain_error);
  CHECK_THROWS_AS(ssim_to_db(1.2), std::domain_error);
  CHECK_THROWS_AS(ssim_to_db(std::nan("")), std::domain_error);
}

TEST_CASE("ssim_to_db is strictly increasing below the clamp") {
  double prev = ssim_to_db(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double s = (1.0 - 1e-6) * i / 1000.0;
    const double db = ssim_to_db(s);
    CHECK(db > prev);
    prev = db;
  }
}

TEST_CASE("db_to_ssim inverts ssim_to_db") {
  for (double s : {0.0, 0.5, 0.9, 0.97, 0.999})
    CHECK(db_to_ssim(ssim_to_db(s)) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("chunk_qoe hand evaluations") {
  const QoeWeights w;
  ChunkVersion v{1000, 16.0, 2.002};
  CHECK(chunk_qoe(v, 15.0, 0.5, 2.0, w) == doctest::Approx(15.0));
  CHECK(chunk_qoe(v, 16.0, 0.0, 0.0, QoeWeights{3.0, 7.0, 15.0}) == 16.0);
  CHECK(chunk_qoe(v, 15.0, 0.5, 0.125, w) == doctest::Approx(-22.5));
}

TEST_CASE("chunk_qoe is non-increasing in transmission time") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const QoeWeights w;
  for (int i = 0; i < 500; ++i) {
    ChunkVersion v{1000, u(rng) + 5, 2.002};
    const double prev = u(rng) + 5, buffer = u(rng);
    const double t1 = u(rng), t2 = t1 + u(rng);
    CHECK(chunk_qoe(v, prev, t2, buffer, w) <= chunk_qoe(v, prev, t1, buffer, w));
  }
}

TEST_CASE("advance_buffer examples") {
  auto s = advance_buffer(5.0, 1.0, 2.002, 15.0);
  CHECK(s.new_buffer == doctest::Approx(6.002));
  CHECK(s.stall == 0.0);
  s = advance_buffer(0.0, 0.0, 2.002, 15.0);
  CHECK(s.new_buffer == doctest::Approx(2.002));
  CHECK(s.stall == 0.0);
  s = advance_buffer(0.5, 2.0, 2.002, 15.0);
  CHECK(s.new_buffer == doctest::Approx(2.002));
  CHECK(s.stall == doctest::Approx(1.5));
  s = advance_buffer(14.0, 0.1, 2.002, 15.0);
  CHECK(s.new_buffer == 15.0);
}

TEST_CASE("advance_buffer stays in range and never stalls when T <= B") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 15.0);
  for (int i = 0; i < 2000; ++i) {
    const double b = u(rng), t = u(rng);
    const auto s = advance_buffer(b, t, 2.002, 15.0);
    CHECK(s.new_buffer >= 0.0);
    CHECK(s.new_buffer <= 15.0);
    CHECK(s.stall >= 0.0);
    if (t <= b) CHECK(s.stall == 0.0);
  }
}

TEST_CASE("value type validation") {
  CHECK_THROWS_AS((ChunkVersion{0, 10.0, 2.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ChunkVersion{10, 10.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ChunkVersion{10, INFINITY, 2.0}.validate()), std::invalid_argument);
  Chunk c{0, {{100, 10.0, 2.0}, {100, 12.0, 2.0}}};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.versions[1].size = 200;
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS((Chunk{0, {}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((QoeWeights{-1.0, 100.0, 15.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((QoeWeights{1.0, -1.0, 15.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((QoeWeights{1.0, 100.0, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("defaults carry the published constants") {
  const QoeWeights w;
  CHECK(w.lambda == 1.0);
  CHECK(w.mu == 100.0);
  CHECK(w.max_buffer == 15.0);
  CHECK(ChunkVersion{}.duration == 2.002);
}
