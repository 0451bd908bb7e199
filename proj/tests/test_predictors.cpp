#include "fugu/predictors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace fugu;

TEST_CASE("discretize boundaries") {
  CHECK(discretize(0.0) == 0);
  CHECK(discretize(0.3) == 1);
  CHECK(discretize(10.2) == 20);
  CHECK(discretize(0.2499) == 0);
  CHECK(discretize(0.25) == 1);
  CHECK(discretize(0.75) == 2);
  CHECK(discretize(9.7499) == 19);
  CHECK(discretize(9.75) == 20);
  CHECK_THROWS(discretize(-0.1));
}

TEST_CASE("bin representatives") {
  CHECK(bin_representative(0) == 0.125);
  CHECK(bin_representative(1) == 0.5);
  CHECK(bin_representative(3) == 1.5);
  CHECK(bin_representative(20) == 10.0);
  CHECK_THROWS(bin_representative(21));
  for (std::size_t k = 0; k < kTimeBins; ++k) CHECK(discretize(bin_representative(k)) == k);
}

TEST_CASE("distributions") {
  const auto u = TransmissionDistribution::uniform();
  double sum = 0;
  for (std::size_t k = 0; k < kTimeBins; ++k) sum += u[k];
  CHECK(sum == doctest::Approx(1.0));
  CHECK(u.argmax() == 0);
  CHECK(TransmissionDistribution::point_mass(4).argmax() == 4);
  CHECK(TransmissionDistribution::point_mass(4).support_size() == 1);
  std::vector<double> bad(kTimeBins, 0.1);
  CHECK_THROWS(TransmissionDistribution::from_probabilities(bad));
  std::vector<double> neg(kTimeBins, 0.0);
  neg[0] = 1.5;
  neg[1] = -0.5;
  CHECK_THROWS(TransmissionDistribution::from_probabilities(neg));
}

TEST_CASE("TTP input layout") {
  const auto x = build_ttp_input({}, TransportStats{}, 1e6);
  REQUIRE(x.size() == 22);
  CHECK(x.head(21).isZero());
  CHECK(x(21) == 1.0);

  std::vector<ChunkRecord> same(8, {5e5, 0.4});
  const TransportStats stats{20, 5, 0.05, 0.06, 1e6};
  const auto full = build_ttp_input(same, stats, 2e6);
  for (int i = 1; i < 8; ++i) {
    CHECK(full(i) == full(0));
    CHECK(full(8 + i) == full(8));
  }
  const auto other = build_ttp_input(same, stats, 3e6);
  CHECK(other.head(21) == full.head(21));
  CHECK(other(21) != full(21));
}

TEST_CASE("short history is right-aligned with zero fill") {
  std::vector<ChunkRecord> two{{1e6, 1.0}, {2e6, 2.0}};
  const auto x = build_ttp_input(two, TransportStats{}, 0.0);
  CHECK(x.head(6).isZero());
  CHECK(x(6) == 1.0);
  CHECK(x(7) == 2.0);
  CHECK(x.segment(8, 6).isZero());
  CHECK(x(14) == 1.0);
  CHECK(x(15) == 2.0);
}

TEST_CASE("zero net predicts uniform") {
  const auto net = nn::Mlp<double>::zeros(default_predictor_spec(PredictorVariant::full, 0));
  const auto in = TtpInput::from_history({}, TransportStats{}, 1e6);
  const auto d = ttp_predict(net, in);
  for (std::size_t k = 0; k < kTimeBins; ++k) CHECK(d[k] == doctest::Approx(1.0 / 21.0));
  CHECK(ttp_point_predict(net, in) == 0.125);
  const auto wrong = nn::Mlp<double>::zeros({5, {}, 21, 0});
  CHECK_THROWS(ttp_predict(wrong, in));
}

namespace {

nn::Mlp<double> bias_net(std::size_t hot, double shift) {
  auto net = nn::Mlp<double>::zeros({22, {}, 21, 0});
  net.layers()[0].bias.setConstant(shift);
  net.layers()[0].bias(static_cast<Eigen::Index>(hot)) += 50.0;
  return net;
}

}  // namespace

TEST_CASE("point prediction is the argmax bin's representative") {
  const auto in = TtpInput::from_history({}, TransportStats{}, 1e6);
  CHECK(ttp_point_predict(bias_net(3, 0.0), in) == 1.5);
  CHECK(ttp_point_predict(bias_net(3, 123.0), in) == 1.5);
  const TransmissionTimePredictor point(PredictorVariant::point, bias_net(3, 0.0));
  const auto d = point.predict(in);
  CHECK(d[3] == 1.0);
  CHECK(d.support_size() == 1);
}

TEST_CASE("harmonic mean") {
  ThroughputHistory h;
  for (double x : {1.0, 1.0, 1.0, 1.0, 1.0}) h.push(x * 1e6);
  CHECK(hm_predict(h) == doctest::Approx(1e6));
  ThroughputHistory g;
  for (double x : {1.0, 2.0, 4.0, 4.0, 4.0}) g.push(x * 1e6);
  CHECK(hm_predict(g) == doctest::Approx(5.0 / 2.25 * 1e6));
  ThroughputHistory c;
  c.push(2e6);
  c.push(2e6);
  CHECK(hm_predict(c) == doctest::Approx(2e6));
  CHECK_THROWS(hm_predict(ThroughputHistory{}));
  CHECK_THROWS(c.push(0.0));
  ThroughputHistory w;
  for (int i = 0; i < 7; ++i) w.push(1e6 * (i + 1));
  CHECK(w.size() == 5);
}

TEST_CASE("throughput-only conversion") {
  CHECK(throughput_time(0.5e6, 1e6) == 0.5);
  CHECK(throughput_time(1.0e6, 1e6) / throughput_time(0.5e6, 1e6) == 2.0);
  CHECK_THROWS(throughput_time(1.0, 0.0));

  const std::size_t k = discretize_throughput(1e6);
  const double rate = throughput_representative(k);
  std::vector<double> probs(kThroughputBins, 0.0);
  probs[k] = 1.0;
  const auto d1 = time_distribution_from_throughput(probs, 0.5 * rate);
  const auto d2 = time_distribution_from_throughput(probs, 1.0 * rate);
  CHECK(d1.argmax() == discretize(0.5));
  CHECK(d2.argmax() == discretize(1.0));

  for (std::size_t b = 1; b < kThroughputBins; ++b)
    CHECK(throughput_representative(b) > throughput_representative(b - 1));
  CHECK(discretize_throughput(throughput_representative(7)) == 7);
}

TEST_CASE("throughput network ignores candidate size") {
  const auto net = nn::Mlp<double>::initialize(default_predictor_spec(PredictorVariant::throughput, 3));
  CHECK(net.input_dim() == 21);
  std::vector<ChunkRecord> h(8, {1e6, 1.0});
  auto a = TtpInput::from_history(h, TransportStats{}, 1e6);
  auto b = TtpInput::from_history(h, TransportStats{}, 4e6);
  CHECK(throughput_distribution(net, a) == throughput_distribution(net, b));
}

TEST_CASE("predictor variants and serialization") {
  for (auto v : {PredictorVariant::full, PredictorVariant::point, PredictorVariant::throughput,
                 PredictorVariant::linear}) {
    CHECK(predictor_variant_from_string(to_string(v)) == v);
    const TransmissionTimePredictor p(v, nn::Mlp<double>::initialize(default_predictor_spec(v, 5)));
    std::stringstream ss;
    p.write(ss);
    CHECK(TransmissionTimePredictor::read(ss) == p);
  }
  CHECK(default_predictor_spec(PredictorVariant::full, 0).hidden_layers ==
        std::vector<Eigen::Index>{64, 64});
  CHECK(default_predictor_spec(PredictorVariant::linear, 0).hidden_layers.empty());
  CHECK(default_predictor_spec(PredictorVariant::full, 0, true).input_dim == 23);
  CHECK_THROWS(predictor_variant_from_string("bogus"));
}

TEST_CASE("horizon feature") {
  const TransmissionTimePredictor p(
      PredictorVariant::full,
      nn::Mlp<double>::initialize(default_predictor_spec(PredictorVariant::full, 5, true)), 5);
  const auto in = TtpInput::from_history({}, TransportStats{}, 1e6);
  const auto x = with_horizon_feature(ttp_features(in), 2, 5);
  CHECK(x.size() == 23);
  CHECK(x(22) == doctest::Approx(0.4));
  CHECK_NOTHROW(p.predict(in, 4));
}

TEST_CASE("learns T = size / rate") {
  std::mt19937_64 rng(17);
  const std::vector<double> rates{0.5e6, 1e6, 2e6, 4e6};
  const std::vector<double> times{0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  nn::Dataset<double> data;
  const Eigen::Index n = 2400;
  data.inputs.resize(22, n);
  data.weights = Eigen::VectorXd::Ones(n);
  std::vector<TtpInput> inputs;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = rates[rng() % rates.size()];
    const double t = times[rng() % times.size()];
    std::vector<ChunkRecord> h(8, {rate * 1.0, 1.0});
    auto in = TtpInput::from_history(h, TransportStats{}, rate * t);
    data.inputs.col(i) = ttp_features(in);
    data.targets.push_back(static_cast<Eigen::Index>(discretize(t)));
    inputs.push_back(in);
  }
  const auto init = nn::Mlp<double>::initialize(default_predictor_spec(PredictorVariant::full, 1));
  const auto net = nn::train(init, data, {0.05, 32, 150, 2}).net;
  double mass = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    mass += ttp_predict(net, inputs[static_cast<std::size_t>(i)])[static_cast<std::size_t>(
        data.targets[static_cast<std::size_t>(i)])];
  CHECK(mass / static_cast<double>(n) >= 0.9);
}
