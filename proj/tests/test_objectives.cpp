#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>

#include "cecmmr/errors.hpp"
#include "cecmmr/objectives.hpp"
#include "support.hpp"

using namespace cecmmr;

namespace {

struct Fixture {
  Model model;
  Matrix x;
  Vector y;
};

Fixture make_fixture(std::uint64_t seed, std::size_t d, std::size_t width, std::size_t k,
                     std::size_t n = 6) {
  std::mt19937_64 rng(seed);
  NetworkConfig c;
  c.input_dim = d;
  c.hidden_width = width;
  c.hidden_layers = 1 + seed % 2;
  c.dropout_rate = 0.0;
  c.seed = seed;
  Fixture f{init_model(c, k, {}), Matrix(n, d), Vector(n)};
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : f.x.flat()) v = dist(rng);
  for (double& v : f.y) v = dist(rng);
  return f;
}

}  // namespace

TEST_CASE("objective values are minus the mean of the per-sample terms") {
  std::mt19937_64 rng(1);
  std::vector<MixtureParams> ps;
  Vector ys;
  for (int j = 0; j < 5; ++j) {
    ps.push_back(testsupport::random_mixture(rng, 3));
    ys.push_back(std::normal_distribution<double>(0, 1)(rng));
  }
  const auto g = gmm_objective(ps, ys);
  const auto c = cec_objective(ps, ys);
  double gsum = 0.0, csum = 0.0;
  for (int j = 0; j < 5; ++j) {
    gsum += gmm_log_density(ps[j], ys[j]);
    csum += cec_log_score(ps[j], ys[j]).value;
  }
  CHECK(g.value == doctest::Approx(-gsum / 5).epsilon(1e-14));
  CHECK(c.value == doctest::Approx(-csum / 5).epsilon(1e-14));
  // max <= sum, so the CEC loss is never below the GMM loss.
  CHECK(c.value >= g.value);
}

TEST_CASE("k = 1 makes both objectives identical") {
  std::mt19937_64 rng(2);
  std::vector<MixtureParams> ps;
  Vector ys;
  for (int j = 0; j < 50; ++j) {
    ps.push_back(testsupport::random_mixture(rng, 1));
    ys.push_back(std::normal_distribution<double>(0, 2)(rng));
  }
  for (auto domain : {LossDomain::kLog, LossDomain::kLiteral}) {
    const auto g = gmm_objective(ps, ys, domain);
    const auto c = cec_objective(ps, ys, domain);
    CHECK(std::bit_cast<std::uint64_t>(g.value) == std::bit_cast<std::uint64_t>(c.value));
  }
}

TEST_CASE("objectives reject empty and mismatched batches") {
  std::vector<MixtureParams> none;
  Vector ys;
  CHECK_THROWS_AS(gmm_objective(none, ys), DataError);
  std::vector<MixtureParams> one{{{1.0}, {0.0}, {1.0}}};
  Vector two{0.0, 1.0};
  CHECK_THROWS_AS(cec_objective(one, two), DimensionError);
}

TEST_CASE("parse and print loss names") {
  CHECK(parse_loss_kind("mdn") == LossKind::kGmm);
  CHECK(parse_loss_kind("gmm") == LossKind::kGmm);
  CHECK(parse_loss_kind("cec") == LossKind::kCec);
  CHECK_THROWS_AS(parse_loss_kind("l2"), ConfigError);
  CHECK(parse_loss_domain("literal") == LossDomain::kLiteral);
  CHECK(to_string(LossKind::kCec) == "cec");
  CHECK(to_string(LossDomain::kLog) == "log");
}

TEST_CASE("full model gradient matches finite differences") {
  for (auto kind : {LossKind::kGmm, LossKind::kCec}) {
    for (auto domain : {LossDomain::kLog, LossDomain::kLiteral}) {
      CAPTURE(static_cast<int>(kind));
      CAPTURE(static_cast<int>(domain));
      const Fixture f = make_fixture(3, 2, 4, 3);
      const auto r = testsupport::check_gradients(f.model, f.x, f.y, {kind, domain});
      CHECK(r.checked > 0);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("literal-domain gradient is the log-domain gradient scaled by the term") {
  const Fixture f = make_fixture(5, 2, 3, 2, 1);
  Model work = f.model;
  Rng rng(0);
  // One sample keeps the per-sample scale factor a single number. Eval mode
  // because train-mode batch norm needs two samples.
  const auto fw = forward(work, f.x, Mode::kEval, rng);
  for (auto kind : {LossKind::kGmm, LossKind::kCec}) {
    const auto log_loss = compute_loss({kind, LossDomain::kLog}, fw.params, f.y);
    const auto lit_loss = compute_loss({kind, LossDomain::kLiteral}, fw.params, f.y);
    const Matrix gl = loss_output_gradient(log_loss, fw.params, f.y, f.model.head, fw.trace.head);
    const Matrix gr = loss_output_gradient(lit_loss, fw.params, f.y, f.model.head, fw.trace.head);
    const double s = lit_loss.per_sample_terms[0];
    for (std::size_t i = 0; i < gl.size(); ++i) {
      CHECK(gr.flat()[i] == doctest::Approx(s * gl.flat()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("cec gradient only touches the winning component's mean and sigma") {
  const Fixture f = make_fixture(7, 2, 3, 4, 3);
  Model work = f.model;
  Rng rng(0);
  const auto fw = forward(work, f.x, Mode::kTrain, rng);
  const auto loss = cec_objective(fw.params, f.y);
  const Matrix g = loss_output_gradient(loss, fw.params, f.y, f.model.head, fw.trace.head);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 4; ++i) {
      if (i == loss.argmax_indices[j]) continue;
      CHECK(g(j, f.model.head.mean_row(i)) == 0.0);
      CHECK(g(j, f.model.head.sigma_row(i)) == 0.0);
    }
  }
}
