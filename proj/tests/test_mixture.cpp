#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cecmmr/errors.hpp"
#include "cecmmr/mixture.hpp"
#include "support.hpp"

using namespace cecmmr;

namespace {

Matrix random_features(std::mt19937_64& rng, std::size_t n, std::size_t w) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(n, w);
  for (double& v : m.flat()) v = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("zero pre-activations give uniform weights and the mid sigma") {
  HeadState head = init_head(4, 3, {}, 1);
  const std::vector<double> zeros(9, 0.0);
  const MixtureParams p = mixture_from_outputs(head, zeros);
  for (double w : p.weights) CHECK(w == doctest::Approx(1.0 / 3.0));
  for (double s : p.sigmas) CHECK(s == doctest::Approx(0.5005).epsilon(1e-12));
  for (double m : p.means) CHECK(m == 0.0);
}

TEST_CASE("predict_mixture keeps the simplex and sigma bounds") {
  std::mt19937_64 rng(2);
  const SigmaBounds bounds{1e-3, 1.0};
  HeadState head = init_head(6, 5, bounds, 3);
  for (double& w : head.weight.flat()) w *= 40.0;  // push into saturation
  const auto out = predict_mixture(head, random_features(rng, 64, 6));
  REQUIRE(out.params.size() == 64);
  for (const auto& p : out.params) {
    double total = 0.0;
    for (double w : p.weights) total += w;
    CHECK(std::abs(total - 1.0) < 1e-9);
    for (double s : p.sigmas) {
      CHECK(s > bounds.min);
      CHECK(s <= bounds.max);
    }
    CHECK(is_valid_mixture(p, bounds));
  }
}

TEST_CASE("head outputs are the fused affine map") {
  std::mt19937_64 rng(4);
  HeadState head = init_head(3, 2, {}, 5);
  const Matrix f = random_features(rng, 2, 3);
  const auto out = predict_mixture(head, f);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t r = 0; r < 6; ++r) {
      double z = head.bias[r];
      for (std::size_t c = 0; c < 3; ++c) z += head.weight(r, c) * f(j, c);
      CHECK(out.trace.outputs(j, r) == doctest::Approx(z).epsilon(1e-14));
    }
    CHECK(out.params[j].means[1] == doctest::Approx(out.trace.outputs(j, head.mean_row(1))));
  }
}

TEST_CASE("initial means are spread over the target range") {
  HeadState head = init_head(4, 4, {}, 9);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(head.bias[head.mean_row(i)] > head.bias[head.mean_row(i - 1)]);
  }
  CHECK(head.bias[head.mean_row(0)] == doctest::Approx(-head.bias[head.mean_row(3)]));
  CHECK(init_head(4, 1, {}, 9).bias[1] == 0.0);
}

TEST_CASE("head_backward matches finite differences of a linear functional") {
  std::mt19937_64 rng(6);
  const HeadState head = init_head(3, 2, {}, 7);
  const Matrix f = random_features(rng, 4, 3);
  Matrix coef(4, 6);
  for (double& v : coef.flat()) v = std::normal_distribution<double>(0, 1)(rng);
  auto loss = [&](const HeadState& h, const Matrix& feats) {
    const auto out = predict_mixture(h, feats);
    double s = 0.0;
    for (std::size_t i = 0; i < coef.size(); ++i) s += coef.flat()[i] * out.trace.outputs.flat()[i];
    return s;
  };
  const auto out = predict_mixture(head, f);
  Matrix feature_grad;
  const auto g = head_backward(head, out.trace, coef, feature_grad);
  const double h = 1e-6;
  HeadState probe = head;
  for (std::size_t i = 0; i < probe.weight.size(); ++i) {
    double& w = probe.weight.flat()[i];
    const double saved = w;
    w = saved + h;
    const double up = loss(probe, f);
    w = saved - h;
    const double down = loss(probe, f);
    w = saved;
    CHECK(testsupport::relative_error(g.weight.flat()[i], (up - down) / (2 * h)) < 1e-6);
  }
  Matrix fp = f;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const double saved = fp.flat()[i];
    fp.flat()[i] = saved + h;
    const double up = loss(head, fp);
    fp.flat()[i] = saved - h;
    const double down = loss(head, fp);
    fp.flat()[i] = saved;
    CHECK(testsupport::relative_error(feature_grad.flat()[i], (up - down) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("gaussian densities") {
  const double y = 0.3, mu = -0.2, s = 0.7;
  const double expect = std::exp(-0.5 * (y - mu) * (y - mu) / (s * s)) / (s * std::sqrt(2 * std::numbers::pi));
  CHECK(gaussian_pdf(y, mu, s) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(gaussian_log_pdf(y, mu, s) == doctest::Approx(std::log(expect)).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_pdf(0.0, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(gaussian_log_pdf(0.0, 0.0, -1.0), ConfigError);
}

TEST_CASE("log-domain mixture density agrees with the literal one") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const auto p = testsupport::random_mixture(rng, 1 + t % 6);
    const double y = std::normal_distribution<double>(0, 1.5)(rng);
    CHECK(gmm_log_density(p, y) == doctest::Approx(std::log(gmm_density(p, y))).epsilon(1e-12));
    const auto lit = cec_score(p, y);
    const auto lg = cec_log_score(p, y);
    CHECK(lit.component == lg.component);
    CHECK(lg.value == doctest::Approx(std::log(lit.value)).epsilon(1e-12));
  }
}

TEST_CASE("log-sum-exp survives far tails") {
  MixtureParams p{{0.5, 0.5}, {0.0, 1.0}, {0.01, 0.01}};
  const double ll = gmm_log_density(p, 40.0);
  CHECK(std::isfinite(ll));
  CHECK(gmm_density(p, 40.0) == 0.0);
  const double expect = std::log(0.5) + gaussian_log_pdf(40.0, 1.0, 0.01);
  CHECK(ll == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("cec scores break ties toward the lowest index") {
  MixtureParams p{{0.25, 0.5, 0.25}, {1.0, 0.0, 1.0}, {0.5, 0.5, 0.5}};
  CHECK(cec_score(p, 1.0).component == 0);
  CHECK(cec_log_score(p, 1.0).component == 0);
  MixtureParams zero{{0.0, 1.0}, {0.0, 5.0}, {1.0, 1.0}};
  CHECK(cec_log_score(zero, 0.0).component == 1);
}

TEST_CASE("invalid mixtures are detected") {
  const SigmaBounds b{};
  CHECK_FALSE(is_valid_mixture({{0.6, 0.6}, {0, 0}, {0.5, 0.5}}, b));
  CHECK_FALSE(is_valid_mixture({{0.5, 0.5}, {0, 0}, {0.5, 2.0}}, b));
  CHECK_FALSE(is_valid_mixture({{0.5, 0.5}, {0, 0}, {0.5, 1e-3}}, b));
  CHECK(is_valid_mixture({{0.5, 0.5}, {0, 0}, {0.5, 1.0}}, b));
  CHECK_THROWS_AS(init_head(0, 2, b, 1), ConfigError);
  CHECK_THROWS_AS(init_head(2, 2, SigmaBounds{1.0, 0.5}, 1), ConfigError);
}
