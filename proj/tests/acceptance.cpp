// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cecmmr/config_io.hpp"
#include "cecmmr/errors.hpp"
#include "cecmmr/evaluation.hpp"
#include "cecmmr/experiment.hpp"
#include "cecmmr/objectives.hpp"
#include "cecmmr/pruning.hpp"
#include "cecmmr/report_io.hpp"
#include "support.hpp"

using namespace cecmmr;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kGradConfigs = 20;
constexpr std::size_t kIdentityDraws = 100000;
constexpr std::size_t kPruneVectors = 10000;
constexpr double kRowSumTolerance = 1e-9;
constexpr double kIdempotenceTolerance = 1e-12;
constexpr std::size_t kToySeeds = 5;
constexpr std::size_t kToyQuorum = 4;
constexpr std::size_t kEllipseMinK = 3, kEllipseMaxK = 8;
constexpr std::size_t kZigzagMinK = 5, kZigzagMaxK = 10;
constexpr double kZigzagLlGap = 0.1;
constexpr double kCirclesMargin = 0.5;
constexpr double kBostonSlack = 0.05;
constexpr std::size_t kBikeQuorum = 3;
constexpr double kOracleTolerance = 1e-9;

const fs::path kProject = CECMMR_PROJECT_DIR;
const fs::path kScratch = fs::path(CECMMR_TEST_TMP_DIR) / "acceptance";

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail, double seconds) {
  std::ostringstream t;
  t.precision(1);
  t << std::fixed << seconds;
  std::cout << id << ' ' << (pass ? "PASS" : "FAIL") << "  " << detail << "  [" << t.str() << "s]"
            << std::endl;
  if (!pass) ++failures;
}

void criterion(const std::string& id, const std::function<std::pair<bool, std::string>()>& body) {
  const auto start = std::chrono::steady_clock::now();
  std::pair<bool, std::string> r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("error: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(id, r.first, r.second, s);
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream o;
  o.precision(precision);
  o << std::fixed << v;
  return o.str();
}

template <class T>
std::string list(const std::vector<T>& values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt(values[i]);
    } else {
      s += std::to_string(values[i]);
    }
  }
  return s + "]";
}

ExperimentConfig shipped(const std::string& name) { return load_config(kProject / "configs" / name); }

ExperimentConfig with_loss(ExperimentConfig c, LossKind kind) {
  c.loss.kind = kind;
  return c;
}

// ---- property criteria ----

std::pair<bool, std::string> gradient_correctness() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> dim(1, 8), width(2, 16), comps(1, 5), layers(1, 3),
      batch(2, 6);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t t = 0; t < kGradConfigs; ++t) {
    NetworkConfig c;
    c.input_dim = dim(rng);
    c.hidden_width = width(rng);
    c.hidden_layers = layers(rng);
    c.dropout_rate = 0.0;
    c.batchnorm_enabled = t % 3 != 2;
    c.seed = rng();
    const std::size_t k = comps(rng);
    const std::size_t n = batch(rng);
    const Model model = init_model(c, k, {});
    Matrix x(n, c.input_dim);
    for (double& v : x.flat()) v = normal(rng);
    Vector y(n);
    for (double& v : y) v = normal(rng);
    const LossConfig loss{t % 2 == 0 ? LossKind::kGmm : LossKind::kCec,
                          t % 4 < 2 ? LossDomain::kLog : LossDomain::kLiteral};
    worst = std::max(worst, testsupport::check_gradients(model, x, y, loss).max_rel_error);
  }
  return {worst < kGradTolerance, std::to_string(kGradConfigs) + " configs, max relative error " +
                                      std::to_string(worst) + " (< " + std::to_string(kGradTolerance) + ")"};
}

MixtureParams bounded_mixture(std::mt19937_64& rng, std::size_t k) {
  // Bounded means and sigmas keep every literal density above the underflow limit.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MixtureParams p;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p.weights.push_back(-std::log(1.0 - u(rng)) + 1e-12);
    total += p.weights.back();
    p.means.push_back(-3.0 + 6.0 * u(rng));
    p.sigmas.push_back(0.25 + 0.75 * u(rng));
  }
  for (double& w : p.weights) w /= total;
  return p;
}

std::pair<bool, std::string> objective_identities() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ydist(-3.0, 3.0);
  std::uniform_int_distribution<std::size_t> kdist(1, 8);
  std::size_t bitwise_bad = 0, order_bad = 0, argmax_bad = 0;
  for (int b = 0; b < 100; ++b) {
    std::vector<MixtureParams> ps;
    Vector ys;
    for (int j = 0; j < 64; ++j) {
      ps.push_back(bounded_mixture(rng, 1));
      ys.push_back(ydist(rng));
    }
    for (auto d : {LossDomain::kLog, LossDomain::kLiteral}) {
      const double g = gmm_objective(ps, ys, d).value;
      const double c = cec_objective(ps, ys, d).value;
      bitwise_bad += std::bit_cast<std::uint64_t>(g) != std::bit_cast<std::uint64_t>(c) ? 1 : 0;
    }
  }
  for (std::size_t t = 0; t < kIdentityDraws; ++t) {
    const auto p = bounded_mixture(rng, kdist(rng));
    const double y = ydist(rng);
    const auto lit = cec_score(p, y);
    const auto lg = cec_log_score(p, y);
    order_bad += lit.value <= gmm_density(p, y) ? 0 : 1;
    argmax_bad += lit.component == lg.component ? 0 : 1;
  }
  const bool pass = bitwise_bad == 0 && order_bad == 0 && argmax_bad == 0;
  return {pass, "k=1 bitwise mismatches " + std::to_string(bitwise_bad) + "/200, CEC>GMM " +
                    std::to_string(order_bad) + ", argmax mismatches " + std::to_string(argmax_bad) +
                    " over " + std::to_string(kIdentityDraws) + " draws"};
}

std::pair<bool, std::string> pruning_properties() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> eps(0.0, 0.3);
  std::uniform_int_distribution<std::size_t> kdist(1, 20);
  std::size_t rows = 0, stochastic_bad = 0, idempotent_bad = 0, monotone_bad = 0;
  while (rows < kPruneVectors) {
    const std::size_t k = kdist(rng);
    std::vector<MixtureParams> ps;
    for (int j = 0; j < 100; ++j) ps.push_back(testsupport::random_mixture(rng, k));
    const double e1 = eps(rng), e2 = e1 + eps(rng);
    const auto a1 = prune_assign(ps, {e1});
    const auto a2 = prune_assign(ps, {e2});
    const auto again = prune_assign(apply_assignment(ps, a1), {e1});
    for (std::size_t j = 0; j < ps.size(); ++j) {
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        total += a1.pruned_weights(j, i);
        monotone_bad += (a2.active(j, i) && !a1.active(j, i)) ? 1 : 0;
        idempotent_bad += (again.active(j, i) != a1.active(j, i) ||
                           std::abs(again.pruned_weights(j, i) - a1.pruned_weights(j, i)) > kIdempotenceTolerance)
                              ? 1
                              : 0;
      }
      stochastic_bad += std::abs(total - 1.0) > kRowSumTolerance ? 1 : 0;
    }
    rows += ps.size();
  }
  const bool pass = stochastic_bad == 0 && idempotent_bad == 0 && monotone_bad == 0;
  return {pass, std::to_string(rows) + " vectors: row-sum violations " + std::to_string(stochastic_bad) +
                    ", idempotence violations " + std::to_string(idempotent_bad) +
                    ", monotonicity violations " + std::to_string(monotone_bad)};
}

// ---- toy experiments ----

struct ToyRun {
  std::size_t active_k = 0;
  double test_ll = 0.0;
  double train_loss = 0.0;
  double baseline = 0.0;  // single-Gaussian loss in standardized units
};

ToyRun run_toy(ExperimentConfig c, std::uint64_t seed) {
  c.seed = seed;
  c.split.num_splits = 1;
  c.split.num_runs = 1;
  const auto r = run_experiment(c).report.runs.front();
  // Standardized train targets have population std 1.
  return {r.active_k, r.test.mean_log_likelihood, r.final_train_loss,
          0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)};
}

struct ToyPair {
  std::vector<ToyRun> cec, mdn;
};

ToyPair run_toys(const std::string& config) {
  const auto base = shipped(config);
  ToyPair out;
  for (std::uint64_t s = 0; s < kToySeeds; ++s) {
    out.cec.push_back(run_toy(with_loss(base, LossKind::kCec), s));
    out.mdn.push_back(run_toy(with_loss(base, LossKind::kGmm), s));
  }
  return out;
}

std::vector<std::size_t> ks(const std::vector<ToyRun>& runs) {
  std::vector<std::size_t> out;
  for (const auto& r : runs) out.push_back(r.active_k);
  return out;
}

std::vector<double> lls(const std::vector<ToyRun>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.test_ll);
  return out;
}

std::pair<bool, std::string> ellipse_reduction() {
  const auto t = run_toys("ellipse.json");
  std::size_t in_range = 0, mdn_keeps = 0;
  for (std::size_t s = 0; s < kToySeeds; ++s) {
    in_range += t.cec[s].active_k >= kEllipseMinK && t.cec[s].active_k <= kEllipseMaxK ? 1 : 0;
    mdn_keeps += t.mdn[s].active_k >= t.cec[s].active_k ? 1 : 0;
  }
  const bool pass = in_range >= kToyQuorum && mdn_keeps >= kToyQuorum;
  return {pass, "CEC active_k " + list(ks(t.cec)) + " in [3,8]: " + std::to_string(in_range) +
                    "/5; MDN active_k " + list(ks(t.mdn)) + " >= CEC: " + std::to_string(mdn_keeps) + "/5"};
}

std::pair<bool, std::string> zigzag_reduction() {
  const auto t = run_toys("zigzag.json");
  std::size_t ok = 0;
  for (std::size_t s = 0; s < kToySeeds; ++s) {
    const bool k_ok = t.cec[s].active_k >= kZigzagMinK && t.cec[s].active_k <= kZigzagMaxK;
    const bool ll_ok = std::abs(t.cec[s].test_ll - t.mdn[s].test_ll) <= kZigzagLlGap;
    ok += k_ok && ll_ok ? 1 : 0;
  }
  return {ok >= kToyQuorum, "CEC active_k " + list(ks(t.cec)) + ", test LL CEC " + list(lls(t.cec)) +
                                " vs MDN " + list(lls(t.mdn)) + "; seeds meeting k in [5,10] and |gap| <= 0.1: " +
                                std::to_string(ok) + "/5"};
}

std::pair<bool, std::string> circles_fit() {
  const auto t = run_toys("two_circles.json");
  std::size_t ok = 0;
  std::vector<double> cec_loss, mdn_loss;
  for (std::size_t s = 0; s < kToySeeds; ++s) {
    const double limit = t.cec[s].baseline - kCirclesMargin;
    cec_loss.push_back(t.cec[s].train_loss);
    mdn_loss.push_back(t.mdn[s].train_loss);
    ok += t.cec[s].train_loss <= limit && t.mdn[s].train_loss <= limit ? 1 : 0;
  }
  return {ok >= kToyQuorum, "single-Gaussian loss " + fmt(t.cec[0].baseline) + "; train loss CEC " +
                                list(cec_loss) + ", MDN " + list(mdn_loss) + "; both >= 0.5 nat better: " +
                                std::to_string(ok) + "/5"};
}

// ---- real data ----

struct Paired {
  MetricsReport cec, mdn;
};

Paired run_pair(const std::string& cec_config, const std::string& mdn_config) {
  return {run_experiment(shipped(cec_config)).report, run_experiment(shipped(mdn_config)).report};
}

std::pair<bool, std::string> wine_direction() {
  const fs::path data = kProject / "data" / "wine_red.csv";
  if (!fs::exists(data)) {
    return {false, "dataset missing: " + data.string() + " (UCI Wine Quality not obtainable offline)"};
  }
  const auto p = run_pair("wine_cec.json", "wine_mdn.json");
  Vector gaps;
  for (std::size_t i = 0; i < p.cec.runs.size(); ++i) {
    gaps.push_back(p.cec.runs[i].test.mean_log_likelihood - p.mdn.runs[i].test.mean_log_likelihood);
  }
  const auto g = summarize(gaps);
  return {g.mean > 0.0 && g.mean >= g.std,
          "test LL CEC " + fmt(p.cec.test_log_likelihood.mean) + " vs MDN " +
              fmt(p.mdn.test_log_likelihood.mean) + "; paired gap " + fmt(g.mean) + " ± " + fmt(g.std)};
}

std::pair<bool, std::string> boston_direction() {
  const auto p = run_pair("boston_cec.json", "boston_mdn.json");
  const double c = p.cec.test_log_likelihood.mean, m = p.mdn.test_log_likelihood.mean;
  return {c >= m - kBostonSlack, "test LL CEC-MMR-20 " + fmt(c) + " ± " + fmt(p.cec.test_log_likelihood.std) +
                                     " vs MDN-20 " + fmt(m) + " ± " + fmt(p.mdn.test_log_likelihood.std) +
                                     " (" + std::to_string(p.cec.runs.size()) + " runs)"};
}

std::pair<bool, std::string> bike_direction() {
  const auto p = run_pair("bike_cec.json", "bike_mdn.json");
  std::size_t wins = 0;
  Vector c, m;
  for (std::size_t i = 0; i < p.cec.runs.size(); ++i) {
    c.push_back(p.cec.runs[i].train.rmse);
    m.push_back(p.mdn.runs[i].train.rmse);
    wins += c.back() < m.back() ? 1 : 0;
  }
  return {wins >= kBikeQuorum, "train RMSE CEC " + list(c) + " vs MDN " + list(m) + "; CEC lower in " +
                                   std::to_string(wins) + "/" + std::to_string(c.size())};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::pair<bool, std::string> determinism() {
  ExperimentConfig c = shipped("ellipse.json");
  c.epochs = 64;
  c.split.num_splits = 2;
  c.split.num_runs = 2;
  const fs::path a = kScratch / "det_a", b = kScratch / "det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto ra = run_experiment(c, {a});
  const auto rb = run_experiment(c, {b});
  const std::string ma = slurp(ra.run_dir / "metrics.json"), mb = slurp(rb.run_dir / "metrics.json");
  return {!ma.empty() && ma == mb, "two ellipse runs (2 splits x 2 runs): metrics.json " +
                                       std::string(ma == mb ? "byte-identical" : "differs") + ", " +
                                       std::to_string(ma.size()) + " bytes"};
}

std::pair<bool, std::string> evaluation_oracle() {
  const std::vector<MixtureParams> ps{
      {{0.25, 0.75}, {-1.0, 1.5}, {0.5, 2.0}},
      {{0.6, 0.4}, {0.0, 3.0}, {1.0, 0.3}},
      {{0.1, 0.9}, {2.0, -2.0}, {0.8, 0.6}},
  };
  const Vector ys{0.2, 2.9, -1.7};
  long double sum = 0.0L;
  for (std::size_t j = 0; j < 3; ++j) {
    long double density = 0.0L;
    for (std::size_t i = 0; i < 2; ++i) {
      const long double z = (ys[j] - ps[j].means[i]) / static_cast<long double>(ps[j].sigmas[i]);
      density += ps[j].weights[i] * std::exp(-0.5L * z * z) /
                 (ps[j].sigmas[i] * std::sqrt(2.0L * std::numbers::pi_v<long double>));
    }
    sum += std::log(density);
  }
  const double oracle = static_cast<double>(sum / 3.0L);
  const double got = mean_log_likelihood(ps, ys);
  const double err = std::abs(got - oracle);
  return {err <= kOracleTolerance, "mean LL " + std::to_string(got) + " vs brute force " +
                                       std::to_string(oracle) + ", |diff| " + std::to_string(err)};
}

}  // namespace

int main() {
  fs::create_directories(kScratch);
  criterion("AC1", gradient_correctness);
  criterion("AC2", objective_identities);
  criterion("AC3", pruning_properties);
  criterion("AC4", ellipse_reduction);
  criterion("AC5", zigzag_reduction);
  criterion("AC6", circles_fit);
  criterion("AC7", wine_direction);
  criterion("AC8", boston_direction);
  criterion("AC9", bike_direction);
  criterion("AC10", determinism);
  criterion("AC11", evaluation_oracle);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
