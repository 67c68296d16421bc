#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "latinav/learners.hpp"

using namespace latinav;

namespace {

FeatureVector dense(std::vector<double> values) {
  FeatureVector v;
  v.dimension = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) v.entries.push_back({static_cast<std::uint32_t>(i), values[i]});
  }
  return v;
}

struct Dataset {
  std::vector<FeatureVector> x;
  std::vector<int> y;
};

Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d, double density) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d, 0.0);
    for (auto& r : row) {
      if (std::abs(u(rng)) < density) r = u(rng);
    }
    data.x.push_back(dense(row));
    data.y.push_back(i % 2 == 0 ? 1 : (u(rng) > 0.6 ? 1 : 0));
  }
  return data;
}

/// Independent solver: Newton's method on the dense logistic objective.
std::vector<double> newton_logistic(const Dataset& data, double c) {
  const std::size_t d = data.x.front().dimension;
  const std::size_t p = d + 1;
  std::vector<std::vector<double>> rows;
  for (const auto& v : data.x) {
    std::vector<double> r(p, 0.0);
    for (const auto& e : v.entries) r[e.index] = e.value;
    r[d] = 1.0;
    rows.push_back(r);
  }
  std::vector<double> theta(p, 0.0);
  for (int it = 0; it < 100; ++it) {
    std::vector<double> g(p, 0.0);
    std::vector<std::vector<double>> h(p, std::vector<double>(p, 0.0));
    for (std::size_t j = 0; j < d; ++j) {
      g[j] = theta[j] / c;
      h[j][j] = 1.0 / c;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < p; ++j) z += rows[i][j] * theta[j];
      const double prob = 1.0 / (1.0 + std::exp(-z));
      const double t = data.y[i] == 1 ? 1.0 : 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        g[j] += (prob - t) * rows[i][j];
        for (std::size_t k = 0; k < p; ++k) h[j][k] += prob * (1 - prob) * rows[i][j] * rows[i][k];
      }
    }
    // Solve h * step = g by Gauss-Jordan with partial pivoting.
    std::vector<double> step = g;
    for (std::size_t col = 0; col < p; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < p; ++r) {
        if (std::abs(h[r][col]) > std::abs(h[piv][col])) piv = r;
      }
      std::swap(h[col], h[piv]);
      std::swap(step[col], step[piv]);
      for (std::size_t r = 0; r < p; ++r) {
        if (r == col) continue;
        const double f = h[r][col] / h[col][col];
        for (std::size_t k = col; k < p; ++k) h[r][k] -= f * h[col][k];
        step[r] -= f * step[col];
      }
    }
    double size = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      theta[j] -= step[j] / h[j][j];
      size += std::abs(step[j] / h[j][j]);
    }
    if (size < 1e-14) break;
  }
  return theta;
}

}  // namespace

TEST_CASE("learner names") {
  CHECK(short_name(Learner::logistic_regression) == "lr");
  CHECK(short_name(Learner::linear_svm) == "svm");
  CHECK(short_name(Learner::multinomial_nb) == "mnb");
  CHECK(parse_learner("svm") == Learner::linear_svm);
  CHECK_THROWS_AS(parse_learner("knn"), LearnerError);
}

TEST_CASE("property: logistic gradient matches central finite differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Dataset data = random_dataset(seed, 25, 12, 0.5);
    for (double c : {0.01, 1.0, 100.0}) {
      const LogisticObjective obj(data.x, data.y, c);
      std::mt19937_64 rng(seed * 31);
      std::uniform_real_distribution<double> u(-2.0, 2.0);
      std::vector<double> params(obj.parameter_count());
      for (auto& p : params) p = u(rng);
      std::vector<double> grad(params.size());
      obj.evaluate(params, grad);
      for (std::size_t j = 0; j < params.size(); ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(params[j]));
        auto plus = params, minus = params;
        plus[j] += h;
        minus[j] -= h;
        const double fd = (obj.evaluate(plus, {}) - obj.evaluate(minus, {})) / (2 * h);
        const double scale = std::max(std::abs(fd), std::abs(grad[j]));
        if (scale > 1e-6) worst = std::max(worst, std::abs(fd - grad[j]) / scale);
        else REQUIRE(std::abs(fd - grad[j]) < 1e-9);
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("logistic regression reaches the Newton optimum") {
  for (std::uint64_t seed : {3u, 8u}) {
    const Dataset data = random_dataset(seed, 40, 6, 0.8);
    for (double c : {0.1, 10.0}) {
      TrainConfig cfg = TrainConfig::defaults(Learner::logistic_regression, c);
      const LinearModel m = train_logistic_regression(data.x, data.y, cfg);
      const auto theta = newton_logistic(data, c);
      CHECK(m.converged);
      REQUIRE(m.weights.size() == 6);
      for (std::size_t j = 0; j < 6; ++j) CHECK(m.weights[j] == doctest::Approx(theta[j]).epsilon(1e-4));
      CHECK(m.bias == doctest::Approx(theta[6]).epsilon(1e-4));
      for (std::size_t k = 1; k < m.objective_trace.size(); ++k) {
        CHECK(m.objective_trace[k] <= m.objective_trace[k - 1]);
      }
      CHECK(m.calibration.slope == 1.0);
      CHECK(m.calibration.intercept == 0.0);
    }
  }
}

TEST_CASE("logistic regression reports non-convergence but still returns a model") {
  const Dataset data = random_dataset(5, 40, 6, 0.8);
  TrainConfig cfg = TrainConfig::defaults(Learner::logistic_regression, 1000.0);
  cfg.max_iterations = 2;
  const LinearModel m = train_logistic_regression(data.x, data.y, cfg);
  CHECK_FALSE(m.converged);
  CHECK(m.iterations == 2);
  CHECK(m.weights.size() == 6);
}

TEST_CASE("input validation") {
  const Dataset data = random_dataset(1, 6, 3, 1.0);
  const std::vector<int> ones(6, 1);
  CHECK_THROWS_AS(train_logistic_regression(data.x, ones, TrainConfig{}), LearnerError);
  CHECK_THROWS_AS(train_linear_svm(data.x, ones, TrainConfig::defaults(Learner::linear_svm)), LearnerError);
  CHECK_THROWS_AS(train_multinomial_nb(data.x, ones, 1.0), LearnerError);
  const std::vector<int> bad{1, 0, 2, 0, 1, 0};
  CHECK_THROWS_AS(train_logistic_regression(data.x, bad, TrainConfig{}), LearnerError);
  const std::vector<int> short_labels{1, 0};
  CHECK_THROWS_AS(train_logistic_regression(data.x, short_labels, TrainConfig{}), LearnerError);
  TrainConfig zero_c;
  zero_c.c_or_alpha = 0.0;
  CHECK_THROWS_AS(train_logistic_regression(data.x, data.y, zero_c), LearnerError);
  CHECK_THROWS_AS(train_multinomial_nb(data.x, data.y, 1.0), LearnerError);  // negative values
}

TEST_CASE("linear SVM matches the analytic one-dimensional solution") {
  // x = +1 (positive), x = -1 (negative). With the bias regularized the
  // optimum is b = 0 and w = min(2C, 1).
  const std::vector<FeatureVector> x{dense({1.0}), dense({-1.0})};
  const std::vector<int> y{1, 0};
  for (auto [c, w] : {std::pair{0.1, 0.2}, std::pair{0.3, 0.6}, std::pair{10.0, 1.0}}) {
    TrainConfig cfg = TrainConfig::defaults(Learner::linear_svm, c);
    const LinearModel m = train_linear_svm(x, y, cfg);
    CHECK(m.converged);
    CHECK(m.weights[0] == doctest::Approx(w).epsilon(1e-3));
    CHECK(std::abs(m.bias) < 1e-3);
    CHECK(predict_posterior(m, x[0]) > 0.5);
    CHECK(predict_posterior(m, x[1]) < 0.5);
    CHECK(m.calibration.slope > 0.0);
  }
}

TEST_CASE("SVM dual objective decreases and the duality gap closes") {
  const Dataset data = random_dataset(9, 60, 10, 0.6);
  TrainConfig cfg = TrainConfig::defaults(Learner::linear_svm, 1.0);
  cfg.convergence_tolerance = 1e-6;
  cfg.seed = 4;
  const LinearModel m = train_linear_svm(data.x, data.y, cfg);
  REQUIRE(m.objective_trace.size() >= 2);
  for (std::size_t k = 1; k < m.objective_trace.size(); ++k) {
    CHECK(m.objective_trace[k] <= m.objective_trace[k - 1] + 1e-12);
  }
  // Dual objective here is 0.5||w||^2 - sum(alpha), the negated dual.
  const double primal = svm_primal_objective(m, data.x, data.y);
  const double dual = -m.objective_trace.back();
  CHECK(primal >= dual - 1e-9);
  CHECK((primal - dual) / std::max(1.0, primal) < 1e-3);
  CHECK(m.objective == primal);

  // Seeds change the coordinate order, not the optimum.
  TrainConfig other = cfg;
  other.seed = 99;
  const LinearModel m2 = train_linear_svm(data.x, data.y, other);
  for (std::size_t j = 0; j < m.weights.size(); ++j) CHECK(m2.weights[j] == doctest::Approx(m.weights[j]).epsilon(1e-2));
  const LinearModel again = train_linear_svm(data.x, data.y, cfg);
  CHECK(again.weights == m.weights);
}

TEST_CASE("Platt link is stationary for the smoothed log loss") {
  const std::vector<double> scores{-2.0, -1.5, -0.3, 0.2, 0.4, 1.1, 1.7, -0.8, 0.9, 2.5};
  const std::vector<int> y{0, 0, 1, 0, 1, 1, 1, 0, 0, 1};
  const Calibration cal = fit_platt(scores, y);
  const double n_pos = 5, n_neg = 5;
  const double hi = (n_pos + 1) / (n_pos + 2), lo = 1 / (n_neg + 2);
  double g_slope = 0.0, g_int = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(cal.slope * scores[i] + cal.intercept)));
    const double t = y[i] == 1 ? hi : lo;
    g_slope += (p - t) * scores[i];
    g_int += (p - t);
  }
  CHECK(std::abs(g_slope) < 1e-5);
  CHECK(std::abs(g_int) < 1e-5);
  CHECK(cal.slope > 0.0);
}

TEST_CASE("multinomial naive Bayes as a linear model") {
  const std::vector<FeatureVector> x{dense({1, 2, 0}), dense({0, 1, 3}), dense({0, 0, 1})};
  const std::vector<int> y{1, 0, 0};
  const LinearModel m = train_multinomial_nb(x, y, 1.0);
  // theta_pos = (2, 3, 1) / 6, theta_neg = (1, 2, 5) / 8
  CHECK(m.weights[0] == doctest::Approx(std::log(2.0 / 6) - std::log(1.0 / 8)).epsilon(1e-14));
  CHECK(m.weights[1] == doctest::Approx(std::log(3.0 / 6) - std::log(2.0 / 8)).epsilon(1e-14));
  CHECK(m.weights[2] == doctest::Approx(std::log(1.0 / 6) - std::log(5.0 / 8)).epsilon(1e-14));
  CHECK(m.bias == doctest::Approx(std::log(1.0 / 2.0)).epsilon(1e-14));
  CHECK(m.converged);

  // The posterior is the usual Bayes rule.
  const FeatureVector q = dense({1, 1, 1});
  const double log_pos = std::log(1.0 / 3) + std::log(2.0 / 6) + std::log(3.0 / 6) + std::log(1.0 / 6);
  const double log_neg = std::log(2.0 / 3) + std::log(1.0 / 8) + std::log(2.0 / 8) + std::log(5.0 / 8);
  CHECK(predict_posterior(m, q) ==
        doctest::Approx(std::exp(log_pos) / (std::exp(log_pos) + std::exp(log_neg))).epsilon(1e-12));
  CHECK_THROWS_AS(train_multinomial_nb(x, y, 0.0), LearnerError);
}

TEST_CASE("decisions and numerics") {
  CHECK(decide(0.5) == Decision::yes);
  CHECK(decide(0.4999999) == Decision::no);
  CHECK(decide(0.3, 0.25) == Decision::yes);
  CHECK(to_string(Decision::yes) == "Yes");
  CHECK(to_string(Decision::no) == "No");
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(std::isfinite(sigmoid(-745.0)));

  LinearModel m;
  m.weights = {1.0, 2.0};
  CHECK_THROWS_AS(predict_posterior(m, dense({1.0})), LearnerError);
}

TEST_CASE("model serialization round trip") {
  const Dataset data = random_dataset(2, 30, 5, 0.7);
  for (Learner l : {Learner::logistic_regression, Learner::linear_svm}) {
    TrainConfig cfg = TrainConfig::defaults(l, 0.5);
    cfg.seed = 12;
    const LinearModel m = train(data.x, data.y, cfg);
    std::stringstream ss;
    save_model(ss, m);
    const LinearModel back = load_model(ss);
    CHECK(back.learner == l);
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
    CHECK(back.calibration.slope == m.calibration.slope);
    CHECK(back.calibration.intercept == m.calibration.intercept);
    CHECK(back.config.seed == 12);
    CHECK(back.config.c_or_alpha == 0.5);
    CHECK(back.converged == m.converged);
    for (const auto& v : data.x) CHECK(predict_posterior(back, v) == predict_posterior(m, v));
  }
  std::stringstream garbage("{not json");
  CHECK_THROWS_AS(load_model(garbage), LearnerError);
  std::stringstream wrong(R"({"format":"something-else","version":1})");
  CHECK_THROWS_AS(load_model(wrong), LearnerError);
  std::stringstream truncated(R"({"format":"latinav-linear-model","version":1,"learner":"lr","dimension":2,"weights":[1]})");
  CHECK_THROWS_AS(load_model(truncated), LearnerError);
}
