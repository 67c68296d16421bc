#include "latinav/learners.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "random.hpp"

namespace latinav {

std::string_view short_name(Learner l) {
  switch (l) {
    case Learner::logistic_regression: return "lr";
    case Learner::linear_svm: return "svm";
    case Learner::multinomial_nb: return "mnb";
  }
  return "?";
}

Learner parse_learner(std::string_view name) {
  if (name == "lr") return Learner::logistic_regression;
  if (name == "svm") return Learner::linear_svm;
  if (name == "mnb") return Learner::multinomial_nb;
  throw LearnerError("unknown learner '" + std::string(name) + "' (expected lr, svm or mnb)");
}

TrainConfig TrainConfig::defaults(Learner learner, double c_or_alpha) {
  TrainConfig cfg;
  cfg.learner = learner;
  cfg.c_or_alpha = c_or_alpha;
  if (learner == Learner::linear_svm) cfg.convergence_tolerance = 1e-3;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(c_or_alpha > 0.0)) throw LearnerError("c_or_alpha must be positive");
  if (!(convergence_tolerance > 0.0)) throw LearnerError("convergence tolerance must be positive");
  if (max_iterations <= 0) throw LearnerError("max_iterations must be positive");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

/// log(1 + exp(-m)) without overflow.
double log1pexp_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

std::size_t check_inputs(std::span<const FeatureVector> x, Labels y) {
  if (x.size() != y.size()) throw LearnerError("feature/label count mismatch");
  if (x.empty()) throw LearnerError("empty training set");
  bool pos = false;
  bool neg = false;
  const std::size_t dim = x.front().dimension;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw LearnerError("labels must be 0 or 1");
    (y[i] == 1 ? pos : neg) = true;
    if (x[i].dimension != dim) throw LearnerError("inconsistent feature dimensions");
  }
  if (!pos || !neg) throw LearnerError("training set holds a single class");
  return dim;
}

double sign(int label) { return label == 1 ? 1.0 : -1.0; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

// ---------------------------------------------------------------------------
// Logistic regression

LogisticObjective::LogisticObjective(std::span<const FeatureVector> x, Labels y, double c)
    : x_(x), y_(y), c_(c), dimension_(check_inputs(x, y)) {}

double LogisticObjective::evaluate(std::span<const double> params, std::span<double> gradient) const {
  const auto w = params.first(dimension_);
  const double b = params[dimension_];
  const bool want_grad = !gradient.empty();
  if (want_grad) {
    for (std::size_t j = 0; j < dimension_; ++j) gradient[j] = w[j] / c_;
    gradient[dimension_] = 0.0;
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double yi = sign(y_[i]);
    const double m = yi * (x_[i].dot(w) + b);
    loss += log1pexp_neg(m);
    if (want_grad) {
      const double r = -yi * sigmoid(-m);
      for (const auto& e : x_[i].entries) gradient[e.index] += r * e.value;
      gradient[dimension_] += r;
    }
  }
  return loss + dot(w, w) / (2.0 * c_);
}

LinearModel train_logistic_regression(std::span<const FeatureVector> x, Labels y, const TrainConfig& cfg) {
  cfg.validate();
  const LogisticObjective objective(x, y, cfg.c_or_alpha);
  const std::size_t n = objective.parameter_count();
  constexpr std::size_t kHistory = 10;

  std::vector<double> params(n, 0.0), grad(n), trial(n), trial_grad(n), dir(n), alpha(kHistory);
  double f = objective.evaluate(params, grad);
  const double g0 = norm2(grad);
  const double gtol = cfg.convergence_tolerance * std::max(1.0, g0);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  LinearModel model;
  model.learner = Learner::logistic_regression;
  model.config = cfg;
  model.converged = g0 <= gtol;

  int iter = 0;
  while (!model.converged && iter < cfg.max_iterations) {
    ++iter;
    // Two-loop recursion: dir = -H grad.
    for (std::size_t j = 0; j < n; ++j) dir[j] = -grad[j];
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] -= alpha[k] * y_hist[k][j];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] += (alpha[k] - beta) * s_hist[k][j];
    }
    double slope = dot(grad, dir);
    if (!(slope < 0.0)) {
      for (std::size_t j = 0; j < n; ++j) dir[j] = -grad[j];
      slope = -dot(grad, grad);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Backtracking line search under the Armijo condition.
    double step = s_hist.empty() ? std::min(1.0, 1.0 / norm2(grad)) : 1.0;
    double f_trial = 0.0;
    bool accepted = false;
    while (step > 1e-20) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = params[j] + step * dir[j];
      f_trial = objective.evaluate(trial, trial_grad);
      if (f_trial <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n), yv(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = trial[j] - params[j];
      yv[j] = trial_grad[j] - grad[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * norm2(s) * norm2(yv)) {
      if (s_hist.size() == kHistory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }

    const double f_prev = f;
    params.swap(trial);
    grad.swap(trial_grad);
    f = f_trial;
    model.objective_trace.push_back(f);
    model.converged = norm2(grad) <= gtol;
    if (!model.converged && f_prev - f <= 1e-15 * std::max(1.0, std::abs(f))) break;
  }

  model.iterations = iter;
  model.objective = f;
  model.bias = params[n - 1];
  params.pop_back();
  model.weights = std::move(params);
  return model;
}

// ---------------------------------------------------------------------------
// Linear SVM

double svm_primal_objective(const LinearModel& model, std::span<const FeatureVector> x, Labels y) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    hinge += std::max(0.0, 1.0 - sign(y[i]) * decision_value(model, x[i]));
  }
  const double reg = dot(model.weights, model.weights) + model.bias * model.bias;
  return model.config.c_or_alpha * hinge + 0.5 * reg;
}

Calibration fit_platt(std::span<const double> scores, Labels y) {
  const std::size_t n = scores.size();
  double prior1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) prior1 += y[i] == 1 ? 1.0 : 0.0;
  const double prior0 = static_cast<double>(n) - prior1;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);

  // Platt's parametrization: p = 1 / (1 + exp(A f + B)).
  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  const auto value = [&](double aa, double bb) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = y[i] == 1 ? hi : lo;
      const double z = scores[i] * aa + bb;
      v += z >= 0 ? t * z + std::log1p(std::exp(-z)) : (t - 1.0) * z + std::log1p(std::exp(z));
    }
    return v;
  };
  double fval = value(a, b);
  for (int it = 0; it < 100; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = y[i] == 1 ? hi : lo;
      const double z = scores[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = value(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  return Calibration{-a, -b};
}

LinearModel train_linear_svm(std::span<const FeatureVector> x, Labels y, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t dim = check_inputs(x, y);
  const std::size_t n = x.size();
  const double upper = cfg.c_or_alpha;

  // The bias is the weight of a constant feature of value 1.
  std::vector<double> w(dim + 1, 0.0), alpha(n, 0.0), qii(n);
  for (std::size_t i = 0; i < n; ++i) qii[i] = x[i].squared_norm() + 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);

  LinearModel model;
  model.learner = Learner::linear_svm;
  model.config = cfg;
  int pass = 0;
  while (pass < cfg.max_iterations) {
    ++pass;
    shuffle(order, rng);
    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
      const double yi = sign(y[i]);
      const double g = yi * (x[i].dot(w) + w[dim]) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == upper) pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / qii[i], 0.0, upper);
      const double delta = (alpha[i] - old) * yi;
      for (const auto& e : x[i].entries) w[e.index] += delta * e.value;
      w[dim] += delta;
    }
    double alpha_sum = 0.0;
    for (double a : alpha) alpha_sum += a;
    model.objective_trace.push_back(0.5 * dot(w, w) - alpha_sum);
    if (pg_max - pg_min < cfg.convergence_tolerance) {
      model.converged = true;
      break;
    }
  }

  model.iterations = pass;
  model.bias = w[dim];
  w.pop_back();
  model.weights = std::move(w);
  model.objective = svm_primal_objective(model, x, y);

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = decision_value(model, x[i]);
  model.calibration = fit_platt(scores, y);
  return model;
}

// ---------------------------------------------------------------------------
// Multinomial naive Bayes

LinearModel train_multinomial_nb(std::span<const FeatureVector> x, Labels y, double alpha) {
  if (!(alpha > 0.0)) throw LearnerError("alpha must be positive");
  const std::size_t dim = check_inputs(x, y);
  std::vector<double> mass1(dim, 0.0), mass0(dim, 0.0);
  double total1 = 0.0, total0 = 0.0, n1 = 0.0, n0 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& mass = y[i] == 1 ? mass1 : mass0;
    double& total = y[i] == 1 ? total1 : total0;
    (y[i] == 1 ? n1 : n0) += 1.0;
    for (const auto& e : x[i].entries) {
      if (e.value < 0.0) throw LearnerError("multinomial naive Bayes needs non-negative features");
      mass[e.index] += e.value;
      total += e.value;
    }
  }

  LinearModel model;
  model.learner = Learner::multinomial_nb;
  model.config = TrainConfig::defaults(Learner::multinomial_nb, alpha);
  model.weights.resize(dim);
  const double denom1 = total1 + alpha * static_cast<double>(dim);
  const double denom0 = total0 + alpha * static_cast<double>(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    model.weights[j] = std::log((mass1[j] + alpha) / denom1) - std::log((mass0[j] + alpha) / denom0);
  }
  model.bias = std::log(n1 / n0);
  model.converged = true;
  return model;
}

LinearModel train(std::span<const FeatureVector> x, Labels y, const TrainConfig& cfg) {
  switch (cfg.learner) {
    case Learner::logistic_regression: return train_logistic_regression(x, y, cfg);
    case Learner::linear_svm: return train_linear_svm(x, y, cfg);
    case Learner::multinomial_nb: return train_multinomial_nb(x, y, cfg.c_or_alpha);
  }
  throw LearnerError("unknown learner");
}

// ---------------------------------------------------------------------------
// Prediction

double decision_value(const LinearModel& model, const FeatureVector& x) {
  if (x.dimension != model.weights.size()) {
    throw LearnerError("dimension mismatch: model " + std::to_string(model.weights.size()) +
                       ", vector " + std::to_string(x.dimension));
  }
  return x.dot(model.weights) + model.bias;
}

double predict_posterior(const LinearModel& model, const FeatureVector& x) {
  return sigmoid(model.calibration.slope * decision_value(model, x) + model.calibration.intercept);
}

std::string_view to_string(Decision d) { return d == Decision::yes ? "Yes" : "No"; }

Decision decide(double posterior, double threshold) {
  return posterior >= threshold ? Decision::yes : Decision::no;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
constexpr std::string_view kModelFormat = "latinav-linear-model";
constexpr int kModelVersion = 1;
}  // namespace

void save_model(std::ostream& out, const LinearModel& model) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["learner"] = short_name(model.learner);
  j["dimension"] = model.weights.size();
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["calibration"] = {{"slope", model.calibration.slope}, {"intercept", model.calibration.intercept}};
  j["config"] = {{"c_or_alpha", model.config.c_or_alpha},
                 {"max_iterations", model.config.max_iterations},
                 {"convergence_tolerance", model.config.convergence_tolerance},
                 {"seed", model.config.seed}};
  j["training"] = {{"iterations", model.iterations},
                   {"objective", model.objective},
                   {"converged", model.converged}};
  out << j.dump() << '\n';
}

LinearModel load_model(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LearnerError(std::string("malformed model file: ") + e.what());
  }
  if (j.value("format", "") != kModelFormat) throw LearnerError("not a latinav model file");
  if (j.value("version", 0) != kModelVersion) throw LearnerError("unsupported model version");
  try {
    LinearModel m;
    m.learner = parse_learner(j.at("learner").get<std::string>());
    m.weights = j.at("weights").get<std::vector<double>>();
    if (m.weights.size() != j.at("dimension").get<std::size_t>()) {
      throw LearnerError("model dimension does not match its weights");
    }
    m.bias = j.at("bias").get<double>();
    m.calibration.slope = j.at("calibration").at("slope").get<double>();
    m.calibration.intercept = j.at("calibration").at("intercept").get<double>();
    const auto& c = j.at("config");
    m.config.learner = m.learner;
    m.config.c_or_alpha = c.at("c_or_alpha").get<double>();
    m.config.max_iterations = c.at("max_iterations").get<int>();
    m.config.convergence_tolerance = c.at("convergence_tolerance").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    const auto& t = j.at("training");
    m.iterations = t.at("iterations").get<int>();
    m.objective = t.at("objective").get<double>();
    m.converged = t.at("converged").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LearnerError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace latinav
