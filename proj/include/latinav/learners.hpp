#pragma once

// Binary linear classifiers over FeatureVectors.
//
// All three learners produce a LinearModel whose score is w.x + b; the
// posterior is sigmoid(slope * score + intercept), where the calibration
// (slope, intercept) is the identity for logistic regression and naive
// Bayes and a Platt link fitted on training margins for the SVM.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "latinav/features.hpp"

namespace latinav {

class LearnerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Learner { logistic_regression, linear_svm, multinomial_nb };

/// "lr", "svm", "mnb".
std::string_view short_name(Learner l);
Learner parse_learner(std::string_view name);

struct TrainConfig {
  Learner learner = Learner::logistic_regression;
  double c_or_alpha = 1.0;
  int max_iterations = 1000;
  double convergence_tolerance = 1e-6;
  std::uint64_t seed = 0;

  /// Per-learner defaults for iteration cap and tolerance.
  static TrainConfig defaults(Learner learner, double c_or_alpha = 1.0);
  void validate() const;
};

struct Calibration {
  double slope = 1.0;
  double intercept = 0.0;
};

struct LinearModel {
  Learner learner = Learner::logistic_regression;
  std::vector<double> weights;
  double bias = 0.0;
  Calibration calibration;
  TrainConfig config;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  /// Objective after each outer iteration (SVM: dual objective per pass).
  std::vector<double> objective_trace;

  std::size_t dimension() const { return weights.size(); }
};

/// Labels are 1 (positive) or 0 (negative).
using Labels = std::span<const int>;

/// Sum of logistic losses plus ||w||^2 / (2C); bias unregularized.
/// Parameters are laid out as [w_0 .. w_{d-1}, b].
class LogisticObjective {
 public:
  LogisticObjective(std::span<const FeatureVector> x, Labels y, double c);

  std::size_t parameter_count() const { return dimension_ + 1; }
  /// Objective value; writes the gradient when `gradient` is non-empty.
  double evaluate(std::span<const double> params, std::span<double> gradient) const;

 private:
  std::span<const FeatureVector> x_;
  Labels y_;
  double c_;
  std::size_t dimension_;
};

LinearModel train_logistic_regression(std::span<const FeatureVector> x, Labels y, const TrainConfig& cfg);

/// Hinge loss with ||w||^2 / (2C) via dual coordinate descent (coordinate
/// order shuffled per pass from cfg.seed), followed by a Platt link fitted on
/// the training margins.
LinearModel train_linear_svm(std::span<const FeatureVector> x, Labels y, const TrainConfig& cfg);

/// Class priors and alpha-smoothed log-likelihoods; the log-likelihood ratio
/// is stored as the weight vector, the log prior ratio as the bias.
LinearModel train_multinomial_nb(std::span<const FeatureVector> x, Labels y, double alpha);

LinearModel train(std::span<const FeatureVector> x, Labels y, const TrainConfig& cfg);

/// Primal SVM objective C * sum(hinge) + ||w||^2 / 2 (bias included in the
/// norm, as the solver regularizes it).
double svm_primal_objective(const LinearModel& model, std::span<const FeatureVector> x, Labels y);

/// Fits sigmoid(slope * s + intercept) to (score, label) pairs with Platt's
/// smoothed targets.
Calibration fit_platt(std::span<const double> scores, Labels y);

double decision_value(const LinearModel& model, const FeatureVector& x);
double predict_posterior(const LinearModel& model, const FeatureVector& x);

enum class Decision { no, yes };
std::string_view to_string(Decision d);

/// Yes iff posterior >= threshold.
Decision decide(double posterior, double threshold = 0.5);

double sigmoid(double z);

/// Versioned JSON dump of the model.
void save_model(std::ostream& out, const LinearModel& model);
LinearModel load_model(std::istream& in);

}  // namespace latinav
