#pragma once

// Confusion counts, F1 with its all-zero convention, accuracy, macro/micro
// aggregation and the CSV/table formats of evaluation reports.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace latinav {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

/// 2TP / (2TP + FP + FN); 1 when TP = FP = FN = 0.
double f1(const ConfusionCounts& c);

/// (TP + TN) / total. Throws on an empty count.
double accuracy(const ConfusionCounts& c);

double macro_average(std::span<const double> values);

struct Aggregate {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double accuracy = 0.0;
  double macro_accuracy = 0.0;
  ConfusionCounts pooled;
};

/// Throws on an empty list.
Aggregate aggregate(std::span<const std::pair<std::string, ConfusionCounts>> per_author);

/// One verification decision: was `doc_id` written by `author`?
struct DecisionRecord {
  std::string author;
  std::string doc_id;
  bool truth = false;
  bool predicted = false;
  double posterior = 0.0;
  double hyperparameter = 0.0;

  bool operator==(const DecisionRecord&) const = default;
};

ConfusionCounts& tally(ConfusionCounts& c, bool truth, bool predicted);

struct AuthorScore {
  std::string author;
  ConfusionCounts counts;
  double f1 = 0.0;
  double accuracy = 0.0;
};

struct EvaluationReport {
  std::string corpus;
  std::string learner;
  std::vector<AuthorScore> authors;  // in order of first appearance
  Aggregate summary;
  std::vector<DecisionRecord> decisions;

  static EvaluationReport from_decisions(std::string corpus, std::string learner,
                                         std::vector<DecisionRecord> decisions);
};

/// Header `author,doc_id,true,predicted,posterior,hyperparameter`; labels as
/// Yes/No, posterior with 6 decimals, hyperparameter in shortest form.
void write_decisions_csv(std::ostream& out, std::span<const DecisionRecord> decisions);
std::vector<DecisionRecord> read_decisions_csv(std::istream& in);

/// One row per (corpus, learner): `corpus,learner,macro_f1,micro_f1,accuracy`.
void write_summary_csv(std::ostream& out, std::span<const EvaluationReport> reports);

/// `author,tp,fp,fn,tn,f1,accuracy`.
void write_author_csv(std::ostream& out, const EvaluationReport& report);

/// Human-readable per-author table followed by the aggregates, 3 decimals.
void print_report(std::ostream& out, const EvaluationReport& report);

/// `value` rounded to 3 decimals ("0.954").
std::string format3(double value);

}  // namespace latinav
