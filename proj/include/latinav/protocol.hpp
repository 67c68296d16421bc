#pragma once

// Grouped stratified k-fold, grid search, the leave-one-out verification
// protocol and verification of a disputed text.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "latinav/corpus.hpp"
#include "latinav/features.hpp"
#include "latinav/learners.hpp"
#include "latinav/metrics.hpp"
#include "latinav/segmentation.hpp"

namespace latinav {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A corpus expanded into units and counted once against shared
/// dictionaries. Units of one document are contiguous, whole document first.
class PreparedCorpus {
 public:
  PreparedCorpus(const Corpus& corpus, FeatureSpecs specs, SegmentationOptions segmentation = {});

  struct DocumentRange {
    std::string doc_id;
    std::string author;
    std::size_t begin = 0;  // index of the whole-document unit
    std::size_t end = 0;
  };

  const std::string& name() const { return name_; }
  const std::string& checksum() const { return checksum_; }
  const std::vector<LabelledUnit>& units() const { return units_; }
  const std::vector<UnitCounts>& counts() const { return counts_; }
  const std::vector<DocumentRange>& documents() const { return documents_; }
  const FeatureCounter& counter() const { return counter_; }
  const FeatureSpecs& specs() const { return counter_.specs(); }
  const SegmentationOptions& segmentation() const { return segmentation_; }
  bool is_miscellanea(std::string_view author) const;

  /// Authors with at least two documents, excluding miscellanea labels; sorted.
  std::vector<std::string> eligible_authors() const;
  /// Exact label, else the unique author whose name starts with `label`
  /// (case-insensitive). Throws ProtocolError otherwise.
  std::string resolve_author(std::string_view label) const;

 private:
  std::string name_;
  std::string checksum_;
  std::set<std::string, std::less<>> miscellanea_;
  SegmentationOptions segmentation_;
  FeatureCounter counter_;
  std::vector<LabelledUnit> units_;
  std::vector<UnitCounts> counts_;
  std::vector<DocumentRange> documents_;
};

// ---------------------------------------------------------------------------
// Folds

struct FoldAssignment {
  int k = 10;
  std::uint64_t seed = 0;
  std::map<std::string, int, std::less<>> fold_of_group;

  int fold_of(std::string_view group) const;
};

/// Groups are sorted, shuffled per class stratum with `seed`, and dealt
/// round-robin; the negative stratum continues where the positives stopped.
/// A group is positive when its units belong to `positive_author`.
/// Throws for k < 2 or fewer groups than k.
FoldAssignment grouped_stratified_kfold(std::span<const LabelledUnit> units,
                                        std::string_view positive_author, int k, std::uint64_t seed);

/// Same over parallel (group id, label) arrays.
FoldAssignment grouped_stratified_kfold(std::span<const std::string> group_ids, std::span<const int> labels,
                                        int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Grid search

struct Grid {
  std::vector<double> values;

  /// C in {1e-3 .. 1e3}; alpha in {1e-7 .. 1}.
  static Grid full(Learner learner);
  /// C in {0.01, 1, 100}; alpha in {1e-6, 1e-3, 1}.
  static Grid reduced(Learner learner);
  /// Sorted, de-duplicated, positive; throws on an empty list.
  static Grid of(std::vector<double> values);
};

/// Value used when grid search cannot run: C = 0.1, alpha = 0.001.
double fallback_hyperparameter(Learner learner);

/// A training pool already mapped into one feature space.
struct TrainingPool {
  std::vector<FeatureVector> x;
  std::vector<int> y;
  std::vector<std::string> group_ids;
  std::vector<bool> whole_document;
};

struct GridSearchResult {
  double best = 0.0;
  bool fallback = false;
  /// Mean validation F1 per grid value (empty on fallback).
  std::vector<double> mean_f1;
  int folds_used = 0;
  int trainings = 0;
};

/// Maximizes mean validation F1 over folds, scored on whole-document units
/// of each validation fold (all of its units when it has none). Folds whose
/// validation part has no positives, or whose training part is single-class,
/// are skipped. k is lowered to the number of groups when necessary. With
/// fewer than two positive groups, or no usable fold, returns the fallback.
/// Ties go to the smaller value.
GridSearchResult grid_search(const TrainingPool& pool, Learner learner, const Grid& grid, int k,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Leave-one-out verification

/// What a LOO iteration saw; handed to the observer before training.
struct LooIteration {
  std::string author;
  std::string held_out;
  std::span<const std::size_t> training_units;  // indices into PreparedCorpus::units()
  const FeatureSpace* space = nullptr;
  double hyperparameter = 0.0;
};

struct ProtocolOptions {
  Learner learner = Learner::logistic_regression;
  std::optional<Grid> grid;  // default: Grid::full(learner)
  int folds = 10;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// Called once per LOO iteration, possibly from several threads at once.
  std::function<void(const LooIteration&)> observer;
  /// Called after each finished prediction with (done, total); serialized.
  std::function<void(std::size_t, std::size_t)> progress;

  Grid effective_grid() const { return grid ? *grid : Grid::full(learner); }
};

struct VerificationResult {
  std::string author;
  std::string doc_id;
  Decision decision = Decision::no;
  double posterior = 0.0;
  double hyperparameter = 0.0;
  bool fallback_hyperparameter = false;
  LinearModel model;
  FeatureSpace space;

  DecisionRecord record(bool truth) const;
};

/// One prediction per document of the corpus: the classifier for `author` is
/// fitted (features, grid search, training) on every unit not derived from
/// the held-out document and applied to that document's whole text.
std::vector<DecisionRecord> loo_author_verification(const PreparedCorpus& corpus, std::string_view author,
                                                    const ProtocolOptions& options);

/// LOO verification for each of `authors` (all eligible authors when empty),
/// decisions in (author, doc_id) order.
EvaluationReport run_full_evaluation(const PreparedCorpus& corpus, const ProtocolOptions& options,
                                     std::span<const std::string> authors = {});

/// Trains on the whole corpus and classifies `disputed_text` (raw, with
/// citation markers) as a whole document.
VerificationResult verify_disputed(const PreparedCorpus& corpus, std::string_view author,
                                   std::string doc_id, std::string_view disputed_text,
                                   const ProtocolOptions& options);

// ---------------------------------------------------------------------------
// Provenance

struct RunManifest {
  std::string command;
  std::string corpus;
  std::string corpus_checksum;
  std::size_t documents = 0;
  std::size_t units = 0;
  std::string learner;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  int folds = 10;
  unsigned workers = 1;
  std::vector<std::string> authors;
  std::map<std::string, std::string> flags;
};

void write_manifest(std::ostream& out, const RunManifest& manifest);
RunManifest read_manifest(std::istream& in);

/// Versioned JSON of a fitted feature space.
void save_feature_space(std::ostream& out, const FeatureSpace& space);
FeatureSpace load_feature_space(std::istream& in);

}  // namespace latinav
