#include "latinav/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "random.hpp"

namespace latinav {

// ---------------------------------------------------------------------------
// PreparedCorpus

PreparedCorpus::PreparedCorpus(const Corpus& corpus, FeatureSpecs specs, SegmentationOptions segmentation)
    : name_(corpus.name),
      checksum_(corpus_checksum(corpus)),
      miscellanea_(corpus.miscellanea_authors.begin(), corpus.miscellanea_authors.end()),
      segmentation_(std::move(segmentation)),
      counter_(std::move(specs)) {
  for (const auto& doc : corpus.documents) {
    DocumentRange range{doc.doc_id, doc.author, units_.size(), 0};
    units_.push_back(whole_document_unit(doc.doc_id, doc.author, doc.raw_text, segmentation_));
    auto segments = document_segments(doc, segmentation_);
    units_.insert(units_.end(), std::make_move_iterator(segments.begin()),
                  std::make_move_iterator(segments.end()));
    range.end = units_.size();
    documents_.push_back(std::move(range));
  }
  counts_.reserve(units_.size());
  for (const auto& u : units_) counts_.push_back(counter_.count(u));
}

bool PreparedCorpus::is_miscellanea(std::string_view author) const { return miscellanea_.contains(author); }

std::vector<std::string> PreparedCorpus::eligible_authors() const {
  std::map<std::string, std::size_t> docs;
  for (const auto& d : documents_) ++docs[d.author];
  std::vector<std::string> out;
  for (const auto& [author, n] : docs) {
    if (n >= 2 && !is_miscellanea(author)) out.push_back(author);
  }
  return out;
}

std::string PreparedCorpus::resolve_author(std::string_view label) const {
  std::set<std::string> authors;
  for (const auto& d : documents_) authors.insert(d.author);
  if (authors.contains(std::string(label))) return std::string(label);

  const auto lower = [](std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const std::string want = lower(label);
  std::vector<std::string> hits;
  for (const auto& a : authors) {
    if (!want.empty() && lower(a).starts_with(want)) hits.push_back(a);
  }
  if (hits.size() == 1) return hits.front();
  if (hits.empty()) throw ProtocolError("author '" + std::string(label) + "' not found in corpus " + name_);
  std::string names;
  for (const auto& h : hits) names += (names.empty() ? "" : ", ") + h;
  throw ProtocolError("author '" + std::string(label) + "' is ambiguous: " + names);
}

// ---------------------------------------------------------------------------
// Folds

int FoldAssignment::fold_of(std::string_view group) const {
  const auto it = fold_of_group.find(group);
  if (it == fold_of_group.end()) throw ProtocolError("group '" + std::string(group) + "' has no fold");
  return it->second;
}

FoldAssignment grouped_stratified_kfold(std::span<const std::string> group_ids, std::span<const int> labels,
                                        int k, std::uint64_t seed) {
  if (group_ids.size() != labels.size()) throw ProtocolError("group/label count mismatch");
  if (k < 2) throw ProtocolError("k must be at least 2");
  std::map<std::string, bool, std::less<>> positive;
  for (std::size_t i = 0; i < group_ids.size(); ++i) positive[group_ids[i]] |= labels[i] == 1;
  if (positive.size() < static_cast<std::size_t>(k)) {
    throw ProtocolError("fewer groups (" + std::to_string(positive.size()) + ") than folds (" +
                        std::to_string(k) + ")");
  }

  std::vector<std::string> pos, neg;
  for (const auto& [group, is_pos] : positive) (is_pos ? pos : neg).push_back(group);
  Rng rng(seed);
  shuffle(pos, rng);
  shuffle(neg, rng);

  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  std::size_t slot = 0;
  for (const auto* stratum : {&pos, &neg}) {
    for (const auto& g : *stratum) fa.fold_of_group.emplace(g, static_cast<int>(slot++ % k));
  }
  return fa;
}

FoldAssignment grouped_stratified_kfold(std::span<const LabelledUnit> units,
                                        std::string_view positive_author, int k, std::uint64_t seed) {
  std::vector<std::string> groups;
  std::vector<int> labels;
  for (const auto& u : units) {
    groups.push_back(u.group_id);
    labels.push_back(u.author == positive_author ? 1 : 0);
  }
  return grouped_stratified_kfold(groups, labels, k, seed);
}

// ---------------------------------------------------------------------------
// Grid search

Grid Grid::of(std::vector<double> values) {
  if (values.empty()) throw ProtocolError("empty hyperparameter grid");
  for (double v : values) {
    if (!(v > 0.0)) throw ProtocolError("grid values must be positive");
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return Grid{std::move(values)};
}

Grid Grid::full(Learner learner) {
  if (learner == Learner::multinomial_nb) return of({1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0});
  return of({0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0});
}

Grid Grid::reduced(Learner learner) {
  if (learner == Learner::multinomial_nb) return of({1e-6, 1e-3, 1.0});
  return of({0.01, 1.0, 100.0});
}

double fallback_hyperparameter(Learner learner) { return learner == Learner::multinomial_nb ? 0.001 : 0.1; }

GridSearchResult grid_search(const TrainingPool& pool, Learner learner, const Grid& grid, int k,
                             std::uint64_t seed) {
  GridSearchResult result;
  result.best = fallback_hyperparameter(learner);
  result.fallback = true;

  std::set<std::string_view> groups, positive_groups;
  for (std::size_t i = 0; i < pool.group_ids.size(); ++i) {
    groups.insert(pool.group_ids[i]);
    if (pool.y[i] == 1) positive_groups.insert(pool.group_ids[i]);
  }
  if (positive_groups.size() < 2 || grid.values.empty()) return result;
  const int folds = std::min<int>(k, static_cast<int>(groups.size()));
  if (folds < 2) return result;

  const auto assignment = grouped_stratified_kfold(pool.group_ids, pool.y, folds, seed);
  std::vector<int> fold(pool.x.size());
  for (std::size_t i = 0; i < fold.size(); ++i) fold[i] = assignment.fold_of(pool.group_ids[i]);

  std::vector<double> f1_sum(grid.values.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<FeatureVector> x_train;
    std::vector<int> y_train;
    std::vector<std::size_t> validation, whole;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      if (fold[i] == f) {
        validation.push_back(i);
        if (pool.whole_document[i]) whole.push_back(i);
      } else {
        x_train.push_back(pool.x[i]);
        y_train.push_back(pool.y[i]);
      }
    }
    const auto& scored = whole.empty() ? validation : whole;
    const bool has_positive = std::any_of(scored.begin(), scored.end(), [&](std::size_t i) { return pool.y[i] == 1; });
    const auto train_pos = std::count(y_train.begin(), y_train.end(), 1);
    if (!has_positive || train_pos == 0 || train_pos == static_cast<std::ptrdiff_t>(y_train.size())) continue;

    for (std::size_t g = 0; g < grid.values.size(); ++g) {
      TrainConfig cfg = TrainConfig::defaults(learner, grid.values[g]);
      cfg.seed = seed;
      const LinearModel model = train(x_train, y_train, cfg);
      ++result.trainings;
      ConfusionCounts c;
      for (std::size_t i : scored) {
        tally(c, pool.y[i] == 1, decide(predict_posterior(model, pool.x[i])) == Decision::yes);
      }
      f1_sum[g] += f1(c);
    }
    ++result.folds_used;
  }
  if (result.folds_used == 0) return result;

  result.fallback = false;
  result.mean_f1.resize(grid.values.size());
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.values.size(); ++g) {
    result.mean_f1[g] = f1_sum[g] / result.folds_used;
    if (result.mean_f1[g] > result.mean_f1[best]) best = g;
  }
  result.best = grid.values[best];
  return result;
}

// ---------------------------------------------------------------------------
// Leave-one-out verification

DecisionRecord VerificationResult::record(bool truth) const {
  return DecisionRecord{author, doc_id, truth, decision == Decision::yes, posterior, hyperparameter};
}

namespace {

struct Task {
  std::string author;
  std::size_t document;  // index into PreparedCorpus::documents()
};

/// Fits the full cycle on `training` units and scores `test`.
VerificationResult fit_and_verify(const PreparedCorpus& corpus, const std::string& author,
                                  std::span<const std::size_t> training, const ProtocolOptions& options,
                                  const Grid& grid, const std::string& test_id,
                                  const std::function<FeatureVector(const FeatureSpace&,
                                                                    const FeatureProjection&)>& test_vector) {
  const auto& units = corpus.units();
  std::vector<CountedUnit> counted;
  counted.reserve(training.size());
  for (std::size_t i : training) counted.push_back({&corpus.counts()[i], units[i].author == author});

  VerificationResult r;
  r.author = author;
  r.doc_id = test_id;
  r.space = fit_feature_space(counted, corpus.counter().char_dictionary(), corpus.counter().word_dictionary(),
                              corpus.specs());
  const FeatureProjection projection(r.space, corpus.counter().char_dictionary(),
                                     corpus.counter().word_dictionary());

  TrainingPool pool;
  pool.x.reserve(training.size());
  for (std::size_t i : training) {
    pool.x.push_back(transform(corpus.counts()[i], r.space, projection));
    pool.y.push_back(units[i].author == author ? 1 : 0);
    pool.group_ids.push_back(units[i].group_id);
    pool.whole_document.push_back(units[i].kind == UnitKind::whole_document);
  }

  const auto search = grid_search(pool, options.learner, grid, options.folds, options.seed);
  r.hyperparameter = search.best;
  r.fallback_hyperparameter = search.fallback;
  if (options.observer) {
    options.observer(LooIteration{author, test_id, training, &r.space, r.hyperparameter});
  }

  TrainConfig cfg = TrainConfig::defaults(options.learner, r.hyperparameter);
  cfg.seed = options.seed;
  r.model = train(pool.x, pool.y, cfg);
  r.posterior = predict_posterior(r.model, test_vector(r.space, projection));
  r.decision = decide(r.posterior);
  return r;
}

void check_eligible(const PreparedCorpus& corpus, std::string_view author) {
  const auto eligible = corpus.eligible_authors();
  if (std::find(eligible.begin(), eligible.end(), author) == eligible.end()) {
    throw ProtocolError("author '" + std::string(author) +
                        "' is not eligible for verification (needs two or more documents, not miscellanea)");
  }
}

std::vector<DecisionRecord> run_tasks(const PreparedCorpus& corpus, const std::vector<Task>& tasks,
                                      const ProtocolOptions& options) {
  const Grid grid = options.effective_grid();
  std::vector<DecisionRecord> out(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;

  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const auto& held = corpus.documents()[tasks[t].document];
        std::vector<std::size_t> training;
        training.reserve(corpus.units().size());
        for (std::size_t i = 0; i < corpus.units().size(); ++i) {
          if (i < held.begin || i >= held.end) training.push_back(i);
        }
        const auto r = fit_and_verify(
            corpus, tasks[t].author, training, options, grid, held.doc_id,
            [&](const FeatureSpace& space, const FeatureProjection& projection) {
              return transform(corpus.counts()[held.begin], space, projection);
            });
        out[t] = r.record(held.author == tasks[t].author);
      } catch (...) {
        errors[t] = std::current_exception();
      }
      if (options.progress) {
        const std::lock_guard lock(progress_mutex);
        options.progress(++done, tasks.size());
      }
    }
  };

  const unsigned n_workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(tasks.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<Task> tasks_for(const PreparedCorpus& corpus, const std::string& author) {
  std::vector<Task> tasks;
  for (std::size_t d = 0; d < corpus.documents().size(); ++d) tasks.push_back({author, d});
  return tasks;
}

}  // namespace

std::vector<DecisionRecord> loo_author_verification(const PreparedCorpus& corpus, std::string_view author,
                                                    const ProtocolOptions& options) {
  check_eligible(corpus, author);
  return run_tasks(corpus, tasks_for(corpus, std::string(author)), options);
}

EvaluationReport run_full_evaluation(const PreparedCorpus& corpus, const ProtocolOptions& options,
                                     std::span<const std::string> authors) {
  std::vector<std::string> selected(authors.begin(), authors.end());
  if (selected.empty()) selected = corpus.eligible_authors();
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  if (selected.empty()) throw ProtocolError("corpus " + corpus.name() + " has no eligible authors");

  std::vector<Task> tasks;
  for (const auto& a : selected) {
    check_eligible(corpus, a);
    auto more = tasks_for(corpus, a);
    tasks.insert(tasks.end(), more.begin(), more.end());
  }
  return EvaluationReport::from_decisions(corpus.name(), std::string(short_name(options.learner)),
                                          run_tasks(corpus, tasks, options));
}

VerificationResult verify_disputed(const PreparedCorpus& corpus, std::string_view author, std::string doc_id,
                                   std::string_view disputed_text, const ProtocolOptions& options) {
  const std::string resolved = corpus.resolve_author(author);
  if (corpus.is_miscellanea(resolved)) {
    throw ProtocolError("'" + resolved + "' is a miscellanea label, not an author");
  }
  const Grid grid = options.effective_grid();
  const LabelledUnit unit = whole_document_unit(doc_id, "", disputed_text, corpus.segmentation());
  if (unit.word_count == 0) throw ProtocolError("disputed text '" + doc_id + "' has no words");
  const RawCounts raw = count_features(unit, corpus.specs());

  std::vector<std::size_t> training(corpus.units().size());
  for (std::size_t i = 0; i < training.size(); ++i) training[i] = i;
  return fit_and_verify(corpus, resolved, training, options, grid, doc_id,
                        [&](const FeatureSpace& space, const FeatureProjection&) { return transform(raw, space); });
}

// ---------------------------------------------------------------------------
// Provenance

namespace {
constexpr std::string_view kManifestFormat = "latinav-run-manifest";
constexpr std::string_view kSpaceFormat = "latinav-feature-space";
constexpr int kFormatVersion = 1;

nlohmann::json sparse_to_json(const SparseGroupSpace& g) {
  return {{"features", g.features}, {"df", g.df}, {"idf", g.idf}, {"vocabulary_size", g.vocabulary_size}};
}

SparseGroupSpace sparse_from_json(const nlohmann::json& j) {
  SparseGroupSpace g;
  g.features = j.at("features").get<std::vector<std::string>>();
  g.df = j.at("df").get<std::vector<std::uint32_t>>();
  g.idf = j.at("idf").get<std::vector<double>>();
  g.vocabulary_size = j.at("vocabulary_size").get<std::size_t>();
  if (g.df.size() != g.features.size() || g.idf.size() != g.features.size()) {
    throw ProtocolError("feature space: inconsistent sparse group lengths");
  }
  return g;
}

nlohmann::json parse_versioned(std::istream& in, std::string_view format) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("malformed " + std::string(format) + ": " + e.what());
  }
  if (j.value("format", "") != format || j.value("version", 0) != kFormatVersion) {
    throw ProtocolError("expected " + std::string(format) + " version " + std::to_string(kFormatVersion));
  }
  return j;
}
}  // namespace

void write_manifest(std::ostream& out, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = kManifestFormat;
  j["version"] = kFormatVersion;
  j["command"] = m.command;
  j["corpus"] = m.corpus;
  j["corpus_checksum"] = m.corpus_checksum;
  j["documents"] = m.documents;
  j["units"] = m.units;
  j["learner"] = m.learner;
  j["seed"] = m.seed;
  j["grid"] = m.grid;
  j["folds"] = m.folds;
  j["workers"] = m.workers;
  j["authors"] = m.authors;
  j["flags"] = m.flags;
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(std::istream& in) {
  const auto j = parse_versioned(in, kManifestFormat);
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.corpus = j.at("corpus").get<std::string>();
    m.corpus_checksum = j.at("corpus_checksum").get<std::string>();
    m.documents = j.at("documents").get<std::size_t>();
    m.units = j.at("units").get<std::size_t>();
    m.learner = j.at("learner").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.grid = j.at("grid").get<std::vector<double>>();
    m.folds = j.at("folds").get<int>();
    m.workers = j.at("workers").get<unsigned>();
    m.authors = j.at("authors").get<std::vector<std::string>>();
    m.flags = j.at("flags").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed run manifest: ") + e.what());
  }
}

void save_feature_space(std::ostream& out, const FeatureSpace& s) {
  nlohmann::json j;
  j["format"] = kSpaceFormat;
  j["version"] = kFormatVersion;
  j["char_ngrams"] = sparse_to_json(s.char_ngrams);
  j["word_ngrams"] = sparse_to_json(s.word_ngrams);
  j["function_words"] = s.function_words;
  j["verbal_endings"] = s.verbal_endings;
  j["word_length_bins"] = s.word_length_bins;
  j["sentence_length_bins"] = s.sentence_length_bins;
  j["n_train_docs"] = s.n_train_docs;
  j["group_offsets"] = s.group_offsets;
  out << j.dump() << '\n';
}

FeatureSpace load_feature_space(std::istream& in) {
  const auto j = parse_versioned(in, kSpaceFormat);
  try {
    FeatureSpace s;
    s.char_ngrams = sparse_from_json(j.at("char_ngrams"));
    s.word_ngrams = sparse_from_json(j.at("word_ngrams"));
    s.function_words = j.at("function_words").get<std::size_t>();
    s.verbal_endings = j.at("verbal_endings").get<std::size_t>();
    s.word_length_bins = j.at("word_length_bins").get<std::size_t>();
    s.sentence_length_bins = j.at("sentence_length_bins").get<std::size_t>();
    s.n_train_docs = j.at("n_train_docs").get<std::uint32_t>();
    s.group_offsets = j.at("group_offsets").get<std::array<std::size_t, kGroupCount + 1>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed feature space: ") + e.what());
  }
}

}  // namespace latinav
