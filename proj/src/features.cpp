#include "latinav/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "utf8.hpp"

#ifndef LATINAV_DEFAULT_RESOURCE_DIR
#define LATINAV_DEFAULT_RESOURCE_DIR "resources"
#endif

namespace fs = std::filesystem;

namespace latinav {

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::char_ngrams: return "char_ngrams";
    case FeatureGroup::word_ngrams: return "word_ngrams";
    case FeatureGroup::function_words: return "function_words";
    case FeatureGroup::verbal_endings: return "verbal_endings";
    case FeatureGroup::word_lengths: return "word_lengths";
    case FeatureGroup::sentence_lengths: return "sentence_lengths";
  }
  return "?";
}

fs::path default_resource_dir() {
  if (const char* env = std::getenv("LATINAV_RESOURCE_DIR"); env && *env) return fs::path(env);
  return fs::path(LATINAV_DEFAULT_RESOURCE_DIR);
}

std::vector<std::string> load_lexicon(const fs::path& path, std::size_t expected_count) {
  std::ifstream in(path);
  if (!in) throw FeatureError("cannot read lexicon " + path.string());
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    if (normalize(line) != line || line.find(' ') != std::string::npos) {
      throw FeatureError(path.string() + ": entry '" + line + "' is not a normalized single token");
    }
    entries.push_back(line);
  }
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw FeatureError(path.string() + ": duplicate entries");
  }
  if (expected_count != 0 && entries.size() != expected_count) {
    throw FeatureError(path.string() + ": expected " + std::to_string(expected_count) +
                       " entries, found " + std::to_string(entries.size()));
  }
  return entries;
}

FeatureSpecs FeatureSpecs::from_resources(const fs::path& resource_dir) {
  FeatureSpecs specs;
  specs.function_words = load_lexicon(resource_dir / "function_words.txt", 74);
  specs.verbal_endings = load_lexicon(resource_dir / "verbal_endings.txt", 245);
  return specs;
}

// ---------------------------------------------------------------------------
// Counting

std::uint32_t FeatureDictionary::intern(std::string_view feature) {
  if (auto it = ids_.find(feature); it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(strings_.size());
  strings_.emplace_back(feature);
  ids_.emplace(strings_.back(), id);
  return id;
}

std::int64_t FeatureDictionary::find(std::string_view feature) const {
  auto it = ids_.find(feature);
  return it == ids_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

FeatureCounter::FeatureCounter(FeatureSpecs specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.function_words.size(); ++i) {
    function_index_.emplace(specs_.function_words[i], i);
  }
  for (std::size_t i = 0; i < specs_.verbal_endings.size(); ++i) {
    ending_index_.emplace(specs_.verbal_endings[i], i);
    longest_ending_ = std::max(longest_ending_, specs_.verbal_endings[i].size());
  }
}

namespace {

SparseCounts to_sorted(const std::unordered_map<std::uint32_t, std::uint32_t>& counts) {
  SparseCounts out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t clip_bin(std::size_t value, int lo, int hi) {
  const auto v = std::clamp<std::int64_t>(static_cast<std::int64_t>(value), lo, hi);
  return static_cast<std::size_t>(v - lo);
}

}  // namespace

UnitCounts FeatureCounter::count(const LabelledUnit& unit) {
  UnitCounts out;
  const std::string text = normalize(unit.text);
  const auto tokens = whitespace_tokens(text);

  std::unordered_map<std::uint32_t, std::uint32_t> local;
  const auto cps = utf8::boundaries(text);
  const std::size_t n_cps = cps.size() - 1;
  for (int n : specs_.char_ngram_orders) {
    const auto order = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + order <= n_cps; ++i) {
      ++local[chars_.intern(std::string_view(text).substr(cps[i], cps[i + order] - cps[i]))];
    }
  }
  out.char_ngrams = to_sorted(local);

  local.clear();
  for (int n : specs_.word_ngram_orders) {
    const auto order = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      // Tokens of normalized text are separated by exactly one space.
      const char* b = tokens[i].data();
      const char* e = tokens[i + order - 1].data() + tokens[i + order - 1].size();
      ++local[words_.intern(std::string_view(b, static_cast<std::size_t>(e - b)))];
    }
  }
  out.word_ngrams = to_sorted(local);

  out.function_words.assign(specs_.function_words.size(), 0);
  out.verbal_endings.assign(specs_.verbal_endings.size(), 0);
  out.word_lengths.assign(specs_.word_length_bins(), 0);
  std::string key;
  for (auto tok : tokens) {
    key.assign(tok);
    if (auto it = function_index_.find(key); it != function_index_.end()) ++out.function_words[it->second];
    // Every lexicon ending that is a proper suffix of the token.
    for (std::size_t len = 1; len < tok.size() && len <= longest_ending_; ++len) {
      key.assign(tok.substr(tok.size() - len));
      if (auto it = ending_index_.find(key); it != ending_index_.end()) ++out.verbal_endings[it->second];
    }
    ++out.word_lengths[clip_bin(utf8::length(tok), specs_.min_word_length, specs_.max_word_length)];
  }

  out.sentence_lengths.assign(specs_.sentence_length_bins(), 0);
  for (const auto& s : split_sentences(unit.text, specs_.splitter)) {
    ++out.sentence_lengths[clip_bin(s.word_count, specs_.min_sentence_length,
                                    specs_.max_sentence_length)];
  }
  return out;
}

RawCounts count_features(const LabelledUnit& unit, const FeatureSpecs& specs) {
  FeatureCounter counter(specs);
  UnitCounts c = counter.count(unit);
  RawCounts raw;
  for (auto [id, n] : c.char_ngrams) raw.char_ngrams.emplace(counter.char_dictionary().str(id), n);
  for (auto [id, n] : c.word_ngrams) raw.word_ngrams.emplace(counter.word_dictionary().str(id), n);
  raw.function_words = std::move(c.function_words);
  raw.verbal_endings = std::move(c.verbal_endings);
  raw.word_lengths = std::move(c.word_lengths);
  raw.sentence_lengths = std::move(c.sentence_lengths);
  return raw;
}

// ---------------------------------------------------------------------------
// Selection and weighting

double chi_square(const Contingency& c) {
  const double n11 = static_cast<double>(c.present_positive);
  const double n10 = static_cast<double>(c.present_negative);
  const double n01 = static_cast<double>(c.absent_positive);
  const double n00 = static_cast<double>(c.absent_negative);
  const double denom = (n11 + n01) * (n10 + n00) * (n11 + n10) * (n01 + n00);
  if (denom == 0.0) return 0.0;
  const double cross = n11 * n00 - n10 * n01;
  return (n11 + n10 + n01 + n00) * cross * cross / denom;
}

std::size_t selection_size(std::size_t vocabulary_size, double fraction) {
  if (vocabulary_size == 0) return 0;
  // The epsilon keeps e.g. 0.1 * 30 from rounding up to 4.
  const double k = std::ceil(fraction * static_cast<double>(vocabulary_size) - 1e-9);
  return std::min(vocabulary_size, static_cast<std::size_t>(std::max(0.0, k)));
}

std::vector<std::string> select_top_fraction(const std::map<std::string, double>& scores,
                                             double fraction) {
  std::vector<std::pair<double, const std::string*>> ranked;
  ranked.reserve(scores.size());
  for (const auto& [feature, score] : scores) ranked.emplace_back(score, &feature);
  const std::size_t k = selection_size(ranked.size(), fraction);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return *a.second < *b.second;
                    });
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(*ranked[i].second);
  return out;
}

double tfidf_ltc(std::uint32_t raw_count, std::uint32_t df, std::uint32_t n_docs) {
  if (raw_count == 0 || df == 0) return 0.0;
  return (1.0 + std::log(static_cast<double>(raw_count))) *
         std::log(static_cast<double>(n_docs) / static_cast<double>(df));
}

// ---------------------------------------------------------------------------
// Fitting

std::int64_t SparseGroupSpace::column_of(std::string_view feature) const {
  auto it = std::lower_bound(features.begin(), features.end(), feature,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == features.end() || *it != feature) return -1;
  return it - features.begin();
}

namespace {

SparseGroupSpace fit_sparse_group(std::span<const CountedUnit> train,
                                  const SparseCounts UnitCounts::*member,
                                  const FeatureDictionary& dict, double fraction) {
  const std::size_t n_units = train.size();
  std::vector<std::uint32_t> df_all(dict.size(), 0);
  std::vector<std::uint32_t> df_pos(dict.size(), 0);
  std::uint64_t positives = 0;
  for (const auto& u : train) {
    if (u.positive) ++positives;
    for (auto [id, n] : (*u.counts).*member) {
      ++df_all[id];
      if (u.positive) ++df_pos[id];
    }
  }

  std::vector<std::uint32_t> vocab;
  std::vector<double> score(dict.size(), 0.0);
  for (std::uint32_t id = 0; id < df_all.size(); ++id) {
    if (df_all[id] == 0) continue;
    vocab.push_back(id);
    Contingency c;
    c.present_positive = df_pos[id];
    c.present_negative = df_all[id] - df_pos[id];
    c.absent_positive = positives - df_pos[id];
    c.absent_negative = (n_units - positives) - c.present_negative;
    score[id] = chi_square(c);
  }

  const std::size_t k = selection_size(vocab.size(), fraction);
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return dict.str(a) < dict.str(b);
  };
  std::nth_element(vocab.begin(), vocab.begin() + static_cast<std::ptrdiff_t>(k), vocab.end(), better);
  std::vector<std::uint32_t> chosen(vocab.begin(), vocab.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end(),
            [&](std::uint32_t a, std::uint32_t b) { return dict.str(a) < dict.str(b); });

  SparseGroupSpace g;
  g.vocabulary_size = vocab.size();
  g.features.reserve(k);
  g.df.reserve(k);
  g.idf.reserve(k);
  for (auto id : chosen) {
    g.features.push_back(dict.str(id));
    g.df.push_back(df_all[id]);
    g.idf.push_back(std::log(static_cast<double>(n_units) / static_cast<double>(df_all[id])));
  }
  return g;
}

}  // namespace

FeatureSpace fit_feature_space(std::span<const CountedUnit> train, const FeatureDictionary& chars,
                               const FeatureDictionary& words, const FeatureSpecs& specs) {
  if (train.empty()) throw FeatureError("fit_feature_space: no training units");
  if (std::none_of(train.begin(), train.end(), [](const CountedUnit& u) { return u.positive; })) {
    throw FeatureError("fit_feature_space: no positive training units");
  }

  FeatureSpace space;
  space.char_ngrams = fit_sparse_group(train, &UnitCounts::char_ngrams, chars, specs.selection_fraction);
  space.word_ngrams = fit_sparse_group(train, &UnitCounts::word_ngrams, words, specs.selection_fraction);
  space.function_words = specs.function_words.size();
  space.verbal_endings = specs.verbal_endings.size();
  space.word_length_bins = specs.word_length_bins();
  space.sentence_length_bins = specs.sentence_length_bins();
  space.n_train_docs = static_cast<std::uint32_t>(train.size());

  const std::array<std::size_t, kGroupCount> sizes{
      space.char_ngrams.features.size(), space.word_ngrams.features.size(), space.function_words,
      space.verbal_endings, space.word_length_bins, space.sentence_length_bins};
  space.group_offsets[0] = 0;
  for (std::size_t g = 0; g < kGroupCount; ++g) space.group_offsets[g + 1] = space.group_offsets[g] + sizes[g];
  return space;
}

FeatureSpace fit_feature_space(std::span<const LabelledUnit> train_units,
                               std::string_view positive_author, const FeatureSpecs& specs) {
  FeatureCounter counter(specs);
  std::vector<UnitCounts> counts;
  counts.reserve(train_units.size());
  for (const auto& u : train_units) counts.push_back(counter.count(u));
  std::vector<CountedUnit> train;
  train.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    train.push_back({&counts[i], train_units[i].author == positive_author});
  }
  return fit_feature_space(train, counter.char_dictionary(), counter.word_dictionary(), specs);
}

// ---------------------------------------------------------------------------
// Transform

double FeatureVector::dot(std::span<const double> dense) const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * dense[e.index];
  return s;
}

double FeatureVector::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  return s;
}

FeatureProjection::FeatureProjection(const FeatureSpace& space, const FeatureDictionary& chars,
                                     const FeatureDictionary& words)
    : char_columns_(chars.size(), -1), word_columns_(words.size(), -1) {
  const auto fill = [](const SparseGroupSpace& g, const FeatureDictionary& dict,
                       std::vector<std::int32_t>& columns) {
    for (std::size_t col = 0; col < g.features.size(); ++col) {
      const auto id = dict.find(g.features[col]);
      if (id >= 0) columns[static_cast<std::size_t>(id)] = static_cast<std::int32_t>(col);
    }
  };
  fill(space.char_ngrams, chars, char_columns_);
  fill(space.word_ngrams, words, word_columns_);
}

namespace {

/// Appends `group` (column-sorted, group-local) at `offset`, L2-normalized.
void append_normalized(std::vector<FeatureEntry>& out, std::vector<FeatureEntry>& group,
                       std::size_t offset) {
  // Sorting first fixes the summation order, so equal inputs give bit-equal norms.
  std::sort(group.begin(), group.end(),
            [](const FeatureEntry& a, const FeatureEntry& b) { return a.index < b.index; });
  double sq = 0.0;
  for (const auto& e : group) sq += e.value * e.value;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (const auto& e : group) {
    if (e.value != 0.0) out.push_back({static_cast<std::uint32_t>(offset + e.index), e.value * inv});
  }
}

void append_dense(std::vector<FeatureEntry>& out, const std::vector<std::uint32_t>& counts,
                  std::size_t offset) {
  double total = 0.0;
  for (auto c : counts) total += c;
  if (total == 0.0) return;
  std::vector<FeatureEntry> group;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] != 0) group.push_back({static_cast<std::uint32_t>(i), counts[i] / total});
  }
  append_normalized(out, group, offset);
}

template <typename Sparse, typename ColumnOf>
std::vector<FeatureEntry> weight_sparse(const Sparse& counts, const SparseGroupSpace& g,
                                        std::uint32_t n_docs, ColumnOf column_of) {
  std::vector<FeatureEntry> group;
  for (const auto& [key, n] : counts) {
    const std::int64_t col = column_of(key);
    if (col < 0) continue;
    const double w = tfidf_ltc(n, g.df[static_cast<std::size_t>(col)], n_docs);
    if (w != 0.0) group.push_back({static_cast<std::uint32_t>(col), w});
  }
  return group;
}

template <typename Counts>
FeatureVector assemble(const Counts& counts, const FeatureSpace& space,
                       std::vector<FeatureEntry> chars, std::vector<FeatureEntry> words) {
  FeatureVector v;
  v.dimension = space.dimension();
  append_normalized(v.entries, chars, space.group_begin(FeatureGroup::char_ngrams));
  append_normalized(v.entries, words, space.group_begin(FeatureGroup::word_ngrams));
  append_dense(v.entries, counts.function_words, space.group_begin(FeatureGroup::function_words));
  append_dense(v.entries, counts.verbal_endings, space.group_begin(FeatureGroup::verbal_endings));
  append_dense(v.entries, counts.word_lengths, space.group_begin(FeatureGroup::word_lengths));
  append_dense(v.entries, counts.sentence_lengths, space.group_begin(FeatureGroup::sentence_lengths));
  return v;
}

}  // namespace

FeatureVector transform(const UnitCounts& counts, const FeatureSpace& space,
                        const FeatureProjection& projection) {
  auto chars = weight_sparse(counts.char_ngrams, space.char_ngrams, space.n_train_docs,
                             [&](std::uint32_t id) { return projection.char_column(id); });
  auto words = weight_sparse(counts.word_ngrams, space.word_ngrams, space.n_train_docs,
                             [&](std::uint32_t id) { return projection.word_column(id); });
  return assemble(counts, space, std::move(chars), std::move(words));
}

FeatureVector transform(const RawCounts& counts, const FeatureSpace& space) {
  auto chars = weight_sparse(counts.char_ngrams, space.char_ngrams, space.n_train_docs,
                             [&](const std::string& f) { return space.char_ngrams.column_of(f); });
  auto words = weight_sparse(counts.word_ngrams, space.word_ngrams, space.n_train_docs,
                             [&](const std::string& f) { return space.word_ngrams.column_of(f); });
  return assemble(counts, space, std::move(chars), std::move(words));
}

FeatureVector transform(const LabelledUnit& unit, const FeatureSpace& space, const FeatureSpecs& specs) {
  return transform(count_features(unit, specs), space);
}

}  // namespace latinav
