#pragma once

// Six-group stylometric feature space.
//
// Groups, in global column order:
//   char n-grams (n = 3..5) | word n-grams (n = 1..2) | function words |
//   verbal endings | word lengths (1..23) | sentence lengths (3..70)
//
// The two sparse groups are reduced by chi-square selection on document
// presence and weighted by tf-idf (ltc); the four dense groups hold relative
// frequencies. Every non-empty group subvector is scaled to unit L2 norm.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "latinav/segmentation.hpp"

namespace latinav {

class FeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FeatureGroup : std::size_t {
  char_ngrams = 0,
  word_ngrams,
  function_words,
  verbal_endings,
  word_lengths,
  sentence_lengths,
};
inline constexpr std::size_t kGroupCount = 6;
std::string_view group_name(FeatureGroup g);

struct FeatureSpecs {
  std::vector<int> char_ngram_orders{3, 4, 5};
  std::vector<int> word_ngram_orders{1, 2};
  std::vector<std::string> function_words;
  std::vector<std::string> verbal_endings;
  int min_word_length = 1;
  int max_word_length = 23;
  int min_sentence_length = 3;
  int max_sentence_length = 70;
  double selection_fraction = 0.10;
  SplitterOptions splitter;

  std::size_t word_length_bins() const { return static_cast<std::size_t>(max_word_length - min_word_length + 1); }
  std::size_t sentence_length_bins() const {
    return static_cast<std::size_t>(max_sentence_length - min_sentence_length + 1);
  }

  /// Lexicons from `function_words.txt` (74 entries) and
  /// `verbal_endings.txt` (245 entries) in `resource_dir`.
  static FeatureSpecs from_resources(const std::filesystem::path& resource_dir);
};

/// Resource directory: $LATINAV_RESOURCE_DIR if set, else the build-time
/// location of the shipped lexicons.
std::filesystem::path default_resource_dir();

/// One entry per line; entries must be lowercase, u-normalized and unique.
/// Throws if the count differs from `expected_count` (0 disables the check).
std::vector<std::string> load_lexicon(const std::filesystem::path& path, std::size_t expected_count);

// ---------------------------------------------------------------------------
// Raw counting

/// Raw counts of one unit, keyed by feature string.
struct RawCounts {
  std::map<std::string, std::uint32_t> char_ngrams;
  std::map<std::string, std::uint32_t> word_ngrams;
  std::vector<std::uint32_t> function_words;
  std::vector<std::uint32_t> verbal_endings;
  std::vector<std::uint32_t> word_lengths;
  std::vector<std::uint32_t> sentence_lengths;
};

RawCounts count_features(const LabelledUnit& unit, const FeatureSpecs& specs);

/// String interning for one sparse group.
class FeatureDictionary {
 public:
  std::uint32_t intern(std::string_view feature);
  /// Id of `feature`, or -1 if never interned.
  std::int64_t find(std::string_view feature) const;
  const std::string& str(std::uint32_t id) const { return strings_[id]; }
  std::size_t size() const { return strings_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };
  std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> ids_;
  std::vector<std::string> strings_;
};

using SparseCounts = std::vector<std::pair<std::uint32_t, std::uint32_t>>;  // (id, count), id-sorted

/// Raw counts of one unit over interned sparse features.
struct UnitCounts {
  SparseCounts char_ngrams;
  SparseCounts word_ngrams;
  std::vector<std::uint32_t> function_words;
  std::vector<std::uint32_t> verbal_endings;
  std::vector<std::uint32_t> word_lengths;
  std::vector<std::uint32_t> sentence_lengths;
};

/// Counts units against shared dictionaries, so a corpus is counted once and
/// any training split can be fitted from the cached counts.
class FeatureCounter {
 public:
  explicit FeatureCounter(FeatureSpecs specs);

  UnitCounts count(const LabelledUnit& unit);

  const FeatureSpecs& specs() const { return specs_; }
  const FeatureDictionary& char_dictionary() const { return chars_; }
  const FeatureDictionary& word_dictionary() const { return words_; }

 private:
  FeatureSpecs specs_;
  FeatureDictionary chars_;
  FeatureDictionary words_;
  std::unordered_map<std::string, std::size_t> function_index_;
  std::unordered_map<std::string, std::size_t> ending_index_;
  std::size_t longest_ending_ = 0;
};

// ---------------------------------------------------------------------------
// Selection and weighting

/// Document-presence contingency of one feature against the positive class.
struct Contingency {
  std::uint64_t present_positive = 0;  // N11
  std::uint64_t present_negative = 0;  // N10
  std::uint64_t absent_positive = 0;   // N01
  std::uint64_t absent_negative = 0;   // N00

  std::uint64_t total() const {
    return present_positive + present_negative + absent_positive + absent_negative;
  }
};

/// N (N11 N00 - N10 N01)^2 / ((N11+N01)(N10+N00)(N11+N10)(N01+N00)), or 0
/// when any marginal is empty.
double chi_square(const Contingency& c);

/// The ceil(fraction * |scores|) highest-scoring features; ties at equal
/// score go to the lexicographically smaller feature. Returned in rank order.
std::vector<std::string> select_top_fraction(const std::map<std::string, double>& scores,
                                             double fraction);

/// Number of features kept out of a vocabulary of `vocabulary_size`.
std::size_t selection_size(std::size_t vocabulary_size, double fraction);

/// (1 + ln tf) * ln(N / df); 0 when tf = 0.
double tfidf_ltc(std::uint32_t raw_count, std::uint32_t df, std::uint32_t n_docs);

// ---------------------------------------------------------------------------
// Feature space

struct SparseGroupSpace {
  std::vector<std::string> features;  // selected, sorted lexicographically
  std::vector<std::uint32_t> df;
  std::vector<double> idf;
  std::size_t vocabulary_size = 0;

  /// Column within the group, or -1.
  std::int64_t column_of(std::string_view feature) const;
  bool operator==(const SparseGroupSpace&) const = default;
};

struct FeatureSpace {
  SparseGroupSpace char_ngrams;
  SparseGroupSpace word_ngrams;
  std::size_t function_words = 0;
  std::size_t verbal_endings = 0;
  std::size_t word_length_bins = 0;
  std::size_t sentence_length_bins = 0;
  std::uint32_t n_train_docs = 0;
  /// group_offsets[g] .. group_offsets[g+1] is the column range of group g.
  std::array<std::size_t, kGroupCount + 1> group_offsets{};

  std::size_t dimension() const { return group_offsets.back(); }
  std::size_t group_begin(FeatureGroup g) const { return group_offsets[static_cast<std::size_t>(g)]; }
  std::size_t group_end(FeatureGroup g) const { return group_offsets[static_cast<std::size_t>(g) + 1]; }

  bool operator==(const FeatureSpace&) const = default;
};

struct CountedUnit {
  const UnitCounts* counts;
  bool positive;
};

/// Fits vocabularies, chi-square selection and idf on `train` only.
FeatureSpace fit_feature_space(std::span<const CountedUnit> train, const FeatureDictionary& chars,
                               const FeatureDictionary& words, const FeatureSpecs& specs);

/// Convenience overload: counts `train_units` and fits with
/// `positive_author` as the positive class.
FeatureSpace fit_feature_space(std::span<const LabelledUnit> train_units,
                               std::string_view positive_author, const FeatureSpecs& specs);

struct FeatureEntry {
  std::uint32_t index;
  double value;
  bool operator==(const FeatureEntry&) const = default;
};

/// Sparse vector over the global feature dimension, index-sorted.
struct FeatureVector {
  std::vector<FeatureEntry> entries;
  std::size_t dimension = 0;

  double dot(std::span<const double> dense) const;
  double squared_norm() const;
  bool operator==(const FeatureVector&) const = default;
};

/// Maps dictionary ids to group columns of a fitted space.
class FeatureProjection {
 public:
  FeatureProjection(const FeatureSpace& space, const FeatureDictionary& chars,
                    const FeatureDictionary& words);
  std::int64_t char_column(std::uint32_t id) const {
    return id < char_columns_.size() ? char_columns_[id] : -1;
  }
  std::int64_t word_column(std::uint32_t id) const {
    return id < word_columns_.size() ? word_columns_[id] : -1;
  }

 private:
  std::vector<std::int32_t> char_columns_;
  std::vector<std::int32_t> word_columns_;
};

FeatureVector transform(const UnitCounts& counts, const FeatureSpace& space,
                        const FeatureProjection& projection);
FeatureVector transform(const RawCounts& counts, const FeatureSpace& space);
FeatureVector transform(const LabelledUnit& unit, const FeatureSpace& space, const FeatureSpecs& specs);

}  // namespace latinav
