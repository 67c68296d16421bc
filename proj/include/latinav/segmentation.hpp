#pragma once

// Sentence splitting, short-sentence merging, 3-sentence segments and the
// expansion of a corpus into labelled training/test units.

#include <cstddef>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latinav/corpus.hpp"

namespace latinav {

struct Sentence {
  std::string text;
  std::size_t word_count = 0;
  // Byte range of `text` inside the split input.
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Sentence&) const = default;
};

struct SplitterOptions {
  std::string terminators = ".!?;";
  /// Lowercase tokens that never end a sentence when followed by '.'.
  std::set<std::string> abbreviations{"cf", "etc", "fr", "id", "ibid", "sc", "scil", "ss"};
  /// Treat single-letter tokens followed by '.' ("S.", "B.") as initials.
  bool guard_initials = true;
};

/// Number of words in `text` once normalized (punctuation does not count).
std::size_t count_words(std::string_view text);

/// Splits cased, punctuated text at runs of terminator characters followed
/// by whitespace or end of text. Chunks without words are attached to the
/// preceding sentence (or the following one, at the start of the text).
std::vector<Sentence> split_sentences(std::string_view text, const SplitterOptions& options = {});

/// Merges every sentence shorter than `min_words` into the next one, left to
/// right; a short final sentence merges into the previous one.
std::vector<Sentence> merge_short_sentences(std::vector<Sentence> sentences,
                                            std::size_t min_words = 8);

/// Non-overlapping windows of `window` sentences; the 1..window-1 leftover
/// sentences extend the last window. At most `window` sentences yield no
/// segments at all.
std::vector<std::vector<Sentence>> make_segments(std::span<const Sentence> sentences,
                                                 std::size_t window = 3);

enum class UnitKind { whole_document, segment };

struct LabelledUnit {
  std::string unit_id;
  std::string group_id;  // doc_id of the source document
  std::string author;
  UnitKind kind = UnitKind::whole_document;
  /// Citation-stripped text, still cased and punctuated.
  std::string text;
  std::size_t word_count = 0;

  bool operator==(const LabelledUnit&) const = default;
};

struct SegmentationOptions {
  CitationPolicy citations;
  SplitterOptions splitter;
  std::size_t min_words = 8;
  std::size_t window = 3;
};

/// The whole-document unit for an arbitrary text (used for disputed texts).
LabelledUnit whole_document_unit(std::string doc_id, std::string author, std::string_view raw_text,
                                 const SegmentationOptions& options = {});

/// Segments of one document, in order.
std::vector<LabelledUnit> document_segments(const Document& doc,
                                            const SegmentationOptions& options = {});

/// One whole-document unit per document followed by its segments, documents
/// in corpus order.
std::vector<LabelledUnit> expand_corpus(const Corpus& corpus,
                                        const SegmentationOptions& options = {});

/// Debug dump: `unit_id,group_id,author,kind,word_count`.
void write_units_csv(std::ostream& out, std::span<const LabelledUnit> units);

}  // namespace latinav
