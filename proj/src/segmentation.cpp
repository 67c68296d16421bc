#include "latinav/segmentation.hpp"

#include <cctype>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "csv.hpp"

namespace latinav {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

/// The token immediately before position `dot`, stripped of leading
/// punctuation and lowercased (ASCII).
std::string token_before(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_ws(text[b - 1])) --b;
  while (b < dot && std::ispunct(static_cast<unsigned char>(text[b]))) ++b;
  std::string tok(text.substr(b, dot - b));
  for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return tok;
}

bool guarded(std::string_view text, std::size_t dot, const SplitterOptions& options) {
  const std::string tok = token_before(text, dot);
  if (tok.empty()) return false;
  if (options.guard_initials && tok.size() == 1 && std::isalpha(static_cast<unsigned char>(tok[0]))) {
    return true;
  }
  return options.abbreviations.contains(tok);
}

Sentence make_sentence(std::string_view text, std::size_t begin, std::size_t end) {
  Sentence s;
  s.begin = begin;
  s.end = end;
  s.text = std::string(text.substr(begin, end - begin));
  s.word_count = count_words(s.text);
  return s;
}

}  // namespace

std::size_t count_words(std::string_view text) { return whitespace_tokens(normalize(text)).size(); }

std::vector<Sentence> split_sentences(std::string_view text, const SplitterOptions& options) {
  const auto is_term = [&](char c) { return options.terminators.find(c) != std::string::npos; };

  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  const std::size_t n = text.size();
  std::size_t start = 0;
  while (start < n && is_ws(text[start])) ++start;

  std::size_t i = start;
  while (i < n) {
    if (!is_term(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && (is_term(text[j]) || is_closer(text[j]))) ++j;
    const bool at_boundary = j == n || is_ws(text[j]);
    const bool lone_dot = j == i + 1 && text[i] == '.';
    if (at_boundary && !(lone_dot && guarded(text, i, options))) {
      chunks.emplace_back(start, j);
      start = j;
      while (start < n && is_ws(text[start])) ++start;
    }
    i = j;
  }
  if (start < n) {
    std::size_t end = n;
    while (end > start && is_ws(text[end - 1])) --end;
    chunks.emplace_back(start, end);
  }

  std::vector<Sentence> sentences;
  std::size_t pending_begin = std::string_view::npos;
  for (const auto& [b, e] : chunks) {
    const std::size_t begin = pending_begin == std::string_view::npos ? b : pending_begin;
    Sentence s = make_sentence(text, begin, e);
    if (s.word_count > 0) {
      sentences.push_back(std::move(s));
      pending_begin = std::string_view::npos;
    } else if (!sentences.empty()) {
      sentences.back() = make_sentence(text, sentences.back().begin, e);
    } else {
      pending_begin = begin;
    }
  }
  return sentences;
}

std::vector<Sentence> merge_short_sentences(std::vector<Sentence> sentences, std::size_t min_words) {
  if (sentences.empty()) throw std::invalid_argument("merge_short_sentences: empty input");

  const auto join = [](const Sentence& a, const Sentence& b) {
    Sentence m;
    m.text = a.text + " " + b.text;
    m.word_count = a.word_count + b.word_count;
    m.begin = a.begin;
    m.end = b.end;
    return m;
  };

  std::vector<Sentence> out;
  out.reserve(sentences.size());
  std::size_t i = 0;
  while (i < sentences.size()) {
    Sentence current = std::move(sentences[i++]);
    while (current.word_count < min_words && i < sentences.size()) {
      current = join(current, sentences[i++]);
    }
    if (current.word_count < min_words && !out.empty()) {
      out.back() = join(out.back(), current);
    } else {
      out.push_back(std::move(current));
    }
  }
  return out;
}

std::vector<std::vector<Sentence>> make_segments(std::span<const Sentence> sentences,
                                                 std::size_t window) {
  if (window == 0) throw std::invalid_argument("make_segments: window must be positive");
  std::vector<std::vector<Sentence>> segments;
  if (sentences.size() <= window) return segments;
  const std::size_t count = sentences.size() / window;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t b = k * window;
    const std::size_t e = k + 1 == count ? sentences.size() : b + window;
    segments.emplace_back(sentences.begin() + static_cast<std::ptrdiff_t>(b),
                          sentences.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return segments;
}

LabelledUnit whole_document_unit(std::string doc_id, std::string author, std::string_view raw_text,
                                 const SegmentationOptions& options) {
  LabelledUnit u;
  u.unit_id = doc_id;
  u.group_id = std::move(doc_id);
  u.author = std::move(author);
  u.kind = UnitKind::whole_document;
  u.text = strip_citations(raw_text, options.citations);
  u.word_count = count_words(u.text);
  return u;
}

std::vector<LabelledUnit> document_segments(const Document& doc, const SegmentationOptions& options) {
  std::vector<LabelledUnit> units;
  const std::string text = strip_citations(doc.raw_text, options.citations);
  auto sentences = split_sentences(text, options.splitter);
  if (sentences.empty()) return units;
  sentences = merge_short_sentences(std::move(sentences), options.min_words);

  std::size_t index = 0;
  for (const auto& segment : make_segments(sentences, options.window)) {
    LabelledUnit u;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "#%05zu", ++index);
    u.unit_id = doc.doc_id + suffix;
    u.group_id = doc.doc_id;
    u.author = doc.author;
    u.kind = UnitKind::segment;
    for (const auto& s : segment) {
      if (!u.text.empty()) u.text.push_back(' ');
      u.text += s.text;
      u.word_count += s.word_count;
    }
    units.push_back(std::move(u));
  }
  return units;
}

std::vector<LabelledUnit> expand_corpus(const Corpus& corpus, const SegmentationOptions& options) {
  std::vector<LabelledUnit> units;
  for (const auto& doc : corpus.documents) {
    units.push_back(whole_document_unit(doc.doc_id, doc.author, doc.raw_text, options));
    auto segments = document_segments(doc, options);
    units.insert(units.end(), std::make_move_iterator(segments.begin()),
                 std::make_move_iterator(segments.end()));
  }
  return units;
}

void write_units_csv(std::ostream& out, std::span<const LabelledUnit> units) {
  out << "unit_id,group_id,author,kind,word_count\n";
  for (const auto& u : units) {
    out << csv::quote(u.unit_id) << ',' << csv::quote(u.group_id) << ',' << csv::quote(u.author)
        << ',' << (u.kind == UnitKind::whole_document ? "whole_document" : "segment") << ','
        << u.word_count << '\n';
  }
}

}  // namespace latinav
