#pragma once

// Corpus ingestion: documents, citation markers, normalization, dataset
// fetching.
//
// Texts follow the curated-edition convention: explicit Latin citations are
// wrapped in asterisks (`*...*`) and citations in other languages (mostly
// Florentine vernacular) in curly brackets (`{...}`).

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace latinav {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for `*` / `{}` spans that do not pair up; carries the byte offset
/// of the offending marker.
class MarkerError : public CorpusError {
 public:
  MarkerError(const std::string& what, std::size_t offset)
      : CorpusError(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

enum class Genre { epistolary, literary };

std::string to_string(Genre g);
Genre parse_genre(std::string_view s);

struct Document {
  std::string doc_id;
  std::string author;
  std::string title;
  Genre genre = Genre::epistolary;
  std::string raw_text;
  std::size_t word_count = 0;

  bool operator==(const Document&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<Document> documents;  // sorted by doc_id
  std::set<std::string> miscellanea_authors;

  bool operator==(const Corpus&) const = default;

  const Document* find(std::string_view doc_id) const;
  std::vector<std::string> authors() const;
  std::size_t documents_by(std::string_view author) const;
  bool is_miscellanea(std::string_view author) const {
    return miscellanea_authors.contains(std::string(author));
  }
};

enum class SpanPolicy { remove, keep };

struct CitationPolicy {
  SpanPolicy latin_citations = SpanPolicy::remove;
  SpanPolicy vernacular_citations = SpanPolicy::remove;

  bool operator==(const CitationPolicy&) const = default;
};

enum class SpanKind { latin, vernacular };

/// A marked citation; [begin, end) covers the markers themselves.
struct MarkerSpan {
  SpanKind kind;
  std::size_t begin;
  std::size_t end;

  bool operator==(const MarkerSpan&) const = default;
};

/// Parses the citation markers of `text`. Spans of different kinds may nest
/// but may not cross; `{` may not nest inside another `{`.
std::vector<MarkerSpan> parse_markers(std::string_view text);

/// Removes the spans selected by `policy` (content and markers) and the
/// marker characters of the kept spans. The whitespace around each removal
/// site collapses to one space; text with no markers is returned unchanged.
std::string strip_citations(std::string_view text,
                            const CitationPolicy& policy = {});

/// Lowercases, maps v to u, replaces punctuation with spaces and collapses
/// runs of whitespace to a single space (trimmed).
std::string normalize(std::string_view text);

/// Whitespace-separated tokens.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

// ---------------------------------------------------------------------------
// Configuration

/// Flat `key = value` configuration, `#` starts a comment. Keys may be
/// dotted (`medlatinepi.sha256`).
class Config {
 public:
  Config() = default;
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, std::string fallback) const;
  /// Comma-separated list; empty entries dropped, entries trimmed.
  std::vector<std::string> get_list(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline constexpr std::string_view kDefaultMiscellaneaAuthor = "Petrus de Boateriis";

struct LoadOptions {
  std::string name;
  /// CSV with header `file,author,genre`; paths relative to the corpus root.
  std::optional<std::filesystem::path> manifest;
  Genre default_genre = Genre::epistolary;
  std::set<std::string> miscellanea_authors{std::string(kDefaultMiscellaneaAuthor)};
  /// When set, the number of loaded documents must match.
  std::optional<std::size_t> expected_documents;
};

/// Loads every `<Author>_<DocId>.txt` under `root` (recursively), or exactly
/// the files listed in the manifest. Documents are sorted by doc_id.
Corpus load_corpus(const std::filesystem::path& root, const LoadOptions& options = {});

/// Builds LoadOptions from the `<dataset>.*` keys of a config:
/// `genre`, `miscellanea_authors`, `expected_documents`, `manifest`.
LoadOptions load_options_from_config(const Config& config, const std::string& dataset);

/// SHA-256 over the sorted (doc_id, author, raw_text) triples; identifies a
/// corpus in run manifests independently of file timestamps or layout.
std::string corpus_checksum(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Dataset archives

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

class FetchError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class ChecksumMismatch : public FetchError {
 public:
  ChecksumMismatch(const std::string& expected, const std::string& actual);
  const std::string& expected() const { return expected_; }
  const std::string& actual() const { return actual_; }

 private:
  std::string expected_;
  std::string actual_;
};

/// Downloads `url` to `dest` unless a file with the expected digest is
/// already there. An empty `expected_checksum` disables verification (the
/// caller is responsible for recording the digest). `file://` URLs are
/// supported.
std::filesystem::path fetch_dataset(const std::string& url,
                                    const std::string& expected_checksum,
                                    const std::filesystem::path& dest);

/// Extracts a zip archive (stored or deflated entries) below `dest_dir`.
/// Returns the extracted file paths. Entries escaping `dest_dir` are
/// rejected.
std::vector<std::filesystem::path> extract_zip(const std::filesystem::path& archive,
                                               const std::filesystem::path& dest_dir);

}  // namespace latinav
