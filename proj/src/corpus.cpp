#include "latinav/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "csv.hpp"
#include "utf8.hpp"

namespace fs = std::filesystem;

namespace latinav {

std::string to_string(Genre g) {
  return g == Genre::epistolary ? "epistolary" : "literary";
}

Genre parse_genre(std::string_view s) {
  if (s == "epistolary") return Genre::epistolary;
  if (s == "literary") return Genre::literary;
  throw CorpusError("unknown genre '" + std::string(s) + "'");
}

const Document* Corpus::find(std::string_view doc_id) const {
  auto it = std::lower_bound(documents.begin(), documents.end(), doc_id,
                             [](const Document& d, std::string_view id) { return d.doc_id < id; });
  if (it == documents.end() || it->doc_id != doc_id) return nullptr;
  return &*it;
}

std::vector<std::string> Corpus::authors() const {
  std::set<std::string> seen;
  for (const auto& d : documents) seen.insert(d.author);
  return {seen.begin(), seen.end()};
}

std::size_t Corpus::documents_by(std::string_view author) const {
  return static_cast<std::size_t>(std::count_if(
      documents.begin(), documents.end(), [&](const Document& d) { return d.author == author; }));
}

// ---------------------------------------------------------------------------
// Markers

std::vector<MarkerSpan> parse_markers(std::string_view text) {
  struct Open {
    SpanKind kind;
    std::size_t at;
  };
  std::vector<Open> stack;
  std::vector<MarkerSpan> spans;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '*') {
      if (!stack.empty() && stack.back().kind == SpanKind::latin) {
        spans.push_back({SpanKind::latin, stack.back().at, i + 1});
        stack.pop_back();
      } else if (std::any_of(stack.begin(), stack.end(),
                             [](const Open& o) { return o.kind == SpanKind::latin; })) {
        throw MarkerError("'*' closes a Latin citation across an open '{'", i);
      } else {
        stack.push_back({SpanKind::latin, i});
      }
    } else if (c == '{') {
      if (std::any_of(stack.begin(), stack.end(),
                      [](const Open& o) { return o.kind == SpanKind::vernacular; })) {
        throw MarkerError("nested '{'", i);
      }
      stack.push_back({SpanKind::vernacular, i});
    } else if (c == '}') {
      if (stack.empty() || stack.back().kind != SpanKind::vernacular) {
        throw MarkerError("unmatched '}'", i);
      }
      spans.push_back({SpanKind::vernacular, stack.back().at, i + 1});
      stack.pop_back();
    }
  }
  if (!stack.empty()) {
    throw MarkerError(stack.back().kind == SpanKind::latin ? "unclosed '*'" : "unclosed '{'",
                      stack.back().at);
  }
  std::sort(spans.begin(), spans.end(),
            [](const MarkerSpan& a, const MarkerSpan& b) { return a.begin < b.begin; });
  return spans;
}

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string strip_citations(std::string_view text, const CitationPolicy& policy) {
  const auto spans = parse_markers(text);
  if (spans.empty()) return std::string(text);

  // Mark every byte as kept or dropped; a dropped run is a removal site.
  std::vector<bool> drop(text.size(), false);
  for (const auto& s : spans) {
    const SpanPolicy p =
        s.kind == SpanKind::latin ? policy.latin_citations : policy.vernacular_citations;
    if (p == SpanPolicy::remove) {
      std::fill(drop.begin() + s.begin, drop.begin() + s.end, true);
    } else {
      drop[s.begin] = true;
      drop[s.end - 1] = true;
    }
  }

  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!drop[i]) {
      if (pending_space) {
        if (!out.empty()) out.push_back(' ');
        pending_space = false;
      }
      out.push_back(text[i]);
      ++i;
      continue;
    }
    // Removal site: fold the whitespace on both sides into one pending space.
    while (!out.empty() && is_ws(out.back())) {
      out.pop_back();
      pending_space = true;
    }
    while (i < text.size() && (drop[i] || is_ws(text[i]))) {
      if (!drop[i]) pending_space = true;
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

bool is_punctuation_cp(char32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<unsigned char>(cp)) != 0;
  if (cp >= 0xA0 && cp <= 0xBF) return cp != 0xAA && cp != 0xBA && cp != 0xB5;
  if (cp == 0xD7 || cp == 0xF7) return true;
  if (cp >= 0x2000 && cp <= 0x206F) return true;  // general punctuation, spaces
  if (cp >= 0x2E00 && cp <= 0x2E7F) return true;  // supplemental punctuation
  if (cp == 0x3000 || cp == 0xFEFF) return true;
  return false;
}

char32_t lower_cp(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  return cp;
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  utf8::for_each(text, [&](char32_t cp, std::string_view raw) {
    cp = lower_cp(cp);
    if (cp == 'v') cp = 'u';
    const bool space = cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
                       cp == '\v' || is_punctuation_cp(cp);
    if (space) {
      pending_space = true;
      return;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    if (cp == utf8::kInvalid) {
      out.append(raw);
    } else {
      utf8::append(out, cp);
    }
  });
  return out;
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ws(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_ws(text[i])) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_ws(s[b])) ++b;
  while (e > b && is_ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw CorpusError("error while reading " + path.string());
  return ss.str();
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw CorpusError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw CorpusError("config line " + std::to_string(line_no) + ": empty key");
    cfg.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const fs::path& path) { return parse(read_file(path)); }

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

std::vector<std::string> Config::get_list(const std::string& key) const {
  std::vector<std::string> out;
  auto v = get(key);
  if (!v) return out;
  std::size_t start = 0;
  while (start <= v->size()) {
    auto comma = v->find(',', start);
    if (comma == std::string::npos) comma = v->size();
    std::string item = trim(std::string_view(*v).substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = comma + 1;
  }
  return out;
}

LoadOptions load_options_from_config(const Config& config, const std::string& dataset) {
  LoadOptions opts;
  opts.name = dataset;
  const std::string p = dataset + ".";
  if (auto g = config.get(p + "genre")) opts.default_genre = parse_genre(*g);
  if (config.get(p + "miscellanea_authors")) {
    auto list = config.get_list(p + "miscellanea_authors");
    opts.miscellanea_authors = {list.begin(), list.end()};
  }
  if (auto n = config.get(p + "expected_documents"); n && !n->empty()) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(n->data(), n->data() + n->size(), value);
    if (ec != std::errc() || ptr != n->data() + n->size()) {
      throw CorpusError("config key " + p + "expected_documents is not an integer");
    }
    opts.expected_documents = value;
  }
  if (auto m = config.get(p + "manifest"); m && !m->empty()) opts.manifest = fs::path(*m);
  return opts;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

struct FileEntry {
  fs::path path;
  std::string doc_id;
  std::string author;
  std::string title;
  Genre genre;
};

bool is_readme(const fs::path& p) {
  std::string stem = p.stem().string();
  std::transform(stem.begin(), stem.end(), stem.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return stem.starts_with("readme");
}

std::vector<FileEntry> scan_by_convention(const fs::path& root, Genre genre) {
  std::vector<FileEntry> entries;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".txt" || is_readme(e.path())) continue;
    const std::string stem = e.path().stem().string();
    const auto us = stem.find('_');
    if (us == std::string::npos || us == 0 || us + 1 == stem.size()) {
      throw CorpusError(e.path().string() + ": file name does not follow <Author>_<DocId>.txt");
    }
    entries.push_back({e.path(), stem, stem.substr(0, us), stem.substr(us + 1), genre});
  }
  return entries;
}

std::vector<FileEntry> scan_manifest(const fs::path& root, const fs::path& manifest) {
  const fs::path mpath = manifest.is_absolute() ? manifest : root / manifest;
  const auto rows = csv::parse(read_file(mpath));
  if (rows.empty() || rows.front() != std::vector<std::string>{"file", "author", "genre"}) {
    throw CorpusError(mpath.string() + ": manifest header must be 'file,author,genre'");
  }
  std::vector<FileEntry> entries;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 3) {
      throw CorpusError(mpath.string() + ": row " + std::to_string(r + 1) + " needs 3 fields");
    }
    const fs::path file(row[0]);
    entries.push_back({root / file, file.stem().string(), row[1], file.stem().string(),
                       parse_genre(row[2])});
  }
  return entries;
}

}  // namespace

Corpus load_corpus(const fs::path& root, const LoadOptions& options) {
  if (!fs::is_directory(root)) throw CorpusError(root.string() + ": not a directory");

  auto entries = options.manifest ? scan_manifest(root, *options.manifest)
                                  : scan_by_convention(root, options.default_genre);
  if (entries.empty()) throw CorpusError(root.string() + ": no documents found");

  Corpus corpus;
  corpus.name = options.name.empty() ? root.filename().string() : options.name;
  corpus.miscellanea_authors = options.miscellanea_authors;
  corpus.documents.reserve(entries.size());
  for (auto& e : entries) {
    if (e.author.empty()) throw CorpusError(e.path.string() + ": empty author label");
    Document doc;
    doc.doc_id = std::move(e.doc_id);
    doc.author = std::move(e.author);
    doc.title = std::move(e.title);
    doc.genre = e.genre;
    doc.raw_text = read_file(e.path);
    if (doc.raw_text.starts_with("\xEF\xBB\xBF")) doc.raw_text.erase(0, 3);
    try {
      parse_markers(doc.raw_text);
    } catch (const MarkerError& err) {
      throw MarkerError(e.path.string() + ": " + err.what() + " at byte " +
                            std::to_string(err.offset()),
                        err.offset());
    }
    doc.word_count = whitespace_tokens(doc.raw_text).size();
    corpus.documents.push_back(std::move(doc));
  }

  std::sort(corpus.documents.begin(), corpus.documents.end(),
            [](const Document& a, const Document& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 1; i < corpus.documents.size(); ++i) {
    if (corpus.documents[i].doc_id == corpus.documents[i - 1].doc_id) {
      throw CorpusError("duplicate doc_id '" + corpus.documents[i].doc_id + "'");
    }
  }
  if (options.expected_documents && corpus.documents.size() != *options.expected_documents) {
    throw CorpusError(corpus.name + ": expected " + std::to_string(*options.expected_documents) +
                      " documents, found " + std::to_string(corpus.documents.size()));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Digests

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      EVP_MD_CTX_free(ctx_);
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes) { EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kDigits[md[i] >> 4]);
      out.push_back(kDigits[md[i] & 0xF]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

std::string corpus_checksum(const Corpus& corpus) {
  Sha256 h;
  for (const auto& d : corpus.documents) {
    for (std::string_view field : {std::string_view(d.doc_id), std::string_view(d.author),
                                   std::string_view(d.raw_text)}) {
      const std::string len = std::to_string(field.size()) + ":";
      h.update(len);
      h.update(field);
    }
  }
  return h.hex();
}

ChecksumMismatch::ChecksumMismatch(const std::string& expected, const std::string& actual)
    : FetchError("checksum mismatch: expected " + expected + ", got " + actual),
      expected_(expected),
      actual_(actual) {}

}  // namespace latinav
