// latinav: fetch, validate, segment, evaluate, verify, report.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latinav/corpus.hpp"
#include "latinav/features.hpp"
#include "latinav/learners.hpp"
#include "latinav/metrics.hpp"
#include "latinav/protocol.hpp"
#include "latinav/segmentation.hpp"

namespace fs = std::filesystem;
using namespace latinav;

namespace {

struct Common {
  std::string data_dir;
  std::string config_path;
};

fs::path data_dir(const Common& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("LATINAV_DATA_DIR"); env && *env) return env;
  return "data";
}

Config load_config(const Common& c) {
  fs::path path = c.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("LATINAV_CONFIG"); env && *env) path = env;
    else path = LATINAV_DEFAULT_CONFIG;
  }
  if (!fs::exists(path)) {
    if (!c.config_path.empty()) throw CorpusError("config file not found: " + path.string());
    return {};
  }
  return Config::load(path);
}

/// `corpus` is either a directory or a dataset name below the data directory.
Corpus load_named_corpus(const Common& c, const std::string& corpus) {
  const Config config = load_config(c);
  fs::path root = corpus;
  std::string name = fs::path(corpus).filename().string();
  if (!fs::is_directory(root)) root = data_dir(c) / corpus;
  if (!fs::is_directory(root)) {
    throw CorpusError("corpus '" + corpus + "' not found (looked for a directory of that name and " +
                      root.string() + "; run `latinav fetch` or set LATINAV_DATA_DIR)");
  }
  LoadOptions opts = load_options_from_config(config, name);
  if (opts.manifest && opts.manifest->is_relative()) opts.manifest = root / *opts.manifest;
  return load_corpus(root, opts);
}

SegmentationOptions segmentation_options(bool keep_citations) {
  SegmentationOptions s;
  if (keep_citations) {
    s.citations.latin_citations = SpanPolicy::keep;
    s.citations.vernacular_citations = SpanPolicy::keep;
  }
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

struct RunFlags {
  std::string corpus;
  std::string learner = "lr";
  std::uint64_t seed = 1;
  bool full = false;
  bool reduced = false;
  std::vector<double> grid;
  int folds = 10;
  unsigned workers = 1;
  bool keep_citations = false;
  std::string out = "out";
};

void add_run_options(CLI::App* cmd, RunFlags& f, bool full_by_default) {
  cmd->add_option("--corpus", f.corpus, "Dataset name under the data directory, or a corpus directory")->required();
  cmd->add_option("--learner", f.learner, "lr, svm or mnb")
      ->check(CLI::IsMember({"lr", "svm", "mnb"}))
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for fold assignment and SVM coordinate order")->capture_default_str();
  auto* full = cmd->add_flag("--full", f.full,
                             full_by_default ? "Seven-value grid (default)" : "Seven-value grid");
  auto* reduced = cmd->add_flag("--reduced", f.reduced,
                                full_by_default ? "Three-value grid" : "Three-value grid (default)");
  full->excludes(reduced);
  cmd->add_option("--grid", f.grid, "Explicit hyperparameter grid (overrides --full/--reduced)");
  cmd->add_option("--folds", f.folds, "Cross-validation folds for grid search")->capture_default_str()->check(
      CLI::Range(2, 1000));
  cmd->add_option("--workers", f.workers, "Concurrent LOO iterations")->capture_default_str()->check(
      CLI::Range(1u, 1024u));
  cmd->add_flag("--keep-citations", f.keep_citations, "Keep *Latin* and {vernacular} citations in the text");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
}

ProtocolOptions protocol_options(const RunFlags& f, bool full_by_default) {
  ProtocolOptions o;
  o.learner = parse_learner(f.learner);
  o.seed = f.seed;
  o.folds = f.folds;
  o.workers = f.workers;
  const bool full = f.full || (full_by_default && !f.reduced);
  if (!f.grid.empty()) o.grid = Grid::of(f.grid);
  else o.grid = full ? Grid::full(o.learner) : Grid::reduced(o.learner);
  return o;
}

RunManifest base_manifest(const std::string& command, const PreparedCorpus& pc, std::size_t documents,
                          const RunFlags& f, const ProtocolOptions& o) {
  RunManifest m;
  m.command = command;
  m.corpus = pc.name();
  m.corpus_checksum = pc.checksum();
  m.documents = documents;
  m.units = pc.units().size();
  m.learner = std::string(short_name(o.learner));
  m.seed = o.seed;
  m.grid = o.grid->values;
  m.folds = o.folds;
  m.workers = o.workers;
  m.flags["corpus_arg"] = f.corpus;
  m.flags["grid_mode"] = !f.grid.empty() ? "explicit" : (f.full ? "full" : (f.reduced ? "reduced" : "default"));
  m.flags["keep_citations"] = f.keep_citations ? "true" : "false";
  return m;
}

// ---------------------------------------------------------------------------

struct FetchArgs {
  std::string dataset;
  std::string url;
  std::string sha256;
  bool accept_checksum = false;
};

int cmd_fetch(const Common& c, const FetchArgs& a) {
  const Config config = load_config(c);
  const std::string url = !a.url.empty() ? a.url : config.get_or(a.dataset + ".url", "");
  const std::string digest = !a.sha256.empty() ? a.sha256 : config.get_or(a.dataset + ".sha256", "");
  if (digest.empty() && !a.accept_checksum) {
    std::cerr << "error: no checksum known for " << a.dataset
              << "; pass --sha256 or --accept-checksum to record the downloaded digest\n";
    return 1;
  }
  const fs::path root = data_dir(c);
  const fs::path archive = root / "archives" / (a.dataset + ".zip");
  const bool cached = fs::exists(archive);
  fetch_dataset(url, digest, archive);
  const std::string actual = sha256_file(archive);
  std::cout << (cached ? "cached  " : "fetched ") << archive.string() << "\nsha256  " << actual << '\n';

  const fs::path dest = root / a.dataset;
  if (!fs::is_directory(dest)) {
    const auto files = extract_zip(archive, dest);
    std::cout << "extracted " << files.size() << " files to " << dest.string() << '\n';
  }
  const Corpus corpus = load_named_corpus(c, dest.string());
  std::cout << "validated " << corpus.documents.size() << " documents\n";
  return 0;
}

int cmd_validate(const Common& c, const std::string& corpus_arg) {
  const Corpus corpus = load_named_corpus(c, corpus_arg);
  std::size_t words = 0;
  for (const auto& d : corpus.documents) words += d.word_count;
  std::cout << corpus.name << ": " << corpus.documents.size() << " documents, " << words << " words\n";
  for (const auto& a : corpus.authors()) {
    std::cout << "  " << a << ": " << corpus.documents_by(a) << (corpus.is_miscellanea(a) ? " (miscellanea)" : "")
              << '\n';
  }
  std::cout << "checksum " << corpus_checksum(corpus) << '\n';
  return 0;
}

int cmd_segment(const Common& c, const std::string& corpus_arg, bool keep_citations, const std::string& out) {
  const Corpus corpus = load_named_corpus(c, corpus_arg);
  const auto units = expand_corpus(corpus, segmentation_options(keep_citations));
  std::size_t segments = 0;
  for (const auto& u : units) segments += u.kind == UnitKind::segment;
  std::cout << corpus.name << ": " << corpus.documents.size() << " documents, " << segments << " segments, "
            << units.size() << " units\n";
  if (!out.empty()) {
    auto f = open_output(out);
    write_units_csv(f, units);
    close_output(f, out);
  }
  return 0;
}

int cmd_evaluate(const Common& c, const RunFlags& f, const std::vector<std::string>& author_labels) {
  ProtocolOptions o = protocol_options(f, false);
  const Corpus corpus = load_named_corpus(c, f.corpus);
  const PreparedCorpus pc(corpus, FeatureSpecs::from_resources(default_resource_dir()),
                          segmentation_options(f.keep_citations));

  std::vector<std::string> authors;
  for (const auto& label : author_labels) authors.push_back(pc.resolve_author(label));
  if (authors.empty()) authors = pc.eligible_authors();

  const auto start = std::chrono::steady_clock::now();
  o.progress = [&](std::size_t done, std::size_t total) {
    if (done % 10 == 0 || done == total) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cerr << "\r" << done << "/" << total << " decisions, " << static_cast<long>(secs) << " s" << std::flush;
      if (done == total) std::cerr << '\n';
    }
  };
  const EvaluationReport report = run_full_evaluation(pc, o, authors);

  const fs::path out = f.out;
  RunManifest m = base_manifest("evaluate", pc, corpus.documents.size(), f, o);
  m.authors = authors;
  std::vector<std::pair<fs::path, std::function<void(std::ostream&)>>> outputs{
      {out / "decisions.csv", [&](std::ostream& s) { write_decisions_csv(s, report.decisions); }},
      {out / "summary.csv", [&](std::ostream& s) { write_summary_csv(s, std::span(&report, 1)); }},
      {out / "authors.csv", [&](std::ostream& s) { write_author_csv(s, report); }},
      {out / "manifest.json", [&](std::ostream& s) { write_manifest(s, m); }},
  };
  for (const auto& [path, write] : outputs) {
    auto file = open_output(path);
    write(file);
    close_output(file, path);
  }
  print_report(std::cout, report);
  std::cout << "wrote " << out.string() << "/{decisions,summary,authors}.csv and manifest.json\n";
  return 0;
}

int cmd_verify(const Common& c, const RunFlags& f, const std::string& author, const std::string& text_path,
               bool save_model_files) {
  const ProtocolOptions o = protocol_options(f, true);
  if (!fs::is_regular_file(text_path)) throw std::runtime_error("disputed text not found: " + text_path);
  const std::string text = read_file(text_path);
  const Corpus corpus = load_named_corpus(c, f.corpus);
  const PreparedCorpus pc(corpus, FeatureSpecs::from_resources(default_resource_dir()),
                          segmentation_options(f.keep_citations));
  const std::string doc_id = fs::path(text_path).stem().string();
  const VerificationResult r = verify_disputed(pc, author, doc_id, text, o);

  std::cout << doc_id << " by " << r.author << "? " << to_string(r.decision) << "  posterior " << format3(r.posterior)
            << "  (" << (short_name(o.learner)) << ", hyperparameter " << r.hyperparameter
            << (r.fallback_hyperparameter ? ", fallback" : "") << ")\n";

  const fs::path out = f.out;
  const fs::path stem = out / ("verify-" + doc_id);
  {
    const fs::path p = stem.string() + ".csv";
    auto file = open_output(p);
    // The truth column is unknown for a disputed text; the file records "No".
    const DecisionRecord rec = r.record(false);
    write_decisions_csv(file, std::span(&rec, 1));
    close_output(file, p);
  }
  {
    RunManifest m = base_manifest("verify", pc, corpus.documents.size(), f, o);
    m.authors = {r.author};
    m.flags["text"] = text_path;
    m.flags["text_sha256"] = sha256_hex(text);
    const fs::path p = stem.string() + ".manifest.json";
    auto file = open_output(p);
    write_manifest(file, m);
    close_output(file, p);
  }
  if (save_model_files) {
    const fs::path mp = stem.string() + ".model.json";
    auto model_file = open_output(mp);
    save_model(model_file, r.model);
    close_output(model_file, mp);
    const fs::path sp = stem.string() + ".space.json";
    auto space_file = open_output(sp);
    save_feature_space(space_file, r.space);
    close_output(space_file, sp);
  }
  return 0;
}

int cmd_report(const std::string& decisions_path, const std::string& corpus_name, const std::string& learner,
               const std::string& summary_out) {
  std::ifstream in(decisions_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + decisions_path);
  auto decisions = read_decisions_csv(in);
  if (decisions.empty()) throw std::runtime_error(decisions_path + " holds no decisions");
  const auto report = EvaluationReport::from_decisions(corpus_name, learner, std::move(decisions));
  print_report(std::cout, report);
  if (!summary_out.empty()) {
    auto f = open_output(summary_out);
    write_summary_csv(f, std::span(&report, 1));
    close_output(f, summary_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Authorship verification for medieval Latin texts"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--data-dir", common.data_dir, "Data directory (default: $LATINAV_DATA_DIR or ./data)");
  app.add_option("--config", common.config_path, "Dataset registry (default: $LATINAV_CONFIG or the shipped one)");

  FetchArgs fetch_args;
  auto* fetch = app.add_subcommand("fetch", "Download, verify and unpack a dataset archive");
  fetch->add_option("--dataset", fetch_args.dataset, "medlatinepi or medlatinlit")->required();
  fetch->add_option("--url", fetch_args.url, "Archive URL (overrides the registry)");
  fetch->add_option("--sha256", fetch_args.sha256, "Expected archive digest (overrides the registry)");
  fetch->add_flag("--accept-checksum", fetch_args.accept_checksum, "Accept an unverified download and print its digest");

  std::string validate_corpus;
  auto* validate = app.add_subcommand("validate", "Load a corpus and print its inventory");
  validate->add_option("--corpus", validate_corpus, "Dataset name or directory")->required();

  std::string segment_corpus, segment_out;
  bool segment_keep = false;
  auto* segment = app.add_subcommand("segment", "Expand a corpus into whole-document and segment units");
  segment->add_option("--corpus", segment_corpus, "Dataset name or directory")->required();
  segment->add_flag("--keep-citations", segment_keep, "Keep citations in the text");
  segment->add_option("--out", segment_out, "Write the unit table to this CSV file");

  RunFlags eval_flags;
  std::vector<std::string> eval_authors;
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out verification for every eligible author");
  add_run_options(evaluate, eval_flags, false);
  evaluate->add_option("--authors", eval_authors, "Restrict to these authors (name or unique prefix)")->delimiter(',');

  RunFlags verify_flags;
  std::string verify_author, verify_text;
  bool verify_save = false;
  auto* verify = app.add_subcommand("verify", "Train on a whole corpus and classify a disputed text");
  add_run_options(verify, verify_flags, true);
  verify->add_option("--author", verify_author, "Candidate author (name or unique prefix)")->required();
  verify->add_option("--text", verify_text, "Disputed text file")->required();
  verify->add_flag("--save-model", verify_save, "Also write the trained model and feature space");

  std::string report_decisions, report_corpus = "corpus", report_learner = "lr", report_summary;
  auto* report = app.add_subcommand("report", "Recompute tables from a decisions CSV");
  report->add_option("--decisions", report_decisions, "decisions.csv from `evaluate`")->required();
  report->add_option("--corpus", report_corpus, "Corpus label for the table")->capture_default_str();
  report->add_option("--learner", report_learner, "Learner label for the table")->capture_default_str();
  report->add_option("--summary", report_summary, "Write a summary CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fetch) return cmd_fetch(common, fetch_args);
    if (*validate) return cmd_validate(common, validate_corpus);
    if (*segment) return cmd_segment(common, segment_corpus, segment_keep, segment_out);
    if (*evaluate) return cmd_evaluate(common, eval_flags, eval_authors);
    if (*verify) return cmd_verify(common, verify_flags, verify_author, verify_text, verify_save);
    if (*report) return cmd_report(report_decisions, report_corpus, report_learner, report_summary);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
