#include "latinav/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>

#include "csv.hpp"

namespace latinav {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double f1(const ConfusionCounts& c) {
  const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw MetricsError("accuracy of an empty confusion table");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double macro_average(std::span<const double> values) {
  if (values.empty()) throw MetricsError("macro average of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

Aggregate aggregate(std::span<const std::pair<std::string, ConfusionCounts>> per_author) {
  if (per_author.empty()) throw MetricsError("aggregate of an empty author list");
  Aggregate a;
  std::vector<double> f1s, accs;
  for (const auto& [author, counts] : per_author) {
    a.pooled += counts;
    f1s.push_back(f1(counts));
    accs.push_back(accuracy(counts));
  }
  a.macro_f1 = macro_average(f1s);
  a.macro_accuracy = macro_average(accs);
  a.micro_f1 = f1(a.pooled);
  a.accuracy = accuracy(a.pooled);
  return a;
}

ConfusionCounts& tally(ConfusionCounts& c, bool truth, bool predicted) {
  if (truth && predicted) ++c.tp;
  else if (!truth && predicted) ++c.fp;
  else if (truth) ++c.fn;
  else ++c.tn;
  return c;
}

EvaluationReport EvaluationReport::from_decisions(std::string corpus, std::string learner,
                                                  std::vector<DecisionRecord> decisions) {
  EvaluationReport r;
  r.corpus = std::move(corpus);
  r.learner = std::move(learner);
  std::vector<std::pair<std::string, ConfusionCounts>> per_author;
  std::map<std::string, std::size_t, std::less<>> slot;
  for (const auto& d : decisions) {
    auto [it, fresh] = slot.try_emplace(d.author, per_author.size());
    if (fresh) per_author.emplace_back(d.author, ConfusionCounts{});
    tally(per_author[it->second].second, d.truth, d.predicted);
  }
  for (const auto& [author, counts] : per_author) {
    r.authors.push_back(AuthorScore{author, counts, f1(counts), accuracy(counts)});
  }
  if (!per_author.empty()) r.summary = aggregate(per_author);
  r.decisions = std::move(decisions);
  return r;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw MetricsError(std::string("bad ") + what + " value '" + s + "'");
  }
  return v;
}

bool parse_label(const std::string& s) {
  if (s == "Yes") return true;
  if (s == "No") return false;
  throw MetricsError("bad label '" + s + "' (expected Yes or No)");
}

const char* label(bool b) { return b ? "Yes" : "No"; }

}  // namespace

std::string format3(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

void write_decisions_csv(std::ostream& out, std::span<const DecisionRecord> decisions) {
  out << "author,doc_id,true,predicted,posterior,hyperparameter\n";
  char posterior[32];
  for (const auto& d : decisions) {
    std::snprintf(posterior, sizeof posterior, "%.6f", d.posterior);
    out << csv::quote(d.author) << ',' << csv::quote(d.doc_id) << ',' << label(d.truth) << ','
        << label(d.predicted) << ',' << posterior << ',' << shortest(d.hyperparameter) << '\n';
  }
}

std::vector<DecisionRecord> read_decisions_csv(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto rows = csv::parse(text);
  if (rows.empty() || rows.front() != std::vector<std::string>{"author", "doc_id", "true", "predicted",
                                                                "posterior", "hyperparameter"}) {
    throw MetricsError("decisions CSV: missing or unexpected header");
  }
  std::vector<DecisionRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != 6) throw MetricsError("decisions CSV: row " + std::to_string(i + 1) + " has " +
                                          std::to_string(r.size()) + " fields");
    out.push_back(DecisionRecord{r[0], r[1], parse_label(r[2]), parse_label(r[3]),
                                 parse_double(r[4], "posterior"), parse_double(r[5], "hyperparameter")});
  }
  return out;
}

void write_summary_csv(std::ostream& out, std::span<const EvaluationReport> reports) {
  out << "corpus,learner,macro_f1,micro_f1,accuracy\n";
  for (const auto& r : reports) {
    out << csv::quote(r.corpus) << ',' << csv::quote(r.learner) << ',' << format3(r.summary.macro_f1)
        << ',' << format3(r.summary.micro_f1) << ',' << format3(r.summary.accuracy) << '\n';
  }
}

void write_author_csv(std::ostream& out, const EvaluationReport& report) {
  out << "author,tp,fp,fn,tn,f1,accuracy\n";
  for (const auto& a : report.authors) {
    out << csv::quote(a.author) << ',' << a.counts.tp << ',' << a.counts.fp << ',' << a.counts.fn << ','
        << a.counts.tn << ',' << format3(a.f1) << ',' << format3(a.accuracy) << '\n';
  }
}

void print_report(std::ostream& out, const EvaluationReport& report) {
  std::size_t width = 6;
  for (const auto& a : report.authors) width = std::max(width, a.author.size());
  out << report.corpus << " / " << report.learner << " (" << report.decisions.size() << " decisions)\n";
  out << std::left << std::setw(static_cast<int>(width)) << "author" << "  TP   FP   FN    TN     F1    Acc\n";
  for (const auto& a : report.authors) {
    out << std::left << std::setw(static_cast<int>(width)) << a.author << std::right << std::setw(4)
        << a.counts.tp << std::setw(5) << a.counts.fp << std::setw(5) << a.counts.fn << std::setw(6)
        << a.counts.tn << std::setw(7) << format3(a.f1) << std::setw(7) << format3(a.accuracy) << '\n';
  }
  out << std::left << "F1 macro " << format3(report.summary.macro_f1) << "  F1 micro "
      << format3(report.summary.micro_f1) << "  Acc " << format3(report.summary.accuracy) << '\n';
}

}  // namespace latinav
