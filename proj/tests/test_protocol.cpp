#include <doctest.h>

#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "latinav/protocol.hpp"
#include "support/synthetic.hpp"

using namespace latinav;

namespace {

const FeatureSpecs& specs() {
  static const FeatureSpecs s = FeatureSpecs::from_resources(default_resource_dir());
  return s;
}

testing::SyntheticSpec small_spec() {
  testing::SyntheticSpec spec;
  spec.authors = {{"Alpha", 6}, {"Beta", 5}, {"Gamma", 4}, {"Misc", 3}, {"Solo", 1}};
  spec.miscellanea = {"Misc"};
  spec.seed = 42;
  return spec;
}

const PreparedCorpus& small_corpus() {
  static const PreparedCorpus pc(testing::synthetic_corpus(small_spec()), specs());
  return pc;
}

ProtocolOptions reduced(Learner l = Learner::logistic_regression, unsigned workers = 1) {
  ProtocolOptions o;
  o.learner = l;
  o.grid = Grid::reduced(l);
  o.seed = 3;
  o.workers = workers;
  return o;
}

std::string decisions_csv(const std::vector<DecisionRecord>& d) {
  std::stringstream ss;
  write_decisions_csv(ss, d);
  return ss.str();
}

}  // namespace

TEST_CASE("twenty balanced groups over ten folds") {
  std::vector<std::string> groups;
  std::vector<int> labels;
  for (int g = 0; g < 20; ++g) {
    for (int u = 0; u < 3; ++u) {
      groups.push_back("g" + std::to_string(g));
      labels.push_back(g < 10 ? 1 : 0);
    }
  }
  const auto fa = grouped_stratified_kfold(groups, labels, 10, 1);
  std::map<int, std::pair<int, int>> per_fold;
  for (const auto& [g, f] : fa.fold_of_group) {
    const bool pos = std::stoi(g.substr(1)) < 10;
    (pos ? per_fold[f].first : per_fold[f].second)++;
  }
  REQUIRE(per_fold.size() == 10);
  for (const auto& [f, c] : per_fold) {
    CHECK(c.first == 1);
    CHECK(c.second == 1);
  }
  CHECK(grouped_stratified_kfold(groups, labels, 10, 1).fold_of_group == fa.fold_of_group);
  CHECK(grouped_stratified_kfold(groups, labels, 10, 2).fold_of_group != fa.fold_of_group);
  CHECK_THROWS_AS(grouped_stratified_kfold(groups, labels, 1, 1), ProtocolError);
  CHECK_THROWS_AS(grouped_stratified_kfold(groups, labels, 21, 1), ProtocolError);
  CHECK_THROWS_AS(fa.fold_of("nope"), ProtocolError);
}

TEST_CASE("property: folds never split a group and stay stratified (1000 random instances)") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_groups = 2 + static_cast<int>(rng() % 60);
    const int k = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_groups - 1));
    std::vector<std::string> groups;
    std::vector<int> labels;
    std::map<std::string, int> group_label;
    const double pos_rate = static_cast<double>(rng() % 100) / 100.0;
    for (int g = 0; g < n_groups; ++g) {
      const std::string id = "doc" + std::to_string(rng() % 100000) + "_" + std::to_string(g);
      const int label = static_cast<double>(rng() % 1000) / 1000.0 < pos_rate ? 1 : 0;
      group_label[id] = label;
      for (int u = 0, n = 1 + static_cast<int>(rng() % 5); u < n; ++u) {
        groups.push_back(id);
        labels.push_back(label);
      }
    }
    // Units arrive in arbitrary order.
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::string> g2;
    std::vector<int> l2;
    for (auto i : order) {
      g2.push_back(groups[i]);
      l2.push_back(labels[i]);
    }
    const std::uint64_t seed = rng();
    const auto fa = grouped_stratified_kfold(g2, l2, k, seed);

    REQUIRE(fa.fold_of_group.size() == group_label.size());
    std::vector<int> pos(k, 0), all(k, 0);
    for (const auto& [g, f] : fa.fold_of_group) {
      REQUIRE(f >= 0);
      REQUIRE(f < k);
      pos[f] += group_label.at(g);
      all[f] += 1;
    }
    REQUIRE(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
    REQUIRE(*std::max_element(all.begin(), all.end()) - *std::min_element(all.begin(), all.end()) <= 1);
    // Every unit's fold is its group's fold, and the assignment does not depend on unit order.
    REQUIRE(grouped_stratified_kfold(groups, labels, k, seed).fold_of_group == fa.fold_of_group);
  }
}

TEST_CASE("grids") {
  CHECK(Grid::full(Learner::logistic_regression).values ==
        std::vector<double>{0.001, 0.01, 0.1, 1, 10, 100, 1000});
  CHECK(Grid::full(Learner::linear_svm).values.size() == 7);
  const auto alpha = Grid::full(Learner::multinomial_nb).values;
  REQUIRE(alpha.size() == 8);
  CHECK(alpha.front() == 1e-7);
  CHECK(alpha.back() == 1.0);
  CHECK(Grid::reduced(Learner::linear_svm).values == std::vector<double>{0.01, 1, 100});
  CHECK(Grid::of({10, 1, 10}).values == std::vector<double>{1, 10});
  CHECK_THROWS_AS(Grid::of({}), ProtocolError);
  CHECK_THROWS_AS(Grid::of({1, -1}), ProtocolError);
  CHECK(fallback_hyperparameter(Learner::logistic_regression) == 0.1);
  CHECK(fallback_hyperparameter(Learner::linear_svm) == 0.1);
  CHECK(fallback_hyperparameter(Learner::multinomial_nb) == 0.001);
}

TEST_CASE("grid search") {
  const auto& pc = small_corpus();
  const FeatureSpace space = fit_feature_space(pc.units(), "Alpha", specs());
  TrainingPool pool;
  for (const auto& u : pc.units()) {
    pool.x.push_back(transform(u, space, specs()));
    pool.y.push_back(u.author == "Alpha" ? 1 : 0);
    pool.group_ids.push_back(u.group_id);
    pool.whole_document.push_back(u.kind == UnitKind::whole_document);
  }
  const Grid grid = Grid::full(Learner::logistic_regression);
  const auto r = grid_search(pool, Learner::logistic_regression, grid, 10, 5);
  CHECK_FALSE(r.fallback);
  CHECK(std::find(grid.values.begin(), grid.values.end(), r.best) != grid.values.end());
  REQUIRE(r.mean_f1.size() == grid.values.size());
  const auto best_it = std::max_element(r.mean_f1.begin(), r.mean_f1.end());
  CHECK(r.best == grid.values[static_cast<std::size_t>(best_it - r.mean_f1.begin())]);
  CHECK(r.folds_used == 6);  // one positive group per usable fold
  CHECK(r.trainings == 6 * 7);
  CHECK(grid_search(pool, Learner::logistic_regression, grid, 10, 5).best == r.best);

  SUBCASE("fewer than two positive groups bypasses the search") {
    TrainingPool one = pool;
    for (std::size_t i = 0; i < one.y.size(); ++i) one.y[i] = pc.units()[i].group_id == "Alpha_ep001" ? 1 : 0;
    const auto f = grid_search(one, Learner::logistic_regression, grid, 10, 5);
    CHECK(f.fallback);
    CHECK(f.best == 0.1);
    CHECK(f.trainings == 0);
    CHECK(grid_search(one, Learner::multinomial_nb, Grid::full(Learner::multinomial_nb), 10, 5).best == 0.001);
  }
  SUBCASE("k is clamped to the number of groups") {
    const auto small = grid_search(pool, Learner::logistic_regression, Grid::reduced(Learner::logistic_regression),
                                   1000, 5);
    CHECK_FALSE(small.fallback);
  }
}

TEST_CASE("eligibility and author resolution") {
  const auto& pc = small_corpus();
  CHECK(pc.eligible_authors() == std::vector<std::string>{"Alpha", "Beta", "Gamma"});
  CHECK(pc.resolve_author("Alpha") == "Alpha");
  CHECK(pc.resolve_author("gam") == "Gamma");
  CHECK_THROWS_AS(pc.resolve_author("Dante"), ProtocolError);
  CHECK_THROWS_AS(loo_author_verification(pc, "Misc", reduced()), ProtocolError);
  CHECK_THROWS_AS(loo_author_verification(pc, "Solo", reduced()), ProtocolError);
  CHECK_THROWS_AS(loo_author_verification(pc, "Nobody", reduced()), ProtocolError);
}

TEST_CASE("leave-one-out: one decision per document, no leakage") {
  const auto& pc = small_corpus();
  std::mutex mutex;
  std::map<std::string, FeatureSpace> spaces;
  std::size_t iterations = 0;
  ProtocolOptions o = reduced(Learner::logistic_regression, 4);
  o.observer = [&](const LooIteration& it) {
    std::set<std::string> groups;
    for (std::size_t i : it.training_units) groups.insert(pc.units()[i].group_id);
    const std::lock_guard lock(mutex);
    ++iterations;
    CHECK_FALSE(groups.contains(it.held_out));
    CHECK(it.training_units.size() == pc.units().size() - [&] {
      for (const auto& d : pc.documents()) {
        if (d.doc_id == it.held_out) return d.end - d.begin;
      }
      return std::size_t{0};
    }());
    spaces.emplace(it.held_out, *it.space);
  };
  const auto decisions = loo_author_verification(pc, "Beta", o);
  REQUIRE(decisions.size() == pc.documents().size());
  CHECK(iterations == pc.documents().size());
  for (std::size_t d = 0; d < decisions.size(); ++d) {
    CHECK(decisions[d].author == "Beta");
    CHECK(decisions[d].doc_id == pc.documents()[d].doc_id);
    CHECK(decisions[d].truth == (pc.documents()[d].author == "Beta"));
    CHECK(decisions[d].predicted == (decisions[d].posterior >= 0.5));
  }

  // Instrumented recount: fitting from scratch on the pool alone gives the
  // same space the iteration used.
  const std::string held = "Beta_ep002";
  std::vector<LabelledUnit> pool;
  for (const auto& u : pc.units()) {
    if (u.group_id != held) pool.push_back(u);
  }
  CHECK(fit_feature_space(pool, "Beta", specs()) == spaces.at(held));
}

TEST_CASE("property: perturbing the held-out document leaves its iteration's feature space bit-identical") {
  const auto spec = small_spec();
  Corpus original = testing::synthetic_corpus(spec);
  Corpus perturbed = original;
  const std::string held = "Gamma_ep003";
  for (auto& d : perturbed.documents) {
    if (d.doc_id == held) d.raw_text = "Omnino aliud uerbum nouum quod nusquam alibi legitur. " + d.raw_text + " Zyxwu qrtp.";
  }
  const PreparedCorpus a(original, specs());
  const PreparedCorpus b(perturbed, specs());
  REQUIRE(a.checksum() != b.checksum());

  const auto capture = [&](const PreparedCorpus& pc) {
    std::map<std::string, std::pair<FeatureSpace, double>> seen;
    std::mutex m;
    ProtocolOptions o = reduced();
    o.observer = [&](const LooIteration& it) {
      const std::lock_guard lock(m);
      seen.emplace(it.held_out, std::pair{*it.space, it.hyperparameter});
    };
    const auto decisions = loo_author_verification(pc, "Alpha", o);
    return std::pair{seen, decisions};
  };
  const auto [seen_a, dec_a] = capture(a);
  const auto [seen_b, dec_b] = capture(b);
  CHECK(seen_a.at(held).first == seen_b.at(held).first);
  CHECK(seen_a.at(held).second == seen_b.at(held).second);
  // Every other iteration trains on the perturbed text, so its space moves.
  CHECK_FALSE(seen_a.at("Alpha_ep001").first == seen_b.at("Alpha_ep001").first);
}

TEST_CASE("full evaluation is deterministic and ordered") {
  const auto& pc = small_corpus();
  const auto one = run_full_evaluation(pc, reduced(Learner::logistic_regression, 1));
  const auto many = run_full_evaluation(pc, reduced(Learner::logistic_regression, 5));
  CHECK(decisions_csv(one.decisions) == decisions_csv(many.decisions));
  CHECK(one.decisions.size() == 3 * pc.documents().size());
  REQUIRE(one.authors.size() == 3);
  CHECK(one.authors[0].author == "Alpha");
  CHECK(one.authors[2].author == "Gamma");
  for (const auto& a : one.authors) CHECK(a.counts.total() == pc.documents().size());
  CHECK(one.summary.pooled.total() == one.decisions.size());
  CHECK(one.summary.macro_accuracy == one.summary.accuracy);

  std::size_t progress_calls = 0;
  ProtocolOptions o = reduced(Learner::linear_svm, 3);
  o.progress = [&](std::size_t done, std::size_t total) {
    ++progress_calls;
    CHECK(done <= total);
  };
  const std::vector<std::string> subset{"Gamma"};
  const auto svm = run_full_evaluation(pc, o, subset);
  CHECK(svm.decisions.size() == pc.documents().size());
  CHECK(progress_calls == pc.documents().size());
  CHECK(svm.learner == "svm");
}

TEST_CASE("the synthetic styles are learnable") {
  const auto report = run_full_evaluation(small_corpus(), reduced());
  CHECK(report.summary.accuracy > 0.8);
}

TEST_CASE("verifying a disputed text") {
  const auto& pc = small_corpus();
  const auto spec = small_spec();
  const std::string alpha_like = testing::synthetic_text(spec, 0, 777, 12);
  const std::string beta_like = testing::synthetic_text(spec, 1, 778, 12);

  const auto yes = verify_disputed(pc, "alpha", "disputed1", alpha_like, reduced());
  const auto no = verify_disputed(pc, "Alpha", "disputed2", beta_like, reduced());
  CHECK(yes.author == "Alpha");
  CHECK(yes.posterior > no.posterior);
  CHECK(yes.decision == decide(yes.posterior));
  CHECK(no.decision == Decision::no);
  CHECK(yes.model.dimension() == yes.space.dimension());
  CHECK(yes.space.n_train_docs == pc.units().size());

  const auto again = verify_disputed(pc, "Alpha", "disputed1", alpha_like, reduced());
  CHECK(again.posterior == yes.posterior);

  CHECK_THROWS_AS(verify_disputed(pc, "Nobody", "d", alpha_like, reduced()), ProtocolError);
  CHECK_THROWS_AS(verify_disputed(pc, "Misc", "d", alpha_like, reduced()), ProtocolError);
  CHECK_THROWS_AS(verify_disputed(pc, "Alpha", "d", " ... ", reduced()), ProtocolError);

  // A single-document author falls back to the fixed hyperparameter.
  const auto solo = verify_disputed(pc, "Solo", "d", alpha_like, reduced());
  CHECK(solo.fallback_hyperparameter);
  CHECK(solo.hyperparameter == 0.1);
}

TEST_CASE("manifests and feature spaces round-trip") {
  RunManifest m;
  m.command = "evaluate";
  m.corpus = "medlatinepi";
  m.corpus_checksum = std::string(64, 'a');
  m.documents = 294;
  m.units = 1604;
  m.learner = "lr";
  m.seed = 1;
  m.grid = {0.01, 1, 100};
  m.workers = 8;
  m.authors = {"Dante"};
  m.flags = {{"keep_citations", "false"}};
  std::stringstream ss;
  write_manifest(ss, m);
  const auto back = read_manifest(ss);
  CHECK(back.corpus_checksum == m.corpus_checksum);
  CHECK(back.grid == m.grid);
  CHECK(back.flags == m.flags);
  CHECK(back.workers == 8);

  const FeatureSpace space = fit_feature_space(small_corpus().units(), "Gamma", specs());
  std::stringstream fs;
  save_feature_space(fs, space);
  CHECK(load_feature_space(fs) == space);
  std::stringstream bad("{\"format\":\"latinav-feature-space\",\"version\":2}");
  CHECK_THROWS_AS(load_feature_space(bad), ProtocolError);
}
