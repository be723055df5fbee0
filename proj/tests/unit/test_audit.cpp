#include <cmath>

#include "decoyforge/audit.hpp"
#include "decoyforge/util.hpp"
#include "doctest.h"

using namespace decoyforge;

namespace {

CandidateSet item(std::string id, std::vector<std::string> candidates, std::size_t target) {
  CandidateSet s;
  s.triplet_id = std::move(id);
  s.candidates = std::move(candidates);
  s.target_index = target;
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    s.provenance.push_back(i == target ? Provenance::target : Provenance::orig);
  }
  s.slots = s.provenance;
  return s;
}

std::vector<CandidateSet> two_items() {
  return {item("1", {"a", "b", "c", "d"}, 0), item("2", {"a", "b", "c", "d"}, 1)};
}

}  // namespace

TEST_CASE("two-item toy priors and bias rule") {
  const auto items = two_items();
  const auto table = build_bias_table(items, 3);
  CHECK(table.triplets == 2);
  CHECK(answer_prior("a", table) == doctest::Approx(0.75));
  CHECK(answer_prior("B.", table) == doctest::Approx(0.75));
  CHECK(answer_prior("c", table) == 0.0);
  CHECK(answer_prior("unseen", table) == 0.5);
  const auto r = evaluate_bias_rule(items, table);
  CHECK(r.total == 2);
  CHECK(r.correct == 1);  // a and b tie; the first wins
  CHECK(r.tied == 2);
  CHECK(r.accuracy == 0.5);
}

TEST_CASE("empty input") {
  const std::vector<CandidateSet> none;
  const auto table = build_bias_table(none, std::nullopt);
  CHECK(table.answers.empty());
  CHECK(bias_rule_accuracy(none, table) == 0.0);
  CHECK(frequency_stats(none).unique_targets == 0);
  CHECK(most_biased(table, 5).empty());
}

TEST_CASE("prior stays in [0, 1] and uses the per-decoy scale") {
  const auto items = two_items();
  const auto fixed = build_bias_table(items, 3);
  const auto inferred = build_bias_table(items, std::nullopt);
  CHECK(inferred.k == std::optional<std::size_t>(3));
  for (const char* a : {"a", "b", "c", "d", "zz"}) {
    const double p = answer_prior(a, fixed);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p == doctest::Approx(answer_prior(a, inferred)));
  }
}

TEST_CASE("decoys that never appear as targets give a perfect bias rule") {
  std::vector<CandidateSet> items;
  for (int i = 0; i < 50; ++i) {
    const std::string t = "t" + std::to_string(i % 7);
    items.push_back(item(std::to_string(i), {"d" + std::to_string(i % 11), t, "e" + std::to_string(i % 5), "f"},
                         1));
  }
  const auto table = build_bias_table(items, 3);
  CHECK(bias_rule_accuracy(items, table) == 1.0);
}

TEST_CASE("a symmetric corpus leaves the bias rule at chance") {
  // Every answer is the target once per four items and a decoy otherwise.
  const std::vector<std::string> words{"w", "x", "y", "z"};
  std::vector<CandidateSet> items;
  for (int i = 0; i < 400; ++i) {
    const std::size_t at = static_cast<std::size_t>(i % 4);
    std::vector<std::string> c = words;
    std::rotate(c.begin(), c.begin() + (i / 4) % 4, c.end());
    items.push_back(item(std::to_string(i), c, at));
  }
  const auto table = build_bias_table(items, 3);
  for (const auto& w : words) CHECK(answer_prior(w, table) == doctest::Approx(0.5));
  CHECK(bias_rule_accuracy(items, table) == doctest::Approx(0.25));
}

TEST_CASE("mixed decoy counts") {
  const std::vector<CandidateSet> items{item("1", {"a", "b", "c", "d"}, 0), item("2", {"b", "a"}, 0)};
  CHECK_THROWS_AS(build_bias_table(items, 3), Error);
  try {
    build_bias_table(items, 3);
  } catch (const Error& e) {
    CHECK(e.code() == "audit.inconsistent_k");
    CHECK(e.field() == "2");
  }
  const auto table = build_bias_table(items, std::nullopt);
  CHECK_FALSE(table.k.has_value());
  // a: one target, one decoy in a 1-decoy item.
  CHECK(answer_prior("a", table) == doctest::Approx(0.5));
  // b: one target, one decoy in a 3-decoy item.
  CHECK(answer_prior("b", table) == doctest::Approx(0.75));
}

TEST_CASE("frequency statistics on the toy") {
  const auto s = frequency_stats(two_items());
  CHECK(s.unique_targets == 2);
  CHECK(s.mean_target_count == 1.0);
  CHECK(s.mean_decoy_count == doctest::Approx(1.5));
  CHECK(s.mean_decoy_count_of_targets == 1.0);
  CHECK(s.chance_decoy_count == 3.0);
}

TEST_CASE("table totals match the slots") {
  std::vector<CandidateSet> items;
  for (int i = 0; i < 40; ++i) {
    items.push_back(item(std::to_string(i), {"p" + std::to_string(i % 3), "q" + std::to_string(i % 5), "r", "s"},
                         static_cast<std::size_t>(i % 4)));
  }
  const auto table = build_bias_table(items, 3);
  std::size_t targets = 0, decoys = 0;
  double weight = 0.0;
  for (const auto& [a, c] : table.answers) {
    targets += c.target_count;
    decoys += c.decoy_count;
    weight += c.decoy_weight;
  }
  CHECK(targets == 40);
  CHECK(decoys == 120);
  CHECK(weight == doctest::Approx(40.0));
}

TEST_CASE("most biased answers come first") {
  const auto table = build_bias_table(two_items(), 3);
  const auto top = most_biased(table, 3);
  REQUIRE(top.size() == 3);
  // c and d sit at prior 0 (distance 0.5), then a/b at 0.75.
  CHECK(top[0].answer == "c");
  CHECK(top[1].answer == "d");
  CHECK(top[2].answer == "a");
  CHECK(top[0].prior == 0.0);
}
