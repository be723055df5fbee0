#include "decoyforge/audit.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "decoyforge/text.hpp"
#include "decoyforge/util.hpp"

namespace decoyforge {

const AnswerCounts* BiasTable::find(std::string_view answer) const {
  auto it = answers.find(std::string(answer));
  return it == answers.end() ? nullptr : &it->second;
}

BiasTable build_bias_table(std::span<const CandidateSet> items, std::optional<std::size_t> k) {
  BiasTable table;
  table.k = k;
  std::optional<std::size_t> seen_k;
  bool mixed = false;
  for (const auto& item : items) {
    const std::size_t item_k = item.decoy_count();
    if (k && item_k != *k) {
      throw Error("audit.inconsistent_k", "item '" + item.triplet_id + "' has " + std::to_string(item_k) +
                                              " decoys, expected " + std::to_string(*k),
                  item.triplet_id);
    }
    if (seen_k && *seen_k != item_k) mixed = true;
    seen_k = item_k;
    ++table.triplets;
    for (std::size_t i = 0; i < item.candidates.size(); ++i) {
      auto& counts = table.answers[normalize_answer(item.candidates[i])];
      if (i == item.target_index) {
        ++counts.target_count;
      } else {
        ++counts.decoy_count;
        counts.decoy_weight += 1.0 / static_cast<double>(item_k);
      }
    }
  }
  if (!k && !mixed && seen_k) table.k = seen_k;
  return table;
}

double answer_prior(std::string_view candidate, const BiasTable& table) {
  const AnswerCounts* c = table.find(normalize_answer(candidate));
  if (!c || (c->target_count == 0 && c->decoy_count == 0)) return 0.5;
  const double t = static_cast<double>(c->target_count);
  const double d = table.k ? static_cast<double>(c->decoy_count) / static_cast<double>(*table.k) : c->decoy_weight;
  return t / (t + d);
}

BiasRuleResult evaluate_bias_rule(std::span<const CandidateSet> items, const BiasTable& table) {
  BiasRuleResult out;
  for (const auto& item : items) {
    if (item.candidates.empty()) continue;
    ++out.total;
    std::size_t best = 0;
    double best_prior = answer_prior(item.candidates[0], table);
    std::size_t ties = 1;
    for (std::size_t i = 1; i < item.candidates.size(); ++i) {
      const double p = answer_prior(item.candidates[i], table);
      if (p > best_prior) {
        best = i;
        best_prior = p;
        ties = 1;
      } else if (p == best_prior) {
        ++ties;
      }
    }
    if (ties > 1) ++out.tied;
    if (best == item.target_index) ++out.correct;
  }
  out.accuracy = out.total ? static_cast<double>(out.correct) / static_cast<double>(out.total) : 0.0;
  return out;
}

double bias_rule_accuracy(std::span<const CandidateSet> items, const BiasTable& table) {
  return evaluate_bias_rule(items, table).accuracy;
}

FrequencyStats frequency_stats(std::span<const CandidateSet> items) {
  FrequencyStats s;
  std::unordered_map<std::string, std::size_t> targets;
  std::unordered_map<std::string, std::size_t> decoys;
  std::size_t target_slots = 0, decoy_slots = 0;
  for (const auto& item : items) {
    for (std::size_t i = 0; i < item.candidates.size(); ++i) {
      const auto n = normalize_answer(item.candidates[i]);
      if (i == item.target_index) {
        ++targets[n];
        ++target_slots;
      } else {
        ++decoys[n];
        ++decoy_slots;
      }
    }
  }
  s.unique_targets = targets.size();
  if (!targets.empty()) {
    const double u = static_cast<double>(targets.size());
    s.mean_target_count = static_cast<double>(target_slots) / u;
    s.chance_decoy_count = static_cast<double>(decoy_slots) / u;
    std::size_t decoy_hits = 0;
    for (const auto& [answer, count] : targets) {
      if (auto it = decoys.find(answer); it != decoys.end()) decoy_hits += it->second;
    }
    s.mean_decoy_count_of_targets = static_cast<double>(decoy_hits) / u;
  }
  if (!decoys.empty()) s.mean_decoy_count = static_cast<double>(decoy_slots) / static_cast<double>(decoys.size());
  return s;
}

std::vector<BiasedAnswer> most_biased(const BiasTable& table, std::size_t limit) {
  std::vector<BiasedAnswer> all;
  all.reserve(table.answers.size());
  for (const auto& [answer, counts] : table.answers) {
    all.push_back({answer, counts, answer_prior(answer, table)});
  }
  std::sort(all.begin(), all.end(), [](const BiasedAnswer& a, const BiasedAnswer& b) {
    const double da = std::abs(a.prior - 0.5), db = std::abs(b.prior - 0.5);
    if (da != db) return da > db;
    const auto na = a.counts.target_count + a.counts.decoy_count;
    const auto nb = b.counts.target_count + b.counts.decoy_count;
    if (na != nb) return na > nb;
    return a.answer < b.answer;
  });
  if (all.size() > limit) all.resize(limit);
  return all;
}

}  // namespace decoyforge
