#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "decoyforge/decoygen.hpp"

namespace decoyforge {

struct AnswerCounts {
  std::size_t target_count = 0;
  std::size_t decoy_count = 0;
  // Sum of 1/K_item over decoy appearances; equals decoy_count/K when every
  // item has K decoys.
  double decoy_weight = 0.0;
};

// Per-answer usage counts keyed by normalized answer text.
struct BiasTable {
  std::unordered_map<std::string, AnswerCounts> answers;
  // Decoys per item when uniform; nullopt for mixed-size items.
  std::optional<std::size_t> k;
  std::size_t triplets = 0;

  const AnswerCounts* find(std::string_view answer) const;
};

/// Counts answers over `items`. With `k` set every item must carry exactly
/// k decoys (Error("audit.inconsistent_k") otherwise); without it, items may
/// differ and each decoy contributes 1/K_item to the prior's divisor.
BiasTable build_bias_table(std::span<const CandidateSet> items, std::optional<std::size_t> k);

/// 0.5 for unseen answers, else t / (t + d/K).
double answer_prior(std::string_view candidate, const BiasTable& table);

struct BiasRuleResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  // Items whose maximum prior was shared by more than one candidate.
  std::size_t tied = 0;
};

/// Picks the candidate with the highest prior, first among ties.
BiasRuleResult evaluate_bias_rule(std::span<const CandidateSet> items, const BiasTable& table);
double bias_rule_accuracy(std::span<const CandidateSet> items, const BiasTable& table);

struct FrequencyStats {
  std::size_t unique_targets = 0;
  // Target slots per distinct target answer.
  double mean_target_count = 0.0;
  // Decoy slots per distinct decoy answer.
  double mean_decoy_count = 0.0;
  // Decoy appearances averaged over the distinct target answers.
  double mean_decoy_count_of_targets = 0.0;
  // Decoy slots per distinct target answer: the decoy usage each target
  // would see if decoys were drawn from the target vocabulary.
  double chance_decoy_count = 0.0;
};

FrequencyStats frequency_stats(std::span<const CandidateSet> items);

struct BiasedAnswer {
  std::string answer;
  AnswerCounts counts;
  double prior;
};

/// Answers whose prior lies farthest from the neutral 0.5, most biased first.
std::vector<BiasedAnswer> most_biased(const BiasTable& table, std::size_t limit);

}  // namespace decoyforge
