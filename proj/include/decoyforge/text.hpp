#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "decoyforge/corpus.hpp"

namespace decoyforge {

/// Lowercases, splits on whitespace, strips leading/trailing punctuation and
/// spells out standalone integers 0..10 ("2" -> "two").
std::vector<std::string> normalize(std::string_view text);

/// normalize() rejoined with single spaces; the identity used to compare answers.
std::string normalize_answer(std::string_view text);

/// normalize() with all whitespace removed ("Pony tail" -> "ponytail").
std::string compact_answer(std::string_view text);

// Word vectors of a fixed dimension.
//
// Text format: one "word v1 ... vd" per line; a leading "count dim" header
// line (word2vec style) is accepted and skipped. The binary cache starts
// with the magic "DFEM", then u32 dim, u32 count, and per word a u32 length,
// the word bytes and dim little-endian float32 values.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }

  void add(std::string word, std::span<const float> values);
  std::optional<std::span<const float>> lookup(std::string_view word) const;

  /// Auto-detects the binary cache by its magic, otherwise parses text.
  static EmbeddingTable load(const std::string& path);
  static EmbeddingTable parse_text(std::istream& in);
  void save_binary(const std::string& path) const;

 private:
  std::size_t dim_;
  std::vector<std::string> words_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SentenceVector {
  std::vector<double> values;
  std::size_t in_vocab_count = 0;
};

/// Mean of the in-vocabulary token vectors; OOV tokens are skipped. An
/// all-OOV or empty list gives the zero vector with count 0.
SentenceVector embed_avg(std::span<const std::string> tokens, const EmbeddingTable& table);

double l2_norm(std::span<const double> v);

/// u.v / (|u||v|), 0 when either norm is 0. Throws Error("text.dimension")
/// on mismatched sizes.
double cosine(std::span<const double> u, std::span<const double> v);

struct Neighbor {
  std::string triplet_id;
  double similarity;

  bool operator==(const Neighbor&) const = default;
};

// Question embeddings for every record of a corpus, reused across queries.
class QuestionIndex {
 public:
  QuestionIndex(const Corpus& corpus, const EmbeddingTable& table);

  /// Top-n most similar questions to record `query`, excluding the record
  /// itself and any record on the same image. Descending similarity, ties
  /// by ascending triplet id. Empty if the query embeds to zero.
  std::vector<Neighbor> topn(std::size_t query, std::size_t n) const;

  const SentenceVector& vector(std::size_t record) const { return vectors_[record]; }

 private:
  const Corpus* corpus_;
  std::vector<SentenceVector> vectors_;
  std::vector<double> norms_;
};

std::vector<Neighbor> topn_similar_questions(const Corpus& corpus, const TripletRecord& query,
                                             std::size_t n, const EmbeddingTable& table);

}  // namespace decoyforge
