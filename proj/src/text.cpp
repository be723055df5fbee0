#include "decoyforge/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "binary_io.hpp"
#include "decoyforge/util.hpp"

namespace decoyforge {

namespace {

constexpr std::array<std::string_view, 11> kNumberWords = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (auto& c : tok) {
        if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      if (tok.size() <= 2 && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        const int value = std::stoi(tok);
        if (value <= 10) tok = kNumberWords[value];
      }
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

std::string normalize_answer(std::string_view text) {
  std::string out;
  for (const auto& tok : normalize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::string compact_answer(std::string_view text) {
  std::string out;
  for (const auto& tok : normalize(text)) out += tok;
  return out;
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error("embeddings.dimension", "embedding dimension must be positive", "d_txt");
}

void EmbeddingTable::add(std::string word, std::span<const float> values) {
  if (values.size() != dim_) {
    throw Error("embeddings.dimension", "vector for '" + word + "' has dimension " + std::to_string(values.size()) +
                                            ", expected " + std::to_string(dim_),
                word);
  }
  // First occurrence wins, as in word2vec dumps with case-folded duplicates.
  if (!index_.emplace(word, words_.size()).second) return;
  words_.push_back(std::move(word));
  values_.insert(values_.end(), values.begin(), values.end());
}

std::optional<std::span<const float>> EmbeddingTable::lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return std::span<const float>(values_).subspan(it->second * dim_, dim_);
}

EmbeddingTable EmbeddingTable::parse_text(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  std::vector<float> buffer;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    buffer.clear();
    double v;
    while (ss >> v) buffer.push_back(static_cast<float>(v));
    if (!ss.eof()) {
      throw Error("embeddings.malformed", "line " + std::to_string(line_no) + ": non-numeric vector component");
    }
    if (line_no == 1 && buffer.size() == 1 &&
        std::all_of(word.begin(), word.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;  // "count dim" header
    }
    if (buffer.empty()) {
      throw Error("embeddings.malformed", "line " + std::to_string(line_no) + ": word without vector");
    }
    if (!table) table.emplace(buffer.size());
    if (buffer.size() != table->dim()) {
      throw Error("embeddings.dimension", "line " + std::to_string(line_no) + ": dimension " +
                                              std::to_string(buffer.size()) + ", expected " +
                                              std::to_string(table->dim()));
    }
    table->add(std::move(word), buffer);
  }
  if (!table) throw Error("embeddings.malformed", "embedding file has no vectors");
  return std::move(*table);
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io.open", "cannot open '" + path + "'", path);
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::string_view(magic, 4) == "DFEM";
  in.clear();
  in.seekg(0);
  if (!binary) return parse_text(in);

  binio::expect_magic(in, "DFEM", "embedding cache");
  const std::uint32_t dim = binio::get_u32(in, "embedding dimension");
  const std::uint32_t count = binio::get_u32(in, "embedding count");
  EmbeddingTable table(dim);
  std::vector<float> buffer(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string word = binio::get_bytes(in, binio::get_u32(in, "word length"), "word");
    for (auto& v : buffer) v = binio::get_f32(in, "embedding vector");
    table.add(std::move(word), buffer);
  }
  return table;
}

void EmbeddingTable::save_binary(const std::string& path) const {
  std::ostringstream out;
  out.write("DFEM", 4);
  binio::put_u32(out, static_cast<std::uint32_t>(dim_));
  binio::put_u32(out, static_cast<std::uint32_t>(words_.size()));
  for (std::size_t i = 0; i < words_.size(); ++i) {
    binio::put_string(out, words_[i]);
    for (std::size_t d = 0; d < dim_; ++d) binio::put_f32(out, values_[i * dim_ + d]);
  }
  write_file(path, out.str());
}

SentenceVector embed_avg(std::span<const std::string> tokens, const EmbeddingTable& table) {
  SentenceVector out;
  out.values.assign(table.dim(), 0.0);
  for (const auto& tok : tokens) {
    auto v = table.lookup(tok);
    if (!v) continue;
    for (std::size_t d = 0; d < v->size(); ++d) out.values[d] += (*v)[d];
    ++out.in_vocab_count;
  }
  if (out.in_vocab_count > 0) {
    const double inv = 1.0 / static_cast<double>(out.in_vocab_count);
    for (auto& x : out.values) x *= inv;
  }
  return out;
}

namespace {

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

// Shared by cosine() and QuestionIndex so both produce bit-identical values.
double cosine_from(double dot_uv, double norm_u, double norm_v) {
  if (norm_u == 0.0 || norm_v == 0.0) return 0.0;
  return std::clamp(dot_uv / (norm_u * norm_v), -1.0, 1.0);
}

bool ranks_before(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.triplet_id < b.triplet_id;
}

}  // namespace

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error("text.dimension", "cosine of vectors with dimensions " + std::to_string(u.size()) + " and " +
                                      std::to_string(v.size()));
  }
  return cosine_from(dot(u, v), l2_norm(u), l2_norm(v));
}

QuestionIndex::QuestionIndex(const Corpus& corpus, const EmbeddingTable& table) : corpus_(&corpus) {
  vectors_.resize(corpus.size());
  norms_.resize(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    const auto tokens = normalize(corpus[i].question);
    vectors_[i] = embed_avg(tokens, table);
    norms_[i] = l2_norm(vectors_[i].values);
  });
}

std::vector<Neighbor> QuestionIndex::topn(std::size_t query, std::size_t n) const {
  const auto& q = vectors_[query];
  if (n == 0 || q.in_vocab_count == 0 || norms_[query] == 0.0) return {};
  const std::string& image = (*corpus_)[query].image_id;

  // Bounded heap whose top is the worst kept neighbor.
  auto worse_on_top = [](const Neighbor& a, const Neighbor& b) { return ranks_before(a, b); };
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse_on_top)> heap(worse_on_top);
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    if (i == query) continue;
    const auto& r = (*corpus_)[i];
    if (r.image_id == image) continue;
    Neighbor cand{r.id, cosine_from(dot(q.values, vectors_[i].values), norms_[query], norms_[i])};
    if (heap.size() < n) {
      heap.push(std::move(cand));
    } else if (ranks_before(cand, heap.top())) {
      heap.pop();
      heap.push(std::move(cand));
    }
  }
  std::vector<Neighbor> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<Neighbor> topn_similar_questions(const Corpus& corpus, const TripletRecord& query, std::size_t n,
                                             const EmbeddingTable& table) {
  const auto q = embed_avg(normalize(query.question), table);
  const double q_norm = l2_norm(q.values);
  if (n == 0 || q.in_vocab_count == 0 || q_norm == 0.0) return {};
  std::vector<Neighbor> all;
  for (const auto& r : corpus.records()) {
    if (r.id == query.id || r.image_id == query.image_id) continue;
    const auto v = embed_avg(normalize(r.question), table);
    all.push_back({r.id, cosine_from(dot(q.values, v.values), q_norm, l2_norm(v.values))});
  }
  const std::size_t keep = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), ranks_before);
  all.resize(keep);
  return all;
}

}  // namespace decoyforge
