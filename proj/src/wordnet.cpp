#include "decoyforge/wordnet.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <sstream>

#include "decoyforge/text.hpp"
#include "decoyforge/util.hpp"

namespace decoyforge {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

Taxonomy Taxonomy::build(std::vector<SynsetSpec> specs) {
  Taxonomy tax;
  tax.synsets_.reserve(specs.size() + 1);
  Synset root;
  root.id = "*ROOT*";
  root.name = "*ROOT*";
  tax.synsets_.push_back(std::move(root));

  for (auto& spec : specs) {
    Synset s;
    s.id = std::move(spec.id);
    s.name = spec.name.empty() ? s.id : std::move(spec.name);
    s.pos = spec.pos;
    s.lemmas = std::move(spec.lemmas);
    if (!tax.by_id_.emplace(s.id, tax.synsets_.size()).second) {
      throw Error("taxonomy.duplicate_id", "duplicate synset id '" + s.id + "'", s.id);
    }
    tax.synsets_.push_back(std::move(s));
  }

  std::vector<std::vector<std::size_t>> children(tax.synsets_.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& s = tax.synsets_[i + 1];
    for (const auto& pid : specs[i].hypernym_ids) {
      auto it = tax.by_id_.find(pid);
      if (it == tax.by_id_.end()) {
        throw Error("taxonomy.dangling_parent", "synset '" + s.id + "' names unknown parent '" + pid + "'", s.id);
      }
      if (std::find(s.hypernyms.begin(), s.hypernyms.end(), it->second) == s.hypernyms.end()) {
        s.hypernyms.push_back(it->second);
        children[it->second].push_back(i + 1);
      }
    }
  }

  // Kahn's algorithm from the hierarchy roots; depths follow the
  // 1 + min/max over parents recurrence.
  std::vector<std::size_t> pending(tax.synsets_.size());
  std::deque<std::size_t> ready;
  for (std::size_t i = 1; i < tax.synsets_.size(); ++i) {
    pending[i] = tax.synsets_[i].hypernyms.size();
    if (pending[i] == 0) {
      tax.synsets_[i].depth = 1;
      tax.synsets_[i].max_depth = 1;
      ready.push_back(i);
    }
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const std::size_t u = ready.front();
    ready.pop_front();
    ++visited;
    for (std::size_t c : children[u]) {
      if (--pending[c] == 0) {
        auto& child = tax.synsets_[c];
        int lo = std::numeric_limits<int>::max(), hi = 0;
        for (std::size_t p : child.hypernyms) {
          lo = std::min(lo, tax.synsets_[p].depth);
          hi = std::max(hi, tax.synsets_[p].max_depth);
        }
        child.depth = lo + 1;
        child.max_depth = hi + 1;
        ready.push_back(c);
      }
    }
  }
  if (visited != specs.size()) {
    for (std::size_t i = 1; i < tax.synsets_.size(); ++i) {
      if (pending[i] != 0) {
        throw Error("taxonomy.cycle", "hypernym cycle through synset '" + tax.synsets_[i].id + "'",
                    tax.synsets_[i].id);
      }
    }
  }

  for (std::size_t i = 1; i < tax.synsets_.size(); ++i) {
    const auto& s = tax.synsets_[i];
    if (s.pos == PartOfSpeech::other) continue;
    for (const auto& lemma : s.lemmas) {
      auto& list = tax.lemma_index_[lower(lemma)];
      if (std::find(list.begin(), list.end(), i) == list.end()) list.push_back(i);
    }
  }
  return tax;
}

std::optional<std::size_t> Taxonomy::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> Taxonomy::lookup(std::string_view lemma) const {
  auto it = lemma_index_.find(lower(lemma));
  if (it == lemma_index_.end()) return {};
  return it->second;
}

std::vector<std::pair<std::size_t, int>> Taxonomy::ancestors(std::size_t s) const {
  std::vector<std::pair<std::size_t, int>> out;
  if (s == kVirtualRoot) return out;
  std::unordered_map<std::size_t, int> seen;
  std::deque<std::size_t> queue{s};
  seen.emplace(s, 0);
  out.emplace_back(s, 0);
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    const int d = seen.at(u);
    for (std::size_t p : synsets_[u].hypernyms) {
      if (seen.emplace(p, d + 1).second) {
        out.emplace_back(p, d + 1);
        queue.push_back(p);
      }
    }
  }
  return out;
}

TaxonomyFormat parse_taxonomy_format(std::string_view name) {
  if (name == "edge-list" || name == "edges") return TaxonomyFormat::edge_list;
  if (name == "wordnet-db" || name == "wordnet") return TaxonomyFormat::wordnet_db;
  throw Error("config.invalid", "unknown taxonomy format '" + std::string(name) + "'", "taxonomy-format");
}

namespace {

PartOfSpeech parse_pos(std::string_view s) {
  const std::string p = lower(s);
  if (p == "n" || p == "noun") return PartOfSpeech::noun;
  if (p == "a" || p == "s" || p == "adj" || p == "adjective") return PartOfSpeech::adj;
  return PartOfSpeech::other;
}

std::vector<std::string> split_commas(const std::string& field) {
  std::vector<std::string> out;
  std::stringstream ss(field);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" ");
    const auto e = item.find_last_not_of(" ");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

Taxonomy parse_edge_list(std::istream& in) {
  std::vector<SynsetSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() < 3 || fields.size() > 4 || fields[0].empty()) {
      throw Error("taxonomy.malformed", "line " + std::to_string(line_no) +
                                            ": expected id<TAB>pos<TAB>lemmas<TAB>parents");
    }
    SynsetSpec spec;
    spec.id = fields[0];
    spec.pos = parse_pos(fields[1]);
    spec.lemmas = split_commas(fields[2]);
    if (fields.size() == 4) spec.hypernym_ids = split_commas(fields[3]);
    specs.push_back(std::move(spec));
  }
  return Taxonomy::build(std::move(specs));
}

Taxonomy load_taxonomy(const std::string& path, TaxonomyFormat format) {
  if (format == TaxonomyFormat::wordnet_db) return load_wordnet_db(path);
  std::ifstream in(path);
  if (!in) throw Error("io.open", "cannot open '" + path + "'", path);
  return parse_edge_list(in);
}

double wup_synset(std::size_t a, std::size_t b, const Taxonomy& tax) {
  if (a == b) return 1.0;
  const auto up_a = tax.ancestors(a);
  const auto up_b = tax.ancestors(b);
  std::unordered_map<std::size_t, int> dist_a(up_a.begin(), up_a.end());

  // Least common subsumer: the common ancestor with the greatest (shortest
  // path) depth, ties going to the smallest sense name. The name order
  // keeps the score symmetric.
  std::optional<std::size_t> lcs;
  int dist_to_a = 0, dist_to_b = 0;
  for (const auto& [node, db] : up_b) {
    auto it = dist_a.find(node);
    if (it == dist_a.end()) continue;
    bool better = false;
    if (!lcs) {
      better = true;
    } else {
      const auto& cur = tax.synset(*lcs);
      const auto& cand = tax.synset(node);
      better = cand.depth != cur.depth ? cand.depth > cur.depth : cand.name < cur.name;
    }
    if (better) {
      lcs = node;
      dist_to_a = it->second;
      dist_to_b = db;
    }
  }

  if (!lcs) {
    // Only the virtual root is shared; it is scored as a depth-1 subsumer
    // one step above each hierarchy root.
    const double da = tax.synset(a).depth, db = tax.synset(b).depth;
    return 2.0 / (2.0 + da + db);
  }
  const double depth = tax.synset(*lcs).max_depth;
  return 2.0 * depth / (2.0 * depth + dist_to_a + dist_to_b);
}

namespace {

double wup_word_uncached(std::string_view w1, std::string_view w2, const Taxonomy& tax) {
  const auto s1 = tax.lookup(w1);
  const auto s2 = tax.lookup(w2);
  if (s1.empty() || s2.empty()) {
    return normalize_answer(w1) == normalize_answer(w2) ? 1.0 : 0.0;
  }
  double best = 0.0;
  for (std::size_t a : s1) {
    for (std::size_t b : s2) {
      best = std::max(best, wup_synset(a, b, tax));
      if (best == 1.0) return best;
    }
  }
  return best;
}

template <typename WordFn>
double sequence_score(std::span<const std::string> s1, std::span<const std::string> s2, WordFn&& word) {
  if (s1.empty() || s2.empty()) return 0.0;
  std::vector<double> best2(s2.size(), 0.0);
  double forward = 1.0;
  for (const auto& w1 : s1) {
    double best1 = 0.0;
    for (std::size_t j = 0; j < s2.size(); ++j) {
      const double v = word(w1, s2[j]);
      best1 = std::max(best1, v);
      best2[j] = std::max(best2[j], v);
    }
    forward *= best1;
  }
  double backward = 1.0;
  for (double v : best2) backward *= v;
  return std::max(forward, backward);
}

}  // namespace

double wup_word(std::string_view w1, std::string_view w2, const Taxonomy& tax) {
  return wup_word_uncached(w1, w2, tax);
}

double wup_sequence(std::span<const std::string> s1, std::span<const std::string> s2, const Taxonomy& tax) {
  return sequence_score(s1, s2, [&](const std::string& a, const std::string& b) { return wup_word(a, b, tax); });
}

WupScorer::WupScorer(const Taxonomy& tax, std::size_t capacity)
    : tax_(&tax), shard_capacity_(std::max<std::size_t>(1, capacity / kShards)) {}

double WupScorer::word(std::string_view w1, std::string_view w2) const {
  std::string a = lower(w1), b = lower(w2);
  if (b < a) std::swap(a, b);
  std::string key = a;
  key.push_back('\x1f');
  key += b;
  Shard& shard = shards_[fnv1a64(key) % kShards];
  {
    std::lock_guard lock(shard.mutex);
    if (auto it = shard.values.find(key); it != shard.values.end()) {
      ++shard.hits;
      return it->second;
    }
    ++shard.misses;
  }
  const double v = wup_word_uncached(a, b, *tax_);
  std::lock_guard lock(shard.mutex);
  if (shard.values.size() >= shard_capacity_) shard.values.clear();
  shard.values.emplace(std::move(key), v);
  return v;
}

double WupScorer::sequence(std::span<const std::string> s1, std::span<const std::string> s2) const {
  return sequence_score(s1, s2, [&](const std::string& a, const std::string& b) { return word(a, b); });
}

std::size_t WupScorer::hits() const {
  std::size_t n = 0;
  for (auto& s : shards_) {
    std::lock_guard lock(s.mutex);
    n += s.hits;
  }
  return n;
}

std::size_t WupScorer::misses() const {
  std::size_t n = 0;
  for (auto& s : shards_) {
    std::lock_guard lock(s.mutex);
    n += s.misses;
  }
  return n;
}

}  // namespace decoyforge
