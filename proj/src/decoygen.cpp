#include "decoyforge/decoygen.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "decoyforge/util.hpp"
#include "json.hpp"

namespace decoyforge {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSaltIou = 0x10u;
constexpr std::uint64_t kSaltFill = 0x20u;
constexpr std::uint64_t kSaltPlace = 0x30u;

}  // namespace

std::string_view to_string(FallbackPool pool) {
  return pool == FallbackPool::orig_decoys ? "orig-decoys" : "frequent-targets";
}

std::string_view to_string(CandidateMode mode) {
  switch (mode) {
    case CandidateMode::orig: return "orig";
    case CandidateMode::iou: return "iou";
    case CandidateMode::qou: return "qou";
    case CandidateMode::iou_qou: return "iou+qou";
    case CandidateMode::all: return "all";
  }
  return "orig";
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::target: return "target";
    case Provenance::orig: return "orig";
    case Provenance::qou: return "qou";
    case Provenance::iou: return "iou";
    case Provenance::fallback: return "fallback";
  }
  return "target";
}

FallbackPool parse_fallback_pool(std::string_view name) {
  if (name == "orig-decoys" || name == "orig") return FallbackPool::orig_decoys;
  if (name == "frequent-targets" || name == "frequent") return FallbackPool::frequent_targets;
  throw Error("config.invalid", "unknown fallback pool '" + std::string(name) + "'", "fallback");
}

CandidateMode parse_candidate_mode(std::string_view name) {
  if (name == "orig") return CandidateMode::orig;
  if (name == "iou") return CandidateMode::iou;
  if (name == "qou") return CandidateMode::qou;
  if (name == "iou+qou" || name == "iou_qou" || name == "iouqou") return CandidateMode::iou_qou;
  if (name == "all") return CandidateMode::all;
  throw Error("config.invalid", "unknown decoy mode '" + std::string(name) + "'", "mode");
}

Provenance parse_provenance(std::string_view name) {
  if (name == "target") return Provenance::target;
  if (name == "orig") return Provenance::orig;
  if (name == "qou") return Provenance::qou;
  if (name == "iou") return Provenance::iou;
  if (name == "fallback") return Provenance::fallback;
  throw Error("candidates.malformed", "unknown provenance '" + std::string(name) + "'", "provenance");
}

void DecoyGenConfig::validate() const {
  if (k < 1) throw Error("config.invalid", "k must be at least 1", "k");
  if (topn < k) throw Error("config.invalid", "topn must be at least k", "topn");
  if (!(wup_threshold > 0.0 && wup_threshold <= 1.0)) {
    throw Error("config.invalid", "threshold must lie in (0, 1], got " + std::to_string(wup_threshold), "threshold");
  }
}

bool string_filter(std::string_view target, std::string_view candidate) {
  const std::string t = compact_answer(target);
  const std::string c = compact_answer(candidate);
  return t.find(c) != std::string::npos || c.find(t) != std::string::npos;
}

bool is_ambiguous(std::string_view target, std::string_view candidate, const WupScorer& wup, double threshold) {
  if (string_filter(target, candidate)) return true;
  return wup.sequence(normalize(target), normalize(candidate)) >= threshold;
}

bool is_ambiguous(std::string_view target, std::string_view candidate, const Taxonomy& tax, double threshold) {
  if (string_filter(target, candidate)) return true;
  return wup_sequence(normalize(target), normalize(candidate), tax) >= threshold;
}

ProcedureStats& ProcedureStats::operator+=(const ProcedureStats& o) {
  examined += o.examined;
  accepted += o.accepted;
  rejected_containment += o.rejected_containment;
  rejected_wup += o.rejected_wup;
  rejected_mutual += o.rejected_mutual;
  shortfall_records += o.shortfall_records;
  fallback_slots += o.fallback_slots;
  return *this;
}

GenerationReport& GenerationReport::operator+=(const GenerationReport& o) {
  records += o.records;
  qou += o.qou;
  iou += o.iou;
  fallback_orig += o.fallback_orig;
  fallback_frequent += o.fallback_frequent;
  fallback_global += o.fallback_global;
  duplicates_removed += o.duplicates_removed;
  return *this;
}

DecoyGenerator::DecoyGenerator(const Corpus& corpus, const Taxonomy& tax, DecoyGenConfig cfg)
    : corpus_(&corpus), cfg_(cfg), wup_(std::make_unique<WupScorer>(tax)) {
  cfg_.validate();

  // Normalized target -> (count, first surface form).
  std::map<std::string, std::pair<std::size_t, std::string>> counts;
  for (const auto& r : corpus.records()) {
    auto n = normalize_answer(r.target);
    if (n.empty()) continue;
    auto [it, inserted] = counts.try_emplace(std::move(n), 0, r.target);
    ++it->second.first;
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::string>>> ranked(counts.begin(), counts.end());
  vocabulary_.reserve(ranked.size());
  for (const auto& [norm, entry] : ranked) vocabulary_.push_back(entry.second);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second.first > b.second.first; });
  for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) frequent_.push_back(ranked[i].second.second);
}

DecoyGenerator::DecoyGenerator(const Corpus& corpus, const EmbeddingTable& table, const Taxonomy& tax,
                               DecoyGenConfig cfg)
    : DecoyGenerator(corpus, tax, cfg) {
  index_ = std::make_unique<QuestionIndex>(corpus, table);
}

DecoyGenerator::~DecoyGenerator() = default;

std::vector<std::string> DecoyGenerator::filter_walk(std::size_t record, const std::vector<std::string>& pool,
                                                     ProcedureStats* stats) const {
  ProcedureStats local;
  const std::string& target = (*corpus_)[record].target;
  const auto target_tokens = normalize(target);
  std::vector<std::string> accepted;
  for (const auto& cand : pool) {
    if (accepted.size() >= cfg_.k) break;
    ++local.examined;
    if (string_filter(target, cand)) {
      ++local.rejected_containment;
      continue;
    }
    if (wup_->sequence(target_tokens, normalize(cand)) >= cfg_.wup_threshold) {
      ++local.rejected_wup;
      continue;
    }
    const bool clashes = std::any_of(accepted.begin(), accepted.end(), [&](const std::string& a) {
      return is_ambiguous(a, cand, *wup_, cfg_.wup_threshold);
    });
    if (clashes) {
      ++local.rejected_mutual;
      continue;
    }
    ++local.accepted;
    accepted.push_back(cand);
  }
  if (accepted.size() < cfg_.k) ++local.shortfall_records;
  if (stats) *stats += local;
  return accepted;
}

std::vector<std::string> DecoyGenerator::qou(std::size_t record, ProcedureStats* stats) const {
  if (!index_) throw Error("decoygen.no_embeddings", "QoU decoys need an embedding table", "embeddings");
  std::vector<std::string> pool;
  for (const auto& n : index_->topn(record, cfg_.topn)) {
    pool.push_back((*corpus_)[*corpus_->find(n.triplet_id)].target);
  }
  return filter_walk(record, pool, stats);
}

std::vector<std::string> DecoyGenerator::iou(std::size_t record, ProcedureStats* stats) const {
  const auto& r = (*corpus_)[record];
  std::vector<std::string> pool;
  for (std::size_t i : corpus_->records_for_image(r.image_id)) {
    if (i != record) pool.push_back((*corpus_)[i].target);
  }
  auto rng = keyed_rng(cfg_.seed, r.id, kSaltIou);
  stable_shuffle(pool, rng);
  return filter_walk(record, pool, stats);
}

std::vector<std::string> DecoyGenerator::fill(std::size_t record, std::vector<std::string> partial,
                                              std::size_t want, const std::vector<std::string>& taken,
                                              std::string_view purpose, GenerationReport* report) const {
  const auto& r = (*corpus_)[record];
  std::unordered_set<std::string> used(taken.begin(), taken.end());
  used.insert(normalize_answer(r.target));
  for (const auto& p : partial) used.insert(normalize_answer(p));

  auto rng = keyed_rng(cfg_.seed, r.id + "/" + std::string(purpose), kSaltFill);
  auto try_add = [&](const std::string& cand) {
    if (partial.size() >= want) return false;
    std::string n = normalize_answer(cand);
    if (n.empty() || used.contains(n)) return false;
    if (is_ambiguous(r.target, cand, *wup_, cfg_.wup_threshold)) return false;
    used.insert(std::move(n));
    partial.push_back(cand);
    return true;
  };

  std::vector<std::string> pool =
      cfg_.fallback == FallbackPool::orig_decoys ? r.orig_decoys : frequent_;
  stable_shuffle(pool, rng);
  for (const auto& cand : pool) {
    if (partial.size() >= want) break;
    if (try_add(cand) && report) {
      ++(cfg_.fallback == FallbackPool::orig_decoys ? report->fallback_orig : report->fallback_frequent);
    }
  }

  // Global target vocabulary: a few random probes, then a scan from a
  // random offset so the whole vocabulary is reachable.
  const std::size_t vocab = vocabulary_.size();
  if (partial.size() < want && vocab > 0) {
    for (int probe = 0; probe < 64 && partial.size() < want; ++probe) {
      if (try_add(vocabulary_[uniform_index(rng, vocab)]) && report) ++report->fallback_global;
    }
    const std::size_t start = uniform_index(rng, vocab);
    for (std::size_t i = 0; i < vocab && partial.size() < want; ++i) {
      if (try_add(vocabulary_[(start + i) % vocab]) && report) ++report->fallback_global;
    }
  }
  if (partial.size() < want) {
    throw Error("decoygen.exhausted", "corpus has too few distinct unambiguous answers to fill " +
                                          std::to_string(want) + " decoys for '" + r.id + "'",
                r.id);
  }
  return partial;
}

CandidateSet DecoyGenerator::assemble(std::size_t record, const std::vector<std::string>& qou,
                                      const std::vector<std::string>& iou, CandidateMode mode,
                                      GenerationReport* report) const {
  const auto& r = (*corpus_)[record];
  const bool use_orig = mode == CandidateMode::orig || mode == CandidateMode::all;
  const bool use_iou = mode == CandidateMode::iou || mode == CandidateMode::iou_qou || mode == CandidateMode::all;
  const bool use_qou = mode == CandidateMode::qou || mode == CandidateMode::iou_qou || mode == CandidateMode::all;
  if (use_orig && r.orig_decoys.empty()) {
    throw Error("decoygen.no_orig_decoys", "record '" + r.id + "' has no original decoys for mode " +
                                               std::string(to_string(mode)),
                r.id);
  }

  CandidateSet out;
  out.triplet_id = r.id;
  out.image_id = r.image_id;
  out.question = r.question;
  out.split = r.split;
  out.mode = mode;
  out.human_answers = r.human_answers;

  std::vector<std::string> taken{normalize_answer(r.target)};
  auto add_source = [&](const std::vector<std::string>& items, std::size_t want, Provenance source) {
    std::vector<std::string> kept;
    for (const auto& item : items) {
      if (kept.size() >= want) break;
      std::string n = normalize_answer(item);
      if (std::find(taken.begin(), taken.end(), n) != taken.end()) {
        if (report) ++report->duplicates_removed;
        continue;
      }
      taken.push_back(std::move(n));
      kept.push_back(item);
    }
    const std::size_t own = kept.size();
    if (own < want) {
      kept = fill(record, std::move(kept), want, taken, to_string(source), report);
      for (std::size_t i = own; i < kept.size(); ++i) taken.push_back(normalize_answer(kept[i]));
      if (report) {
        if (source == Provenance::qou) report->qou.fallback_slots += want - own;
        if (source == Provenance::iou) report->iou.fallback_slots += want - own;
      }
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
      out.candidates.push_back(kept[i]);
      out.provenance.push_back(i < own ? source : Provenance::fallback);
      out.slots.push_back(source);
    }
  };

  if (use_orig) add_source(r.orig_decoys, r.orig_decoys.size(), Provenance::orig);
  if (use_iou) add_source(iou, cfg_.k, Provenance::iou);
  if (use_qou) add_source(qou, cfg_.k, Provenance::qou);

  auto rng = keyed_rng(cfg_.seed, r.id, kSaltPlace);
  const std::size_t at = uniform_index(rng, out.candidates.size() + 1);
  out.candidates.insert(out.candidates.begin() + static_cast<std::ptrdiff_t>(at), r.target);
  out.provenance.insert(out.provenance.begin() + static_cast<std::ptrdiff_t>(at), Provenance::target);
  out.slots.insert(out.slots.begin() + static_cast<std::ptrdiff_t>(at), Provenance::target);
  out.target_index = at;
  return out;
}

std::vector<DecoyGenerator::Result> DecoyGenerator::remediate(const std::vector<CandidateMode>& modes) const {
  const bool need_qou = std::any_of(modes.begin(), modes.end(), [](CandidateMode m) {
    return m == CandidateMode::qou || m == CandidateMode::iou_qou || m == CandidateMode::all;
  });
  const bool need_iou = std::any_of(modes.begin(), modes.end(), [](CandidateMode m) {
    return m == CandidateMode::iou || m == CandidateMode::iou_qou || m == CandidateMode::all;
  });

  const std::size_t n = corpus_->size();
  std::vector<GenerationReport> gen_stats(n);
  std::vector<std::vector<CandidateSet>> per_mode(modes.size(), std::vector<CandidateSet>(n));
  std::vector<std::vector<GenerationReport>> per_mode_stats(modes.size(), std::vector<GenerationReport>(n));

  parallel_for(n, [&](std::size_t i) {
    gen_stats[i].records = 1;
    const auto q = need_qou ? qou(i, &gen_stats[i].qou) : std::vector<std::string>{};
    const auto o = need_iou ? iou(i, &gen_stats[i].iou) : std::vector<std::string>{};
    for (std::size_t m = 0; m < modes.size(); ++m) {
      per_mode[m][i] = assemble(i, q, o, modes[m], &per_mode_stats[m][i]);
    }
  });

  GenerationReport generated;
  for (const auto& g : gen_stats) generated += g;
  std::vector<Result> results(modes.size());
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const bool uses_qou = modes[m] == CandidateMode::qou || modes[m] == CandidateMode::iou_qou ||
                          modes[m] == CandidateMode::all;
    const bool uses_iou = modes[m] == CandidateMode::iou || modes[m] == CandidateMode::iou_qou ||
                          modes[m] == CandidateMode::all;
    GenerationReport report;
    report.records = generated.records;
    if (uses_qou) report.qou = generated.qou;
    if (uses_iou) report.iou = generated.iou;
    for (const auto& s : per_mode_stats[m]) report += s;
    report.records = generated.records;
    results[m] = Result{std::move(per_mode[m]), report};
  }
  return results;
}

DecoyGenerator::Result DecoyGenerator::remediate(CandidateMode mode) const {
  return std::move(remediate(std::vector<CandidateMode>{mode}).front());
}

namespace {

std::size_t position_of(const TripletRecord& record, const Corpus& corpus) {
  auto pos = corpus.find(record.id);
  if (!pos) throw Error("decoygen.unknown_record", "record '" + record.id + "' is not in the corpus", record.id);
  return *pos;
}

}  // namespace

std::vector<std::string> gen_qou_decoys(const TripletRecord& record, const Corpus& corpus,
                                        const EmbeddingTable& table, const Taxonomy& tax,
                                        const DecoyGenConfig& cfg) {
  return DecoyGenerator(corpus, table, tax, cfg).qou(position_of(record, corpus));
}

std::vector<std::string> gen_iou_decoys(const TripletRecord& record, const Corpus& corpus, const Taxonomy& tax,
                                        const DecoyGenConfig& cfg) {
  return DecoyGenerator(corpus, tax, cfg).iou(position_of(record, corpus));
}

std::vector<std::string> fill_fallback(const TripletRecord& record, const std::vector<std::string>& partial,
                                       const Corpus& corpus, const Taxonomy& tax, const DecoyGenConfig& cfg) {
  if (partial.size() >= cfg.k) return partial;
  return DecoyGenerator(corpus, tax, cfg).fill(position_of(record, corpus), partial, cfg.k, {}, "fallback");
}

DecoyGenerator::Result remediate_corpus(const Corpus& corpus, const EmbeddingTable& table, const Taxonomy& tax,
                                        const DecoyGenConfig& cfg, CandidateMode mode) {
  return DecoyGenerator(corpus, table, tax, cfg).remediate(mode);
}

std::vector<CandidateSet> orig_candidate_sets(const Corpus& corpus, std::uint64_t seed) {
  std::vector<CandidateSet> out;
  out.reserve(corpus.size());
  for (const auto& r : corpus.records()) {
    CandidateSet c;
    c.triplet_id = r.id;
    c.image_id = r.image_id;
    c.question = r.question;
    c.split = r.split;
    c.mode = CandidateMode::orig;
    c.human_answers = r.human_answers;
    std::vector<std::string> taken{normalize_answer(r.target)};
    for (const auto& d : r.orig_decoys) {
      auto n = normalize_answer(d);
      if (std::find(taken.begin(), taken.end(), n) != taken.end()) continue;
      taken.push_back(std::move(n));
      c.candidates.push_back(d);
      c.provenance.push_back(Provenance::orig);
      c.slots.push_back(Provenance::orig);
    }
    auto rng = keyed_rng(seed, r.id, kSaltPlace);
    const std::size_t at = uniform_index(rng, c.candidates.size() + 1);
    c.candidates.insert(c.candidates.begin() + static_cast<std::ptrdiff_t>(at), r.target);
    c.provenance.insert(c.provenance.begin() + static_cast<std::ptrdiff_t>(at), Provenance::target);
    c.slots.insert(c.slots.begin() + static_cast<std::ptrdiff_t>(at), Provenance::target);
    c.target_index = at;
    out.push_back(std::move(c));
  }
  return out;
}

void write_candidates(std::ostream& out, const std::vector<CandidateSet>& items) {
  for (const auto& c : items) {
    json prov = json::array(), slots = json::array();
    for (auto p : c.provenance) prov.push_back(to_string(p));
    for (auto p : c.slots) slots.push_back(to_string(p));
    json j = {{"id", c.triplet_id},
              {"image_id", c.image_id},
              {"question", c.question},
              {"candidates", c.candidates},
              {"target_index", c.target_index},
              {"provenance", prov},
              {"slots", slots},
              {"split", to_string(c.split)},
              {"mode", to_string(c.mode)}};
    if (!c.human_answers.empty()) j["human_answers"] = c.human_answers;
    out << j.dump() << '\n';
  }
}

void write_candidates(const std::string& path, const std::vector<CandidateSet>& items) {
  std::ostringstream ss;
  write_candidates(ss, items);
  write_file(path, ss.str());
}

std::vector<CandidateSet> read_candidates(std::istream& in) {
  std::vector<CandidateSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      CandidateSet c;
      c.triplet_id = j.at("id").get<std::string>();
      c.image_id = j.at("image_id").get<std::string>();
      c.question = j.at("question").get<std::string>();
      c.candidates = j.at("candidates").get<std::vector<std::string>>();
      c.target_index = j.at("target_index").get<std::size_t>();
      for (const auto& p : j.at("provenance")) c.provenance.push_back(parse_provenance(p.get<std::string>()));
      if (j.contains("slots")) {
        for (const auto& p : j.at("slots")) c.slots.push_back(parse_provenance(p.get<std::string>()));
      } else {
        c.slots = c.provenance;
      }
      c.split = parse_split(j.value("split", std::string("train")));
      c.mode = parse_candidate_mode(j.value("mode", std::string("orig")));
      if (j.contains("human_answers")) c.human_answers = j.at("human_answers").get<std::vector<std::string>>();
      if (c.target_index >= c.candidates.size() || c.provenance.size() != c.candidates.size() ||
          c.slots.size() != c.candidates.size()) {
        throw Error("candidates.malformed", "inconsistent candidate, provenance or target_index sizes");
      }
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw Error("candidates.malformed", "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what(), e.field());
    }
  }
  return out;
}

std::vector<CandidateSet> read_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io.open", "cannot open '" + path + "'", path);
  return read_candidates(in);
}

namespace {

json stats_json(const ProcedureStats& s, std::size_t records) {
  return {{"examined", s.examined},
          {"accepted", s.accepted},
          {"rejected", {{"containment", s.rejected_containment}, {"wup", s.rejected_wup}, {"mutual", s.rejected_mutual}}},
          {"shortfall_records", s.shortfall_records},
          {"shortfall_rate", records ? static_cast<double>(s.shortfall_records) / static_cast<double>(records) : 0.0},
          {"fallback_slots", s.fallback_slots}};
}

}  // namespace

std::string report_json(const GenerationReport& report, CandidateMode mode, const DecoyGenConfig& cfg) {
  json j = {{"schema_version", 1},
            {"mode", to_string(mode)},
            {"config",
             {{"k", cfg.k},
              {"topn", cfg.topn},
              {"threshold", cfg.wup_threshold},
              {"seed", cfg.seed},
              {"fallback", to_string(cfg.fallback)}}},
            {"records", report.records},
            {"qou", stats_json(report.qou, report.records)},
            {"iou", stats_json(report.iou, report.records)},
            {"fallback",
             {{"orig_decoys", report.fallback_orig},
              {"frequent_targets", report.fallback_frequent},
              {"global_vocabulary", report.fallback_global}}},
            {"duplicates_removed", report.duplicates_removed}};
  return j.dump(2);
}

}  // namespace decoyforge
