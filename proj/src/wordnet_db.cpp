// Reader for the WordNet database distribution (data.* / index.* files).
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "decoyforge/util.hpp"
#include "decoyforge/wordnet.hpp"

namespace decoyforge {

namespace {

struct DataFile {
  const char* data;
  const char* index;
  char pos;  // synset id suffix and lemma-index key
};

constexpr DataFile kFiles[] = {{"data.noun", "index.noun", 'n'}, {"data.adj", "index.adj", 'a'}};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Adjective lemmas may carry a syntactic marker such as "(a)" or "(ip)".
std::string strip_marker(std::string lemma) {
  if (!lemma.empty() && lemma.back() == ')') {
    if (auto open = lemma.rfind('('); open != std::string::npos) lemma.erase(open);
  }
  return lemma;
}

std::ifstream open_in(const std::string& dir, const char* file) {
  std::ifstream in(dir + "/" + file);
  if (!in) throw Error("io.open", "cannot open '" + dir + "/" + file + "'", file);
  return in;
}

struct ParsedSynset {
  SynsetSpec spec;
  char ss_type;
  std::string offset;
};

// One data line: offset lex_filenum ss_type w_cnt(hex) {word lex_id}...
// p_cnt {symbol offset pos source/target}... | gloss
ParsedSynset parse_data_line(const std::string& line, char file_pos, const char* file, std::size_t line_no) {
  std::istringstream ss(line.substr(0, line.find(" | ")));
  ParsedSynset out;
  std::string lex_filenum, ss_type, w_cnt_hex;
  if (!(ss >> out.offset >> lex_filenum >> ss_type >> w_cnt_hex) || ss_type.size() != 1) {
    throw Error("taxonomy.malformed", std::string(file) + " line " + std::to_string(line_no) + ": bad synset header");
  }
  out.ss_type = ss_type[0];
  const unsigned long w_cnt = std::stoul(w_cnt_hex, nullptr, 16);
  for (unsigned long i = 0; i < w_cnt; ++i) {
    std::string word, lex_id;
    if (!(ss >> word >> lex_id)) {
      throw Error("taxonomy.malformed", std::string(file) + " line " + std::to_string(line_no) + ": truncated words");
    }
    out.spec.lemmas.push_back(strip_marker(word));
  }
  std::size_t p_cnt = 0;
  ss >> p_cnt;
  for (std::size_t i = 0; i < p_cnt; ++i) {
    std::string symbol, target, pos, source_target;
    if (!(ss >> symbol >> target >> pos >> source_target)) {
      throw Error("taxonomy.malformed", std::string(file) + " line " + std::to_string(line_no) + ": truncated pointers");
    }
    // Hypernyms and instance hypernyms both lead upward.
    if ((symbol == "@" || symbol == "@i") && (pos == "n" || pos == "a" || pos == "s")) {
      out.spec.hypernym_ids.push_back(target + "-" + (pos == "n" ? 'n' : 'a'));
    }
  }
  out.spec.id = out.offset + "-" + file_pos;
  out.spec.pos = file_pos == 'n' ? PartOfSpeech::noun : PartOfSpeech::adj;
  return out;
}

}  // namespace

Taxonomy load_wordnet_db(const std::string& dir) {
  std::vector<ParsedSynset> parsed;
  std::unordered_map<std::string, std::size_t> by_id;

  for (const auto& f : kFiles) {
    auto in = open_in(dir, f.data);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == ' ') continue;  // license preamble
      auto synset = parse_data_line(line, f.pos, f.data, line_no);
      by_id.emplace(synset.spec.id, parsed.size());
      parsed.push_back(std::move(synset));
    }
  }

  // Sense names "lemma.pos.NN": NN is the synset's rank in the index entry
  // of its first lemma.
  for (const auto& f : kFiles) {
    auto in = open_in(dir, f.index);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == ' ') continue;
      std::istringstream ss(line);
      std::string lemma, pos;
      std::size_t synset_cnt = 0, p_cnt = 0;
      ss >> lemma >> pos >> synset_cnt >> p_cnt;
      std::string skip;
      for (std::size_t i = 0; i < p_cnt; ++i) ss >> skip;
      ss >> skip >> skip;  // sense_cnt, tagsense_cnt
      for (std::size_t rank = 1; rank <= synset_cnt; ++rank) {
        std::string offset;
        if (!(ss >> offset)) break;
        auto it = by_id.find(offset + "-" + f.pos);
        if (it == by_id.end()) continue;
        auto& synset = parsed[it->second];
        if (!synset.spec.name.empty() || synset.spec.lemmas.empty()) continue;
        if (lower(synset.spec.lemmas.front()) != lemma) continue;
        char buf[8];
        std::snprintf(buf, sizeof buf, "%02zu", rank);
        synset.spec.name = lemma + "." + synset.ss_type + "." + buf;
      }
    }
  }

  std::vector<SynsetSpec> specs;
  specs.reserve(parsed.size());
  for (auto& p : parsed) specs.push_back(std::move(p.spec));
  return Taxonomy::build(std::move(specs));
}

}  // namespace decoyforge
