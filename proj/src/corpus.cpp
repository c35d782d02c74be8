#include "fgkf/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fgkf/common.hpp"

namespace fgkf {

std::string scheme_kind_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::bmes: return "bmes";
    case SchemeKind::bio: return "bio";
    case SchemeKind::plain: return "plain";
  }
  return "?";
}

TagScheme::TagScheme(SchemeKind kind, std::vector<std::string> labels)
    : kind_(kind), labels_(std::move(labels)) {
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    if (!by_name_.emplace(labels_[i], i).second)
      throw DataError("duplicate tag label: " + labels_[i]);
  }
}

TagScheme TagScheme::bmes() { return TagScheme(SchemeKind::bmes, {"B", "M", "E", "S"}); }

TagScheme TagScheme::bio(const std::vector<std::string>& types) {
  std::vector<std::string> labels = {"O"};
  for (const auto& t : types) {
    labels.push_back("B-" + t);
    labels.push_back("I-" + t);
  }
  return TagScheme(SchemeKind::bio, std::move(labels));
}

TagScheme TagScheme::plain(const std::vector<std::string>& labels) {
  if (labels.empty()) throw DataError("plain scheme needs at least one label");
  return TagScheme(SchemeKind::plain, labels);
}

int TagScheme::id(const std::string& label) const {
  auto it = by_name_.find(label);
  return it == by_name_.end() ? -1 : it->second;
}

bool TagScheme::legal_start(int id) const {
  switch (kind_) {
    case SchemeKind::bmes:
      return id == 0 || id == 3;  // B or S
    case SchemeKind::bio:
      return id == 0 || id % 2 == 1;  // O or B-*
    case SchemeKind::plain:
      return true;
  }
  return true;
}

bool TagScheme::legal_transition(int from, int to) const {
  switch (kind_) {
    case SchemeKind::bmes: {
      // B,M continue a word (M/E); E,S may only be followed by a word start.
      bool from_open = from == 0 || from == 1;
      bool to_inside = to == 1 || to == 2;
      return from_open == to_inside;
    }
    case SchemeKind::bio: {
      if (to == 0 || to % 2 == 1) return true;  // O and B-* follow anything
      int need_type = (to - 1) / 2;
      if (from == 0) return false;
      return (from - 1) / 2 == need_type;  // I-t needs B-t or I-t
    }
    case SchemeKind::plain:
      return true;
  }
  return true;
}

size_t Corpus::token_count() const {
  size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

LoadReport load_column_corpus(const std::string& path, const TagScheme& scheme,
                              Domain domain, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);

  LoadReport report;
  report.corpus.domain = domain;
  report.corpus.split = split;

  TaggedSentence cur;
  cur.domain = domain;
  int first_line = 0;

  auto flush = [&](int end_line) {
    if (cur.tokens.empty()) return;
    std::ostringstream where;
    if (!scheme.legal_start(cur.tags.front())) {
      report.warnings.push_back(path + ":" + std::to_string(first_line) +
                                ": sentence starts with " + scheme.label(cur.tags.front()));
    }
    for (size_t i = 1; i < cur.tags.size(); ++i) {
      if (!scheme.legal_transition(cur.tags[i - 1], cur.tags[i])) {
        report.warnings.push_back(path + ":" + std::to_string(first_line + static_cast<int>(i)) +
                                  ": illegal transition " + scheme.label(cur.tags[i - 1]) +
                                  " -> " + scheme.label(cur.tags[i]));
      }
    }
    if (scheme.kind() == SchemeKind::bmes) {
      int last = cur.tags.back();
      if (last == 0 || last == 1) {
        report.warnings.push_back(path + ":" + std::to_string(end_line - 1) +
                                  ": sentence ends with " + scheme.label(last));
      }
    }
    report.corpus.sentences.push_back(std::move(cur));
    cur = TaggedSentence{};
    cur.domain = domain;
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush(lineno);
      continue;
    }
    std::istringstream fields(line);
    std::string token, tag, extra;
    fields >> token >> tag;
    if (tag.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": expected token and tag columns");
    while (fields >> extra) tag = extra;  // last column is the tag
    int id = scheme.id(tag);
    if (id < 0)
      throw DataError(path + ":" + std::to_string(lineno) + ": unknown tag '" + tag +
                      "' for " + scheme_kind_name(scheme.kind()) + " scheme");
    if (cur.tokens.empty()) first_line = lineno;
    cur.tokens.push_back(token);
    cur.tags.push_back(id);
  }
  flush(lineno + 1);
  if (report.corpus.sentences.empty()) throw DataError("empty corpus: " + path);
  return report;
}

void write_column_corpus(const Corpus& corpus, const TagScheme& scheme,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& s : corpus.sentences) {
    for (size_t i = 0; i < s.tokens.size(); ++i)
      out << s.tokens[i] << '\t' << scheme.label(s.tags[i]) << '\n';
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

Vocabulary Vocabulary::build(std::span<const Corpus* const> corpora) {
  std::map<std::string, long long> freq;
  for (const Corpus* c : corpora)
    for (const auto& s : c->sentences)
      for (const auto& tok : s.tokens) ++freq[tok];

  std::vector<std::pair<std::string, long long>> order(freq.begin(), freq.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.tokens_ = {"<pad>", "<unk>"};
  for (auto& [tok, n] : order) v.tokens_.push_back(tok);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
  return v;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<Span> extract_spans(std::span<const int> tags, const TagScheme& scheme) {
  std::vector<Span> spans;
  int n = static_cast<int>(tags.size());
  switch (scheme.kind()) {
    case SchemeKind::bmes: {
      int open = -1;
      for (int t = 0; t < n; ++t) {
        int tag = tags[t];
        if (tag == 0) {  // B
          if (open >= 0) spans.push_back({open, t - open, -1});
          open = t;
        } else if (tag == 1) {  // M: continues, or opens when stray
          if (open < 0) open = t;
        } else if (tag == 2) {  // E
          if (open < 0) open = t;
          spans.push_back({open, t - open + 1, -1});
          open = -1;
        } else {  // S
          if (open >= 0) spans.push_back({open, t - open, -1});
          spans.push_back({t, 1, -1});
          open = -1;
        }
      }
      if (open >= 0) spans.push_back({open, n - open, -1});
      break;
    }
    case SchemeKind::bio: {
      int open = -1, type = -1;
      for (int t = 0; t < n; ++t) {
        int tag = tags[t];
        if (tag == 0) {
          if (open >= 0) spans.push_back({open, t - open, type});
          open = -1;
        } else {
          int tag_type = (tag - 1) / 2;
          bool begins = tag % 2 == 1;
          if (open >= 0 && !begins && tag_type == type) continue;
          if (open >= 0) spans.push_back({open, t - open, type});
          open = t;
          type = tag_type;
        }
      }
      if (open >= 0) spans.push_back({open, n - open, type});
      break;
    }
    case SchemeKind::plain:
      throw DataError("plain tag scheme has no spans");
  }
  return spans;
}

std::vector<int> spans_to_tags(std::span<const Span> spans, int n, const TagScheme& scheme) {
  std::vector<int> tags;
  switch (scheme.kind()) {
    case SchemeKind::bmes: {
      tags.assign(n, 3);  // default S for uncovered positions
      for (const auto& sp : spans) {
        if (sp.len == 1) {
          tags[sp.start] = 3;
        } else {
          tags[sp.start] = 0;
          for (int t = sp.start + 1; t < sp.start + sp.len - 1; ++t) tags[t] = 1;
          tags[sp.start + sp.len - 1] = 2;
        }
      }
      break;
    }
    case SchemeKind::bio: {
      tags.assign(n, 0);
      for (const auto& sp : spans) {
        tags[sp.start] = 1 + 2 * sp.type;
        for (int t = sp.start + 1; t < sp.start + sp.len; ++t) tags[t] = 2 + 2 * sp.type;
      }
      break;
    }
    case SchemeKind::plain:
      throw DataError("plain tag scheme has no spans");
  }
  return tags;
}

std::vector<std::string> span_surfaces(const TaggedSentence& s, const TagScheme& scheme) {
  std::vector<std::string> out;
  for (const auto& sp : extract_spans(s.tags, scheme)) {
    std::string surface = s.tokens[sp.start];
    for (int t = sp.start + 1; t < sp.start + sp.len; ++t) surface += " " + s.tokens[t];
    out.push_back(std::move(surface));
  }
  return out;
}

std::set<std::string> oov_lexicon(std::span<const Corpus* const> train_corpora,
                                  const Corpus& test, const TagScheme& scheme) {
  if (!scheme.has_spans()) throw DataError("segment lexicon is undefined for plain schemes");
  std::set<std::string> seen;
  for (const Corpus* c : train_corpora)
    for (const auto& s : c->sentences)
      for (auto& surface : span_surfaces(s, scheme)) seen.insert(std::move(surface));
  std::set<std::string> oov;
  for (const auto& s : test.sentences)
    for (auto& surface : span_surfaces(s, scheme))
      if (!seen.count(surface)) oov.insert(std::move(surface));
  return oov;
}

}  // namespace fgkf
