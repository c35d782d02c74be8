#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fgkf {

enum class SchemeKind { bmes, bio, plain };

std::string scheme_kind_name(SchemeKind kind);

// Positional tag scheme: label inventory plus the transition legality used
// for load-time warnings and span extraction.
class TagScheme {
 public:
  static TagScheme bmes();
  static TagScheme bio(const std::vector<std::string>& types);
  static TagScheme plain(const std::vector<std::string>& labels);

  SchemeKind kind() const { return kind_; }
  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int id) const { return labels_[id]; }
  const std::vector<std::string>& labels() const { return labels_; }
  int id(const std::string& label) const;  // -1 when unknown
  bool legal_transition(int from, int to) const;
  bool legal_start(int id) const;
  bool has_spans() const { return kind_ != SchemeKind::plain; }

 private:
  TagScheme(SchemeKind kind, std::vector<std::string> labels);
  SchemeKind kind_;
  std::vector<std::string> labels_;
  std::map<std::string, int> by_name_;
};

enum class Domain : int8_t { source = 0, target = 1 };
enum class Split { train, dev, test };

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<int> tags;
  Domain domain = Domain::source;
};

struct Corpus {
  std::vector<TaggedSentence> sentences;
  Domain domain = Domain::source;
  Split split = Split::train;

  size_t size() const { return sentences.size(); }
  size_t token_count() const;
};

// One token + tag per line, whitespace separated; blank line ends a
// sentence. CRLF and LF parse identically.
struct LoadReport {
  Corpus corpus;
  std::vector<std::string> warnings;  // illegal transitions, with line numbers
};
LoadReport load_column_corpus(const std::string& path, const TagScheme& scheme,
                              Domain domain = Domain::source, Split split = Split::train);
void write_column_corpus(const Corpus& corpus, const TagScheme& scheme,
                         const std::string& path);

// Token ids: 0 = padding, 1 = unknown, then training tokens ordered by
// frequency (descending) and lexicographically within ties.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  static Vocabulary build(std::span<const Corpus* const> corpora);
  static Vocabulary from_tokens(std::vector<std::string> tokens);  // id order, no pad/unk

  int size() const { return static_cast<int>(tokens_.size()); }
  int encode(const std::string& token) const;
  const std::string& token(int id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

// Contiguous labeled span; type is -1 for untyped (BMES) words.
struct Span {
  int start = 0;
  int len = 0;
  int type = -1;
  auto operator<=>(const Span&) const = default;
};

std::vector<Span> extract_spans(std::span<const int> tags, const TagScheme& scheme);
// Writes the tag sequence realizing `spans` over a length-n sentence.
std::vector<int> spans_to_tags(std::span<const Span> spans, int n, const TagScheme& scheme);

// Surface forms (joined tokens) of a sentence's gold spans.
std::vector<std::string> span_surfaces(const TaggedSentence& s, const TagScheme& scheme);

// Gold segments of the test set whose surface form never occurs as a gold
// segment in any training corpus. Undefined for plain schemes.
std::set<std::string> oov_lexicon(std::span<const Corpus* const> train_corpora,
                                  const Corpus& test, const TagScheme& scheme);

}  // namespace fgkf
