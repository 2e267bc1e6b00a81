#ifndef CWI_CORPUS_HPP
#define CWI_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwi/language.hpp"
#include "json.hpp"

namespace cwi {

// One annotated target span inside a sentence. Offsets are byte offsets into
// `sentence`, end exclusive.
struct Instance {
  std::string hit_id;
  std::string sentence;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string target;
  int n_native = 0;
  int n_nonnative = 0;
  int n_native_complex = 0;
  int n_nonnative_complex = 0;
  int binary_label = 0;  // 1 = complex
  double prob_label = 0.0;

  // Provenance. Survives merging so mixed training sets stay auditable.
  Language language = Language::kEN;
  Genre genre = Genre::kWikipedia;
  std::size_t line = 0;  // 1-based source line, 0 when not parsed from a file

  bool operator==(const Instance&) const = default;
};

struct Corpus {
  Language language = Language::kEN;
  Genre genre = Genre::kWikipedia;
  Split split = Split::kTrain;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
};

// Throws ValidationError naming the first offending hit_id. Checks the
// Instance invariants and that French only appears as test data.
void validate(const Corpus& corpus);

// Reads the shared-task TSV: 11 tab-separated fields per line, no header.
// Offsets are byte offsets; records whose offsets only line up when read as
// code-point offsets are converted to bytes. Label/annotator disagreements
// are appended to `warnings` when given.
Corpus parse_tsv(std::istream& in, Language language, Genre genre,
                 Split split, std::vector<std::string>* warnings = nullptr);

void write_tsv(std::ostream& out, const Corpus& corpus);

struct PreprocessResult {
  Corpus corpus;
  std::size_t dropped = 0;
  std::size_t sentences_changed = 0;
};

// Removes U+FFFD, invalid UTF-8 and control characters (tab, newline and
// carriage return become spaces), collapses whitespace runs to one space and
// trims both ends. Offsets are remapped; instances whose span contained a
// removed character are dropped.
PreprocessResult preprocess(const Corpus& corpus);

// Concatenation; every input must share the same split. Language and genre
// become kMixed unless all inputs agree.
Corpus merge(std::span<const Corpus> corpora);

// Seeded uniform subset of exactly k instances, kept in corpus order.
Corpus sample_shots(const Corpus& corpus, std::size_t k, std::uint64_t seed);

struct CorpusStats {
  std::size_t complex = 0;
  std::size_t noncomplex = 0;
  std::size_t instances = 0;

  CorpusStats& operator+=(const CorpusStats& other);
  bool operator==(const CorpusStats&) const = default;
};

CorpusStats stats(const Corpus& corpus);

// {schema_version, language, genre, split, complex, noncomplex, instances}
nlohmann::json stats_json(const Corpus& corpus);

struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

// Whitespace split, then punctuation detached as single-character tokens.
// A hyphen between two word characters stays inside the word.
std::vector<Token> tokenize(std::string_view sentence);

struct TokenSequence {
  std::size_t sentence_id = 0;
  Language language = Language::kEN;
  std::string sentence;
  std::vector<Token> tokens;
  std::vector<int> labels;
  // corpus instance index -> indices of the tokens its span overlaps
  std::map<std::size_t, std::vector<std::size_t>> instance_refs;
};

// One sequence per distinct (language, sentence), in first-seen order. A
// token is labelled 1 iff a complex instance span overlaps it.
std::vector<TokenSequence> to_sequences(const Corpus& corpus);

// Locates shared-task files named "<Collection>_<Split>.tsv" (e.g.
// "News_Train.tsv", "French_Test.tsv") anywhere below a root directory.
class DataLayout {
 public:
  explicit DataLayout(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // Throws MissingResourceError when the file does not exist.
  std::filesystem::path path_for(Target target, Split split) const;
  bool has(Target target, Split split) const;

  // Parsed and preprocessed corpus for one collection.
  Corpus load(Target target, Split split) const;

  // All collections of a language for a split; English concatenates its
  // three genres.
  Corpus load_language(Language language, Split split) const;

 private:
  std::filesystem::path root_;
  std::map<std::string, std::filesystem::path> files_;
};

}  // namespace cwi

#endif  // CWI_CORPUS_HPP
