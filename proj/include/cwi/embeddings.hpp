#ifndef CWI_EMBEDDINGS_HPP
#define CWI_EMBEDDINGS_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cwi/language.hpp"

namespace cwi {

inline constexpr std::size_t kDefaultMaxVocab = 200000;

struct LookupResult {
  std::span<const float> values;  // always dim() long
  bool oov = false;
};

// Word -> vector map for one language. Rows are kept in load order, so the
// row index doubles as the frequency rank (fastText files are sorted by
// frequency). Storage is float; numerical code widens to double.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Language language, std::size_t dim);

  // Appends a row. Returns false (and stores nothing) for a duplicate word.
  // Throws ValidationError on a length mismatch.
  bool add(std::string word, std::span<const float> values);

  Language language() const { return language_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  const std::string& word(std::size_t rank) const { return words_[rank]; }
  const std::vector<std::string>& words() const { return words_; }
  std::span<const float> row(std::size_t rank) const {
    return {data_.data() + rank * dim_, dim_};
  }
  // Row-major, size() x dim().
  const std::vector<float>& data() const { return data_; }

  // Exact-match rank.
  std::optional<std::size_t> find(std::string_view word) const;

  // Ranks of rows that were all-zero when the table was normalized.
  const std::vector<std::size_t>& zero_rows() const { return zero_rows_; }

  // The first n rows (all rows when n >= size()).
  EmbeddingTable head(std::size_t n) const;

  bool operator==(const EmbeddingTable& other) const;

 private:
  friend EmbeddingTable normalize(const EmbeddingTable& table);
  friend LookupResult lookup(const EmbeddingTable& table,
                             std::string_view token);

  Language language_ = Language::kEN;
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> zero_rows_;
  std::vector<float> zeros_;  // backing store for OOV lookups
};

struct LoadReport {
  std::size_t rows_loaded = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> warnings;
};

// fastText .vec text: header "vocab_size dim", then "word v1 ... v_dim".
// Loads the first max_vocab distinct words. A row with the wrong number of
// values is a ParseError carrying its line number; duplicate words keep the
// first occurrence and add a warning.
EmbeddingTable load_text_format(std::istream& in, std::size_t max_vocab,
                                Language language,
                                LoadReport* report = nullptr);

EmbeddingTable load_vec_file(const std::filesystem::path& path,
                             std::size_t max_vocab, Language language,
                             LoadReport* report = nullptr);

// Writes the same format back (shortest round-trip float formatting).
void write_text_format(std::ostream& out, const EmbeddingTable& table);
void write_vec_file(const std::filesystem::path& path,
                    const EmbeddingTable& table);

// Exact match, then lowercased match, then a zero vector flagged as OOV.
LookupResult lookup(const EmbeddingTable& table, std::string_view token);

// Unit L2 norm per row. All-zero rows are left as they are and recorded in
// zero_rows().
EmbeddingTable normalize(const EmbeddingTable& table);

}  // namespace cwi

#endif  // CWI_EMBEDDINGS_HPP
