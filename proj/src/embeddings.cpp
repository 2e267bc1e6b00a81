#include "cwi/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

#include "cwi/error.hpp"
#include "cwi/utf8.hpp"

namespace cwi {

EmbeddingTable::EmbeddingTable(Language language, std::size_t dim)
    : language_(language), dim_(dim), zeros_(dim, 0.0f) {}

bool EmbeddingTable::add(std::string word, std::span<const float> values) {
  if (values.size() != dim_) {
    throw ValidationError("vector for '" + word + "' has " +
                          std::to_string(values.size()) + " values, expected " +
                          std::to_string(dim_));
  }
  if (index_.count(word) != 0) return false;
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  data_.insert(data_.end(), values.begin(), values.end());
  return true;
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view word) const {
  const auto found = index_.find(std::string(word));
  if (found == index_.end()) return std::nullopt;
  return found->second;
}

EmbeddingTable EmbeddingTable::head(std::size_t n) const {
  EmbeddingTable out(language_, dim_);
  const std::size_t count = std::min(n, size());
  for (std::size_t i = 0; i < count; ++i) out.add(words_[i], row(i));
  for (std::size_t z : zero_rows_) {
    if (z < count) out.zero_rows_.push_back(z);
  }
  return out;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  return language_ == other.language_ && dim_ == other.dim_ &&
         words_ == other.words_ && data_ == other.data_;
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
    parts.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return parts;
}

template <typename T>
bool parse_value(std::string_view text, T& value) {
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

EmbeddingTable load_text_format(std::istream& in, std::size_t max_vocab,
                                Language language, LoadReport* report) {
  if (max_vocab == 0) throw ValidationError("max_vocab must be positive");
  std::string raw;
  if (!std::getline(in, raw)) throw ParseError("missing .vec header", 1);
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();
  const auto header = split_spaces(raw);
  std::size_t declared = 0;
  std::size_t dim = 0;
  if (header.size() != 2 || !parse_value(header[0], declared) ||
      !parse_value(header[1], dim) || dim == 0) {
    throw ParseError("header must be 'vocab_size dim', got '" + raw + "'", 1);
  }

  EmbeddingTable table(language, dim);
  std::vector<float> values(dim);
  std::size_t line_no = 1;
  LoadReport local;
  LoadReport& rep = report != nullptr ? *report : local;
  while (table.size() < max_vocab && std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto parts = split_spaces(line);
    if (parts.empty()) continue;
    if (parts.size() != dim + 1) {
      throw ParseError("expected " + std::to_string(dim) + " values, found " +
                           std::to_string(parts.size() - 1),
                       line_no);
    }
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_value(parts[i + 1], values[i])) {
        throw ParseError("non-numeric value '" + std::string(parts[i + 1]) + "'",
                         line_no);
      }
    }
    if (!table.add(std::string(parts[0]), values)) {
      ++rep.duplicates;
      rep.warnings.push_back("line " + std::to_string(line_no) +
                             ": duplicate word '" + std::string(parts[0]) +
                             "' ignored");
    }
  }
  rep.rows_loaded = table.size();
  return table;
}

EmbeddingTable load_vec_file(const std::filesystem::path& path,
                             std::size_t max_vocab, Language language,
                             LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw MissingResourceError("cannot open embeddings '" + path.string() + "'");
  try {
    return load_text_format(in, max_vocab, language, report);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text_format(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dim() << '\n';
  char buffer[32];
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.word(r);
    for (float v : table.row(r)) {
      const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
      out << ' ';
      out.write(buffer, ptr - buffer);
    }
    out << '\n';
  }
}

void write_vec_file(const std::filesystem::path& path,
                    const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw MissingResourceError("cannot write '" + path.string() + "'");
  write_text_format(out, table);
}

LookupResult lookup(const EmbeddingTable& table, std::string_view token) {
  if (auto rank = table.find(token)) return {table.row(*rank), false};
  if (auto rank = table.find(utf8::to_lower(token))) return {table.row(*rank), false};
  return {std::span<const float>(table.zeros_), true};
}

EmbeddingTable normalize(const EmbeddingTable& table) {
  EmbeddingTable out = table;
  out.zero_rows_.clear();
  const std::size_t dim = table.dim();
  for (std::size_t r = 0; r < table.size(); ++r) {
    float* row = out.data_.data() + r * dim;
    double sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) sq += double(row[i]) * double(row[i]);
    if (sq == 0.0) {
      out.zero_rows_.push_back(r);
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < dim; ++i) {
      row[i] = static_cast<float>(double(row[i]) * inv);
    }
  }
  return out;
}

}  // namespace cwi
