#include "cwi/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <system_error>
#include <utility>

#include "cwi/error.hpp"
#include "cwi/random.hpp"
#include "cwi/utf8.hpp"

namespace cwi {

namespace {

constexpr std::size_t kFieldCount = 11;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t tab = line.find('\t', begin);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(begin));
      return fields;
    }
    fields.push_back(line.substr(begin, tab - begin));
    begin = tab + 1;
  }
}

template <typename T>
T parse_number(std::string_view field, std::string_view name,
               std::size_t line) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("field '" + std::string(name) + "' is not numeric: '" +
                         std::string(field) + "'",
                     line);
  }
  return value;
}

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

[[noreturn]] void invalid(const Instance& instance, const std::string& what) {
  std::string message = "instance '" + instance.hit_id + "'";
  if (instance.line != 0) message += " (line " + std::to_string(instance.line) + ")";
  throw ValidationError(message + ": " + what);
}

void validate_instance(const Instance& in) {
  if (!(in.start < in.end)) invalid(in, "start must be < end");
  if (in.end > in.sentence.size()) invalid(in, "end is past the sentence");
  if (std::string_view(in.sentence).substr(in.start, in.end - in.start) !=
      in.target) {
    invalid(in, "sentence[start..end] does not equal target '" + in.target + "'");
  }
  if (in.n_native < 0 || in.n_nonnative < 0 || in.n_native_complex < 0 ||
      in.n_nonnative_complex < 0) {
    invalid(in, "negative annotator count");
  }
  if (in.n_native_complex > in.n_native) {
    invalid(in, "more native complex votes than native annotators");
  }
  if (in.n_nonnative_complex > in.n_nonnative) {
    invalid(in, "more non-native complex votes than non-native annotators");
  }
  if (in.binary_label != 0 && in.binary_label != 1) {
    invalid(in, "binary label must be 0 or 1");
  }
  if (!(in.prob_label >= 0.0 && in.prob_label <= 1.0)) {
    invalid(in, "probabilistic label outside [0,1]");
  }
}

// Offsets in the released files are sometimes code-point based. Accepts
// byte offsets first and falls back to converting code-point offsets.
void resolve_offsets(Instance& in) {
  const std::string_view sentence(in.sentence);
  if (in.start < in.end && in.end <= sentence.size() &&
      sentence.substr(in.start, in.end - in.start) == in.target) {
    return;
  }
  const auto start = utf8::byte_offset_of_codepoint(sentence, in.start);
  const auto end = utf8::byte_offset_of_codepoint(sentence, in.end);
  if (start && end && *start < *end &&
      sentence.substr(*start, *end - *start) == in.target) {
    in.start = *start;
    in.end = *end;
  }
}

enum class CharClass { kKeep, kSpace, kRemove };

CharClass classify(const utf8::Decoded& d) {
  if (!d.valid || d.codepoint == 0xFFFD) return CharClass::kRemove;
  if (d.codepoint == ' ' || d.codepoint == '\t' || d.codepoint == '\n') {
    return CharClass::kSpace;
  }
  if (d.codepoint < 0x20 || d.codepoint == 0x7F ||
      (d.codepoint >= 0x80 && d.codepoint <= 0x9F)) {
    return CharClass::kRemove;
  }
  return CharClass::kKeep;
}

struct CleanedSentence {
  std::string text;
  std::vector<std::size_t> position;  // old byte offset -> new offset
  std::vector<bool> removed;          // old byte belonged to a removed char
};

CleanedSentence clean(std::string_view sentence) {
  CleanedSentence out;
  out.position.assign(sentence.size() + 1, 0);
  out.removed.assign(sentence.size(), false);
  std::size_t pos = 0;
  while (pos < sentence.size()) {
    const utf8::Decoded d = utf8::decode(sentence, pos);
    for (std::size_t i = 0; i < d.length; ++i) {
      out.position[pos + i] = out.text.size();
    }
    switch (classify(d)) {
      case CharClass::kRemove:
        std::fill_n(out.removed.begin() + static_cast<std::ptrdiff_t>(pos),
                    d.length, true);
        break;
      case CharClass::kSpace:
        if (!out.text.empty() && out.text.back() != ' ') out.text.push_back(' ');
        break;
      case CharClass::kKeep:
        out.text.append(sentence.substr(pos, d.length));
        break;
    }
    pos += d.length;
  }
  out.position[sentence.size()] = out.text.size();
  if (!out.text.empty() && out.text.back() == ' ') out.text.pop_back();
  for (auto& p : out.position) p = std::min(p, out.text.size());
  return out;
}

}  // namespace

void validate(const Corpus& corpus) {
  if (corpus.language == Language::kFR && corpus.split != Split::kTest) {
    throw ValidationError("French data exists only as a test split");
  }
  for (const auto& instance : corpus.instances) {
    if (instance.language == Language::kFR && corpus.split != Split::kTest) {
      invalid(instance, "French instance outside a test split");
    }
    validate_instance(instance);
  }
}

Corpus parse_tsv(std::istream& in, Language language, Genre genre,
                 Split split, std::vector<std::string>* warnings) {
  Corpus corpus;
  corpus.language = language;
  corpus.genre = genre;
  corpus.split = split;
  if (language == Language::kFR && split != Split::kTest) {
    throw ValidationError("French data exists only as a test split");
  }

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto fields = split_tabs(line);
    if (fields.size() != kFieldCount) {
      throw ParseError("expected 11 tab-separated fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Instance instance;
    instance.hit_id = std::string(fields[0]);
    instance.sentence = std::string(fields[1]);
    instance.start = parse_number<std::size_t>(fields[2], "start", line_no);
    instance.end = parse_number<std::size_t>(fields[3], "end", line_no);
    instance.target = std::string(fields[4]);
    instance.n_native = parse_number<int>(fields[5], "n_native", line_no);
    instance.n_nonnative = parse_number<int>(fields[6], "n_nonnative", line_no);
    instance.n_native_complex =
        parse_number<int>(fields[7], "n_native_complex", line_no);
    instance.n_nonnative_complex =
        parse_number<int>(fields[8], "n_nonnative_complex", line_no);
    instance.binary_label = parse_number<int>(fields[9], "binary_label", line_no);
    instance.prob_label = parse_number<double>(fields[10], "prob_label", line_no);
    instance.language = language;
    instance.genre = genre;
    instance.line = line_no;

    resolve_offsets(instance);
    validate_instance(instance);

    if (warnings != nullptr) {
      const bool any_vote =
          instance.n_native_complex + instance.n_nonnative_complex > 0;
      if (any_vote != (instance.binary_label == 1)) {
        warnings->push_back("line " + std::to_string(line_no) + ": instance '" +
                            instance.hit_id +
                            "' binary label disagrees with annotator votes");
      }
    }
    corpus.instances.push_back(std::move(instance));
  }
  return corpus;
}

void write_tsv(std::ostream& out, const Corpus& corpus) {
  for (const auto& in : corpus.instances) {
    out << in.hit_id << '\t' << in.sentence << '\t' << in.start << '\t'
        << in.end << '\t' << in.target << '\t' << in.n_native << '\t'
        << in.n_nonnative << '\t' << in.n_native_complex << '\t'
        << in.n_nonnative_complex << '\t' << in.binary_label << '\t'
        << format_double(in.prob_label) << '\n';
  }
}

PreprocessResult preprocess(const Corpus& corpus) {
  PreprocessResult result;
  result.corpus.language = corpus.language;
  result.corpus.genre = corpus.genre;
  result.corpus.split = corpus.split;
  result.corpus.instances.reserve(corpus.size());

  // Instances of one sentence are usually adjacent; reuse the cleaning.
  std::string_view cached_sentence;
  CleanedSentence cleaned;
  bool have_cache = false;

  for (const auto& instance : corpus.instances) {
    if (!have_cache || instance.sentence != cached_sentence) {
      cleaned = clean(instance.sentence);
      cached_sentence = instance.sentence;
      have_cache = true;
      if (cleaned.text != instance.sentence) ++result.sentences_changed;
    }
    const bool span_damaged = std::any_of(
        cleaned.removed.begin() + static_cast<std::ptrdiff_t>(instance.start),
        cleaned.removed.begin() + static_cast<std::ptrdiff_t>(instance.end),
        [](bool r) { return r; });
    std::size_t start = cleaned.position[instance.start];
    std::size_t end = cleaned.position[instance.end];
    while (start < end && cleaned.text[start] == ' ') ++start;
    while (end > start && cleaned.text[end - 1] == ' ') --end;
    if (span_damaged || start >= end) {
      ++result.dropped;
      continue;
    }
    Instance out = instance;
    out.sentence = cleaned.text;
    out.start = start;
    out.end = end;
    out.target = cleaned.text.substr(start, end - start);
    result.corpus.instances.push_back(std::move(out));
  }
  return result;
}

Corpus merge(std::span<const Corpus> corpora) {
  Corpus merged;
  if (corpora.empty()) {
    merged.language = Language::kMixed;
    merged.genre = Genre::kMixed;
    return merged;
  }
  merged.language = corpora.front().language;
  merged.genre = corpora.front().genre;
  merged.split = corpora.front().split;
  std::size_t total = 0;
  for (const auto& c : corpora) {
    if (c.split != merged.split) {
      throw ValidationError("cannot merge corpora with different splits (" +
                            std::string(to_string(merged.split)) + " vs " +
                            std::string(to_string(c.split)) + ")");
    }
    if (c.language != merged.language) merged.language = Language::kMixed;
    if (c.genre != merged.genre) merged.genre = Genre::kMixed;
    total += c.size();
  }
  merged.instances.reserve(total);
  for (const auto& c : corpora) {
    merged.instances.insert(merged.instances.end(), c.instances.begin(),
                            c.instances.end());
  }
  return merged;
}

Corpus sample_shots(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (k > corpus.size()) {
    throw ValidationError("cannot sample " + std::to_string(k) +
                          " instances from a corpus of " +
                          std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, order.size() - i);
    std::swap(order[i], order[j]);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());

  Corpus sample;
  sample.language = corpus.language;
  sample.genre = corpus.genre;
  sample.split = corpus.split;
  sample.instances.reserve(k);
  for (std::size_t index : order) sample.instances.push_back(corpus.instances[index]);
  return sample;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& other) {
  complex += other.complex;
  noncomplex += other.noncomplex;
  instances += other.instances;
  return *this;
}

CorpusStats stats(const Corpus& corpus) {
  CorpusStats s;
  for (const auto& instance : corpus.instances) {
    if (instance.binary_label == 1) {
      ++s.complex;
    } else {
      ++s.noncomplex;
    }
  }
  s.instances = corpus.size();
  return s;
}

nlohmann::json stats_json(const Corpus& corpus) {
  const CorpusStats s = stats(corpus);
  return {{"schema_version", 1},
          {"language", to_string(corpus.language)},
          {"genre", to_string(corpus.genre)},
          {"split", to_string(corpus.split)},
          {"complex", s.complex},
          {"noncomplex", s.noncomplex},
          {"instances", s.instances}};
}

std::vector<TokenSequence> to_sequences(const Corpus& corpus) {
  std::vector<TokenSequence> sequences;
  std::map<std::pair<Language, std::string_view>, std::size_t> by_sentence;

  for (std::size_t index = 0; index < corpus.size(); ++index) {
    const Instance& instance = corpus.instances[index];
    const auto key = std::make_pair(instance.language,
                                    std::string_view(instance.sentence));
    auto found = by_sentence.find(key);
    if (found == by_sentence.end()) {
      TokenSequence seq;
      seq.sentence_id = sequences.size();
      seq.language = instance.language;
      seq.sentence = instance.sentence;
      seq.tokens = tokenize(seq.sentence);
      seq.labels.assign(seq.tokens.size(), 0);
      sequences.push_back(std::move(seq));
      found = by_sentence.emplace(key, sequences.size() - 1).first;
    }
    TokenSequence& seq = sequences[found->second];
    std::vector<std::size_t> covered;
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
      const Token& token = seq.tokens[t];
      if (token.start < instance.end && instance.start < token.end) {
        covered.push_back(t);
        if (instance.binary_label == 1) seq.labels[t] = 1;
      }
    }
    if (covered.empty()) {
      invalid(instance, "span overlaps no token");
    }
    seq.instance_refs.emplace(index, std::move(covered));
  }
  return sequences;
}

DataLayout::DataLayout(std::filesystem::path root) : root_(std::move(root)) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root_)) {
    throw MissingResourceError("data root '" + root_.string() +
                               "' is not a directory");
  }
  std::vector<fs::path> candidates;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsv") {
      candidates.push_back(entry.path());
    }
  }
  std::sort(candidates.begin(), candidates.end());
  for (const auto& path : candidates) {
    std::string name = path.filename().string();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    files_.emplace(name, path);  // first in sorted order wins
  }
}

namespace {

std::string file_key(Target target, Split split) {
  std::string key = std::string(collection_name(target)) + "_" +
                    std::string(to_string(split)) + ".tsv";
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return key;
}

}  // namespace

bool DataLayout::has(Target target, Split split) const {
  return files_.count(file_key(target, split)) != 0;
}

std::filesystem::path DataLayout::path_for(Target target, Split split) const {
  const auto found = files_.find(file_key(target, split));
  if (found == files_.end()) {
    throw MissingResourceError(
        "no " + std::string(collection_name(target)) + "_" +
        std::string(to_string(split)) + ".tsv below '" + root_.string() + "'");
  }
  return found->second;
}

Corpus DataLayout::load(Target target, Split split) const {
  const auto path = path_for(target, split);
  std::ifstream in(path);
  if (!in) throw MissingResourceError("cannot open '" + path.string() + "'");
  try {
    const Corpus parsed =
        parse_tsv(in, language_of(target), genre_of(target), split);
    return preprocess(parsed).corpus;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Corpus DataLayout::load_language(Language language, Split split) const {
  std::vector<Corpus> parts;
  for (Target target : kAllTargets) {
    if (language_of(target) == language) parts.push_back(load(target, split));
  }
  if (parts.empty()) {
    throw ValidationError("no collections for language " +
                          std::string(to_string(language)));
  }
  return merge(parts);
}

}  // namespace cwi
