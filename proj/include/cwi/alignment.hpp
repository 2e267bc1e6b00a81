#ifndef CWI_ALIGNMENT_HPP
#define CWI_ALIGNMENT_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cwi/embeddings.hpp"
#include "cwi/kernels.hpp"
#include "cwi/language.hpp"
#include "json.hpp"

namespace cwi {

// Word translation pairs (source word, target word).
class BilingualDictionary {
 public:
  BilingualDictionary() = default;
  BilingualDictionary(Language source, Language target)
      : source_language_(source), target_language_(target) {}

  // Returns false for a pair that is already present.
  bool add(std::string source, std::string target);

  Language source_language() const { return source_language_; }
  Language target_language() const { return target_language_; }
  const std::vector<std::pair<std::string, std::string>>& pairs() const {
    return pairs_;
  }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  // Lines that did not hold exactly two words while loading.
  std::size_t dropped_lines() const { return dropped_lines_; }

  BilingualDictionary reversed() const;

 private:
  friend BilingualDictionary load_dictionary(std::istream&, Language,
                                             Language);

  Language source_language_ = Language::kEN;
  Language target_language_ = Language::kEN;
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::set<std::pair<std::string, std::string>> seen_;
  std::size_t dropped_lines_ = 0;
};

// Two whitespace-separated words per line (MUSE ground-truth format).
// Multi-word and malformed lines are skipped and counted; duplicates are
// ignored.
BilingualDictionary load_dictionary(std::istream& in, Language source,
                                    Language target);
BilingualDictionary load_dictionary_file(const std::filesystem::path& path,
                                         Language source, Language target);

struct FitReport {
  std::size_t anchor_count = 0;
  std::size_t pairs_filtered = 0;  // dictionary pairs missing from a table
  double mean_cosine_after_fit = 0.0;
  double smallest_singular_value = 0.0;
  std::size_t refinement_iterations = 0;
  std::vector<std::size_t> anchors_per_iteration;
  std::vector<double> mean_cosine_per_iteration;
  bool stopped_early = false;
};

// Orthogonal map from a source space into a target space. Vectors are rows
// and map as v * W.
struct AlignmentMap {
  Eigen::MatrixXd w;
  Language source_language = Language::kEN;
  Language target_language = Language::kEN;
  FitReport report;

  std::size_t dim() const { return static_cast<std::size_t>(w.rows()); }
};

// max |W^T W - I|
double orthogonality_error(const Eigen::MatrixXd& w);

// Orthogonal Procrustes over dictionary pairs present in both (normalized)
// tables: with X, Y the stacked anchor rows and X^T Y = U S V^T, W = U V^T.
// Fewer than dim usable pairs throws NumericalError.
AlignmentMap procrustes_fit(const EmbeddingTable& source,
                            const EmbeddingTable& target,
                            const BilingualDictionary& dictionary);

// Same fit over explicit (source rank, target rank) anchors.
AlignmentMap procrustes_fit(const EmbeddingTable& source,
                            const EmbeddingTable& target,
                            std::span<const std::pair<std::size_t, std::size_t>> anchors);

// Maps one row and renormalizes it, rounding to float storage. Every mapped
// vector in the toolkit is produced by this function.
std::vector<float> map_row(const Eigen::MatrixXd& w, std::span<const float> row);

// Mean cosine between map_row(source anchor) and its target anchor.
double mean_anchor_cosine(
    const Eigen::MatrixXd& w, const EmbeddingTable& source,
    const EmbeddingTable& target,
    std::span<const std::pair<std::size_t, std::size_t>> anchors);

// Mean similarity r(y) of each candidate y to its k nearest neighbours in the
// query space, precomputed once per (query space, candidate space) pair.
struct CslsCache {
  std::size_t k = 0;
  std::vector<double> candidate_r;
};

CslsCache build_csls_cache(const EmbeddingTable& query_space,
                           const EmbeddingTable& candidates, std::size_t k,
                           Execution exec = Execution::kParallel);

struct ScoredCandidate {
  std::size_t rank;
  std::string word;
  double score;
};

// CSLS(x, y) = 2 cos(x, y) - r(x) - r(y), r(x) taken over the candidates.
// Sorted by score, then frequency rank, then word.
std::vector<ScoredCandidate> csls_scores(std::span<const float> query,
                                         const EmbeddingTable& candidates,
                                         std::size_t k, const CslsCache& cache);

struct RefinementConfig {
  std::size_t iterations = 5;
  std::size_t k_csls = 10;
  std::size_t anchor_top_n = 10000;
  bool mutual_nn_only = true;
  Execution execution = Execution::kParallel;
};

// Induces anchors from CSLS nearest neighbours among the most frequent words
// of both spaces under the current map.
std::vector<std::pair<std::size_t, std::size_t>> induce_dictionary(
    const Eigen::MatrixXd& w, const EmbeddingTable& source,
    const EmbeddingTable& target, const RefinementConfig& config);

// Alternates dictionary induction and Procrustes. Stops early, keeping the
// last good map and setting report.stopped_early, when an induced
// dictionary has fewer than dim pairs.
AlignmentMap refine(const AlignmentMap& initial, const EmbeddingTable& source,
                    const EmbeddingTable& target,
                    const RefinementConfig& config);

// Every row mapped through map_row; words, ranks and language tag kept.
EmbeddingTable apply(const AlignmentMap& map, const EmbeddingTable& table);

struct PivotResult {
  std::map<Language, EmbeddingTable> tables;  // all in the English space
  std::map<Language, AlignmentMap> maps;      // one per non-pivot language
};

// Maps every non-English table into the English space with a fitted and
// refined Procrustes map. Dictionaries are keyed by the non-English language
// and may be oriented either way. Tables must be normalized.
PivotResult chain_to_pivot(const std::map<Language, EmbeddingTable>& tables,
                           const std::map<Language, BilingualDictionary>& dictionaries,
                           const RefinementConfig& config);

// Fraction of evaluation source words whose k best CSLS neighbours in the
// target space include a listed translation.
double induction_precision(const AlignmentMap& map, const EmbeddingTable& source,
                           const EmbeddingTable& target,
                           const BilingualDictionary& eval_dictionary,
                           std::size_t k, std::size_t k_csls = 10,
                           Execution exec = Execution::kParallel);

// {schema_version, pair, anchors_used, mean_cosine, iterations,
//  smallest_singular_value}
nlohmann::json fit_report_json(const AlignmentMap& map);

}  // namespace cwi

#endif  // CWI_ALIGNMENT_HPP
