#include "cwi/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <Eigen/SVD>

#include "cwi/error.hpp"

namespace cwi {

bool BilingualDictionary::add(std::string source, std::string target) {
  if (!seen_.emplace(source, target).second) return false;
  pairs_.emplace_back(std::move(source), std::move(target));
  return true;
}

BilingualDictionary BilingualDictionary::reversed() const {
  BilingualDictionary out(target_language_, source_language_);
  for (const auto& [s, t] : pairs_) out.add(t, s);
  out.dropped_lines_ = dropped_lines_;
  return out;
}

BilingualDictionary load_dictionary(std::istream& in, Language source,
                                    Language target) {
  BilingualDictionary dict(source, target);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::vector<std::string> parts;
    for (std::string w; words >> w;) parts.push_back(std::move(w));
    if (parts.empty()) continue;
    if (parts.size() != 2) {
      ++dict.dropped_lines_;
      continue;
    }
    dict.add(std::move(parts[0]), std::move(parts[1]));
  }
  return dict;
}

BilingualDictionary load_dictionary_file(const std::filesystem::path& path,
                                         Language source, Language target) {
  std::ifstream in(path);
  if (!in) {
    throw MissingResourceError("cannot open dictionary '" + path.string() + "'");
  }
  return load_dictionary(in, source, target);
}

double orthogonality_error(const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd gram = w.transpose() * w;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
      .cwiseAbs()
      .maxCoeff();
}

namespace {

kernels::MatrixView view(const EmbeddingTable& table, std::size_t rows) {
  return {table.data().data(), std::min(rows, table.size()), table.dim()};
}

kernels::MatrixView view(const std::vector<float>& data, std::size_t cols) {
  return {data.data(), cols == 0 ? 0 : data.size() / cols, cols};
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * double(b[i]);
    aa += double(a[i]) * double(a[i]);
    bb += double(b[i]) * double(b[i]);
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// Row-major float matrix of mapped rows [0, n).
std::vector<float> map_rows(const Eigen::MatrixXd& w, const EmbeddingTable& table,
                            std::size_t n) {
  n = std::min(n, table.size());
  std::vector<float> out(n * table.dim());
  for (std::size_t r = 0; r < n; ++r) {
    const auto mapped = map_row(w, table.row(r));
    std::copy(mapped.begin(), mapped.end(), out.begin() + static_cast<std::ptrdiff_t>(r * table.dim()));
  }
  return out;
}

}  // namespace

std::vector<float> map_row(const Eigen::MatrixXd& w, std::span<const float> row) {
  const auto d = static_cast<Eigen::Index>(row.size());
  std::vector<double> mapped(row.size(), 0.0);
  double norm_sq = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) sum += double(row[static_cast<std::size_t>(i)]) * w(i, j);
    mapped[static_cast<std::size_t>(j)] = sum;
    norm_sq += sum * sum;
  }
  const double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
  std::vector<float> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    out[j] = static_cast<float>(mapped[j] * inv);
  }
  return out;
}

double mean_anchor_cosine(
    const Eigen::MatrixXd& w, const EmbeddingTable& source,
    const EmbeddingTable& target,
    std::span<const std::pair<std::size_t, std::size_t>> anchors) {
  if (anchors.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [s, t] : anchors) {
    sum += cosine(map_row(w, source.row(s)), target.row(t));
  }
  return sum / static_cast<double>(anchors.size());
}

AlignmentMap procrustes_fit(
    const EmbeddingTable& source, const EmbeddingTable& target,
    std::span<const std::pair<std::size_t, std::size_t>> anchors) {
  const std::size_t d = source.dim();
  if (target.dim() != d) {
    throw ValidationError("embedding dimensions differ (" + std::to_string(d) +
                          " vs " + std::to_string(target.dim()) + ")");
  }
  if (anchors.size() < d) {
    throw NumericalError("under-determined Procrustes fit: " +
                         std::to_string(anchors.size()) +
                         " usable anchor pairs for dimension " +
                         std::to_string(d));
  }
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(di, di);
  Eigen::VectorXd x(di);
  Eigen::VectorXd y(di);
  for (const auto& [s, t] : anchors) {
    const auto xs = source.row(s);
    const auto yt = target.row(t);
    for (Eigen::Index i = 0; i < di; ++i) {
      x(i) = xs[static_cast<std::size_t>(i)];
      y(i) = yt[static_cast<std::size_t>(i)];
    }
    cross.noalias() += x * y.transpose();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(cross,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);

  AlignmentMap map;
  map.w = svd.matrixU() * svd.matrixV().transpose();
  map.source_language = source.language();
  map.target_language = target.language();
  map.report.anchor_count = anchors.size();
  map.report.smallest_singular_value = svd.singularValues().minCoeff();
  map.report.mean_cosine_after_fit =
      mean_anchor_cosine(map.w, source, target, anchors);
  return map;
}

AlignmentMap procrustes_fit(const EmbeddingTable& source,
                            const EmbeddingTable& target,
                            const BilingualDictionary& dictionary) {
  std::vector<std::pair<std::size_t, std::size_t>> anchors;
  std::size_t filtered = 0;
  for (const auto& [s, t] : dictionary.pairs()) {
    const auto rs = source.find(s);
    const auto rt = target.find(t);
    if (rs && rt) {
      anchors.emplace_back(*rs, *rt);
    } else {
      ++filtered;
    }
  }
  AlignmentMap map = procrustes_fit(source, target, anchors);
  map.report.pairs_filtered = filtered;
  return map;
}

CslsCache build_csls_cache(const EmbeddingTable& query_space,
                           const EmbeddingTable& candidates, std::size_t k,
                           Execution exec) {
  if (k == 0 || k > query_space.size()) {
    throw ValidationError("CSLS k=" + std::to_string(k) +
                          " exceeds the query vocabulary of " +
                          std::to_string(query_space.size()));
  }
  CslsCache cache;
  cache.k = k;
  cache.candidate_r = kernels::topk_mean_similarity(
      view(candidates, candidates.size()), view(query_space, query_space.size()),
      k, exec);
  return cache;
}

std::vector<ScoredCandidate> csls_scores(std::span<const float> query,
                                         const EmbeddingTable& candidates,
                                         std::size_t k, const CslsCache& cache) {
  if (k == 0 || k > candidates.size()) {
    throw ValidationError("CSLS k=" + std::to_string(k) +
                          " exceeds the candidate vocabulary of " +
                          std::to_string(candidates.size()));
  }
  if (cache.candidate_r.size() != candidates.size()) {
    throw ValidationError("CSLS cache does not match the candidate table");
  }
  std::vector<double> cos(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    cos[c] = cosine(query, candidates.row(c));
  }
  std::vector<double> sorted = cos;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double r_query = 0.0;
  for (std::size_t i = 0; i < k; ++i) r_query += sorted[i];
  r_query /= static_cast<double>(k);

  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    out.push_back({c, candidates.word(c),
                   2.0 * cos[c] - r_query - cache.candidate_r[c]});
  }
  std::sort(out.begin(), out.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.rank != b.rank) return a.rank < b.rank;
              return a.word < b.word;
            });
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> induce_dictionary(
    const Eigen::MatrixXd& w, const EmbeddingTable& source,
    const EmbeddingTable& target, const RefinementConfig& config) {
  const std::size_t ns = std::min(config.anchor_top_n, source.size());
  const std::size_t nt = std::min(config.anchor_top_n, target.size());
  if (ns == 0 || nt == 0) return {};
  const std::size_t k = std::min({config.k_csls, ns, nt});
  const std::size_t d = source.dim();

  const std::vector<float> mapped = map_rows(w, source, ns);
  const auto src = view(mapped, d);
  const auto tgt = view(target, nt);
  const auto r_src = kernels::topk_mean_similarity(src, tgt, k, config.execution);
  const auto r_tgt = kernels::topk_mean_similarity(tgt, src, k, config.execution);
  const auto forward = kernels::csls_topk(src, tgt, r_src, r_tgt, 1, config.execution);
  const auto backward = kernels::csls_topk(tgt, src, r_tgt, r_src, 1, config.execution);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t t = forward[s].front().index;
    if (!config.mutual_nn_only || backward[t].front().index == s) {
      pairs.emplace_back(s, t);
    }
  }
  if (!config.mutual_nn_only) {
    for (std::size_t t = 0; t < nt; ++t) pairs.emplace_back(backward[t].front().index, t);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  }
  return pairs;
}

AlignmentMap refine(const AlignmentMap& initial, const EmbeddingTable& source,
                    const EmbeddingTable& target,
                    const RefinementConfig& config) {
  if (config.k_csls == 0) throw ValidationError("k_csls must be >= 1");
  AlignmentMap current = initial;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto anchors = induce_dictionary(current.w, source, target, config);
    if (anchors.size() < source.dim()) {
      current.report.stopped_early = true;
      break;
    }
    const AlignmentMap next = procrustes_fit(source, target, anchors);
    current.w = next.w;
    current.report.anchor_count = next.report.anchor_count;
    current.report.mean_cosine_after_fit = next.report.mean_cosine_after_fit;
    current.report.smallest_singular_value = next.report.smallest_singular_value;
    current.report.refinement_iterations = it + 1;
    current.report.anchors_per_iteration.push_back(anchors.size());
    current.report.mean_cosine_per_iteration.push_back(
        next.report.mean_cosine_after_fit);
  }
  return current;
}

EmbeddingTable apply(const AlignmentMap& map, const EmbeddingTable& table) {
  if (table.dim() != map.dim()) {
    throw ValidationError("map dimension " + std::to_string(map.dim()) +
                          " does not match table dimension " +
                          std::to_string(table.dim()));
  }
  EmbeddingTable out(table.language(), table.dim());
  for (std::size_t r = 0; r < table.size(); ++r) {
    out.add(table.word(r), map_row(map.w, table.row(r)));
  }
  return out;
}

PivotResult chain_to_pivot(
    const std::map<Language, EmbeddingTable>& tables,
    const std::map<Language, BilingualDictionary>& dictionaries,
    const RefinementConfig& config) {
  const auto pivot = tables.find(Language::kEN);
  if (pivot == tables.end()) {
    throw MissingResourceError("the English pivot table is required");
  }
  PivotResult result;
  result.tables.emplace(Language::kEN, pivot->second);
  // std::map order gives EN, DE, ES, FR: German is mapped before Spanish.
  for (const auto& [language, table] : tables) {
    if (language == Language::kEN) continue;
    const auto found = dictionaries.find(language);
    if (found == dictionaries.end()) {
      throw MissingResourceError("no dictionary between " +
                                 std::string(to_string(language)) + " and EN");
    }
    BilingualDictionary dict = found->second;
    if (dict.source_language() == Language::kEN && dict.target_language() == language) {
      dict = dict.reversed();
    } else if (dict.source_language() != language ||
               dict.target_language() != Language::kEN) {
      throw ValidationError("dictionary for " + std::string(to_string(language)) +
                            " does not pair it with EN");
    }
    AlignmentMap initial = procrustes_fit(table, pivot->second, dict);
    AlignmentMap refined = refine(initial, table, pivot->second, config);
    refined.report.pairs_filtered = initial.report.pairs_filtered;
    result.tables.emplace(language, apply(refined, table));
    result.maps.emplace(language, std::move(refined));
  }
  return result;
}

double induction_precision(const AlignmentMap& map, const EmbeddingTable& source,
                           const EmbeddingTable& target,
                           const BilingualDictionary& eval_dictionary,
                           std::size_t k, std::size_t k_csls, Execution exec) {
  std::vector<std::size_t> query_ranks;
  std::map<std::size_t, std::vector<std::size_t>> gold;
  for (const auto& [s, t] : eval_dictionary.pairs()) {
    const auto rs = source.find(s);
    const auto rt = target.find(t);
    if (!rs || !rt) continue;
    auto [it, inserted] = gold.try_emplace(*rs);
    if (inserted) query_ranks.push_back(*rs);
    it->second.push_back(*rt);
  }
  if (query_ranks.empty()) {
    throw ValidationError("no evaluation pair is present in both vocabularies");
  }
  if (k == 0 || k > target.size()) {
    throw ValidationError("precision@k needs 1 <= k <= target vocabulary");
  }
  const std::size_t d = source.dim();
  const std::size_t kc = std::min({k_csls, source.size(), target.size()});

  std::vector<float> queries;
  queries.reserve(query_ranks.size() * d);
  for (std::size_t r : query_ranks) {
    const auto mapped = map_row(map.w, source.row(r));
    queries.insert(queries.end(), mapped.begin(), mapped.end());
  }
  const std::vector<float> mapped_source = map_rows(map.w, source, source.size());
  const auto q = view(queries, d);
  const auto tgt = view(target, target.size());
  const auto r_query = kernels::topk_mean_similarity(q, tgt, kc, exec);
  const auto r_target =
      kernels::topk_mean_similarity(tgt, view(mapped_source, d), kc, exec);
  const auto best = kernels::csls_topk(q, tgt, r_query, r_target, k, exec);

  std::size_t hits = 0;
  for (std::size_t i = 0; i < query_ranks.size(); ++i) {
    const auto& answers = gold.at(query_ranks[i]);
    const bool hit = std::any_of(best[i].begin(), best[i].end(), [&](const auto& n) {
      return std::find(answers.begin(), answers.end(), n.index) != answers.end();
    });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(query_ranks.size());
}

nlohmann::json fit_report_json(const AlignmentMap& map) {
  return {{"schema_version", 1},
          {"pair", std::string(to_string(map.source_language)) + "-" +
                       std::string(to_string(map.target_language))},
          {"anchors_used", map.report.anchor_count},
          {"pairs_filtered", map.report.pairs_filtered},
          {"mean_cosine", map.report.mean_cosine_after_fit},
          {"iterations", map.report.refinement_iterations},
          {"anchors_per_iteration", map.report.anchors_per_iteration},
          {"stopped_early", map.report.stopped_early},
          {"smallest_singular_value", map.report.smallest_singular_value}};
}

}  // namespace cwi
