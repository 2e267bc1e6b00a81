#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cwi/alignment.hpp"
#include "cwi/error.hpp"
#include "support.hpp"

using namespace cwi;
using cwi::testing::random_orthogonal;
using cwi::testing::random_table;
using cwi::testing::rotate_table;

namespace {

using Anchors = std::vector<std::pair<std::size_t, std::size_t>>;

Anchors diagonal(std::size_t n) {
  Anchors a;
  for (std::size_t i = 0; i < n; ++i) a.emplace_back(i, i);
  return a;
}

BilingualDictionary prefixed_dictionary(Language s, const std::string& sp, Language t,
                                        const std::string& tp, std::size_t n) {
  BilingualDictionary d(s, t);
  for (std::size_t i = 0; i < n; ++i) d.add(sp + std::to_string(i), tp + std::to_string(i));
  return d;
}

EmbeddingTable table_of(Language l, const std::vector<std::vector<float>>& rows,
                        const std::string& prefix) {
  EmbeddingTable t(l, rows.at(0).size());
  for (std::size_t i = 0; i < rows.size(); ++i) t.add(prefix + std::to_string(i), rows[i]);
  return t;
}

EmbeddingTable add_noise(const EmbeddingTable& t, double sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  EmbeddingTable out(t.language(), t.dim());
  std::vector<float> row(t.dim());
  for (std::size_t r = 0; r < t.size(); ++r) {
    for (std::size_t c = 0; c < t.dim(); ++c) {
      row[c] = static_cast<float>(t.row(r)[c] + normal(rng));
    }
    out.add(t.word(r), row);
  }
  return normalize(out);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// ||XW - Y||_F^2 over the anchors.
double objective(const Eigen::MatrixXd& w, const EmbeddingTable& x, const EmbeddingTable& y,
                 const Anchors& anchors) {
  double total = 0;
  for (const auto& [s, t] : anchors) {
    for (std::size_t c = 0; c < x.dim(); ++c) {
      double v = 0;
      for (std::size_t k = 0; k < x.dim(); ++k) v += static_cast<double>(x.row(s)[k]) * w(k, c);
      const double diff = v - y.row(t)[c];
      total += diff * diff;
    }
  }
  return total;
}

}  // namespace

TEST(Dictionary, SkipsMalformedLinesAndDuplicates) {
  std::istringstream in("a b\na b\nc d e\n\nf\ng h\n");
  const BilingualDictionary d = load_dictionary(in, Language::kDE, Language::kEN);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dropped_lines(), 2u);
  const BilingualDictionary r = d.reversed();
  EXPECT_EQ(r.source_language(), Language::kEN);
  EXPECT_EQ(r.pairs()[1], (std::pair<std::string, std::string>{"h", "g"}));
}

TEST(Dictionary, MissingFileIsAMissingResource) {
  EXPECT_THROW(load_dictionary_file("/nonexistent/de-en.txt", Language::kDE, Language::kEN),
               MissingResourceError);
}

TEST(Procrustes, IdenticalSpacesGiveIdentity) {
  Rng rng(1);
  const EmbeddingTable t = random_table(Language::kEN, 30, 6, rng);
  const AlignmentMap m = procrustes_fit(t, t, diagonal(30));
  EXPECT_LE((m.w - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(m.report.anchor_count, 30u);
  EXPECT_NEAR(m.report.mean_cosine_after_fit, 1.0, 1e-6);
}

TEST(Procrustes, RecoversAKnownRotation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t d = 4 + seed % 9;
    const Eigen::MatrixXd r = random_orthogonal(d, rng);
    const EmbeddingTable src = random_table(Language::kDE, 5 * d, d, rng, "de");
    const EmbeddingTable tgt = rotate_table(src, r, Language::kEN, "en");
    const AlignmentMap m = procrustes_fit(
        src, tgt, prefixed_dictionary(Language::kDE, "de", Language::kEN, "en", 5 * d));
    EXPECT_LE((m.w - r).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed;
    EXPECT_LE(orthogonality_error(m.w), 1e-6);
  }
}

TEST(Procrustes, NoisyRotationStillAligns) {
  Rng rng(11);
  const Eigen::MatrixXd r = random_orthogonal(10, rng);
  const EmbeddingTable src = random_table(Language::kES, 80, 10, rng, "es");
  const EmbeddingTable tgt = add_noise(rotate_table(src, r, Language::kEN, "en"), 0.01, rng);
  const AlignmentMap m = procrustes_fit(
      src, tgt, prefixed_dictionary(Language::kES, "es", Language::kEN, "en", 80));
  EXPECT_GE(m.report.mean_cosine_after_fit, 0.99);
}

TEST(Procrustes, BeatsRandomOrthogonalMaps) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t d = 2 + seed % 7;
    const std::size_t n = d + uniform_index(rng, 20 - d + 1);
    const EmbeddingTable x = random_table(Language::kDE, n, d, rng);
    const EmbeddingTable y = random_table(Language::kEN, n, d, rng);
    const Anchors anchors = diagonal(n);
    const AlignmentMap m = procrustes_fit(x, y, anchors);
    const double best = objective(m.w, x, y, anchors);
    for (int trial = 0; trial < 1000; ++trial) {
      ASSERT_LE(best, objective(random_orthogonal(d, rng), x, y, anchors) + 1e-9);
    }
  }
}

TEST(Procrustes, TooFewPairsIsNumerical) {
  Rng rng(2);
  const EmbeddingTable t = random_table(Language::kEN, 10, 6, rng);
  EXPECT_THROW(procrustes_fit(t, t, diagonal(5)), NumericalError);
}

TEST(Procrustes, FiltersPairsMissingFromATable) {
  Rng rng(3);
  const EmbeddingTable src = random_table(Language::kDE, 20, 4, rng, "de");
  const EmbeddingTable tgt = random_table(Language::kEN, 20, 4, rng, "en");
  BilingualDictionary d = prefixed_dictionary(Language::kDE, "de", Language::kEN, "en", 20);
  d.add("de999", "en0");
  d.add("de0", "en999");
  const AlignmentMap m = procrustes_fit(src, tgt, d);
  EXPECT_EQ(m.report.anchor_count, 20u);
  EXPECT_EQ(m.report.pairs_filtered, 2u);
}

TEST(Procrustes, RankDeficientCrossCovarianceStillOrthogonal) {
  // Every anchor lies in the first two coordinates of a 4-d space.
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 6; ++i) {
    const double a = 0.4 * i;
    rows.push_back({static_cast<float>(std::cos(a)), static_cast<float>(std::sin(a)), 0, 0});
  }
  const EmbeddingTable t = table_of(Language::kEN, rows, "w");
  const AlignmentMap m = procrustes_fit(t, t, diagonal(6));
  EXPECT_LE(orthogonality_error(m.w), 1e-6);
  EXPECT_LT(m.report.smallest_singular_value, 1e-9);
}

TEST(Procrustes, OrthogonalOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t d = 2 + uniform_index(rng, 11);
    const std::size_t n = d + uniform_index(rng, 30);
    const EmbeddingTable x = random_table(Language::kDE, n, d, rng);
    const EmbeddingTable y = random_table(Language::kEN, n, d, rng);
    EXPECT_LE(orthogonality_error(procrustes_fit(x, y, diagonal(n)).w), 1e-6);
  }
}

TEST(Csls, QueryItselfRanksFirst) {
  const EmbeddingTable cand = table_of(Language::kEN, {{0, 1}, {1, 0}}, "c");
  const std::vector<float> q = {1, 0};
  const CslsCache cache = build_csls_cache(cand, cand, 1);
  const auto scores = csls_scores(q, cand, 1, cache);
  EXPECT_EQ(scores[0].word, "c1");
}

// Query space {x=(1,0), z=(0.6,0.8)}, candidates {y1=(1,0), y2=(0,1)}, k=2:
// r(x) = (1+0)/2, r(y1) = (1+0.6)/2, r(y2) = (0.8+0)/2.
TEST(Csls, HandComputedScores) {
  const EmbeddingTable query_space = table_of(Language::kDE, {{1, 0}, {0.6f, 0.8f}}, "q");
  const EmbeddingTable cand = table_of(Language::kEN, {{1, 0}, {0, 1}}, "y");
  const CslsCache cache = build_csls_cache(query_space, cand, 2);
  EXPECT_NEAR(cache.candidate_r[0], 0.8, 1e-7);
  EXPECT_NEAR(cache.candidate_r[1], 0.4, 1e-7);
  const std::vector<float> x = {1, 0};
  const auto scores = csls_scores(x, cand, 2, cache);
  EXPECT_EQ(scores[0].word, "y0");
  EXPECT_NEAR(scores[0].score, 2.0 - 0.5 - 0.8, 1e-7);
  EXPECT_NEAR(scores[1].score, 0.0 - 0.5 - 0.4, 1e-7);
}

// a and b have equal cosine to the query; a sits in a dense region of the
// query space, so b wins despite a's better frequency rank.
TEST(Csls, HubCandidateIsPenalized) {
  const float s = static_cast<float>(std::sqrt(3.0) / 2);
  const EmbeddingTable query_space =
      table_of(Language::kDE, {{1, 0}, {0.5f, s}, {0, 1}}, "q");
  const EmbeddingTable cand = table_of(Language::kEN, {{0.5f, s}, {0.5f, -s}}, "c");
  const CslsCache cache = build_csls_cache(query_space, cand, 2);
  const std::vector<float> q = {1, 0};
  const auto scores = csls_scores(q, cand, 2, cache);
  EXPECT_EQ(scores[0].word, "c1");
  EXPECT_GT(scores[0].score, scores[1].score);
}

TEST(Csls, TiesBreakByRankAndKTooLargeFails) {
  const EmbeddingTable cand = table_of(Language::kEN, {{0, 1}, {0, 1}, {1, 0}}, "c");
  const CslsCache cache = build_csls_cache(cand, cand, 1);
  const std::vector<float> q = {0, 1};
  const auto scores = csls_scores(q, cand, 1, cache);
  EXPECT_EQ(scores[0].rank, 0u);
  EXPECT_EQ(scores[1].rank, 1u);
  EXPECT_THROW(csls_scores(q, cand, 4, cache), ValidationError);
}

TEST(Csls, SerialAndParallelCachesAgree) {
  Rng rng(4);
  const EmbeddingTable a = random_table(Language::kDE, 120, 8, rng);
  const EmbeddingTable b = random_table(Language::kEN, 90, 8, rng);
  const CslsCache s = build_csls_cache(a, b, 10, Execution::kSerial);
  const CslsCache p = build_csls_cache(a, b, 10, Execution::kParallel);
  for (std::size_t i = 0; i < s.candidate_r.size(); ++i) {
    EXPECT_NEAR(s.candidate_r[i], p.candidate_r[i], 1e-12);
  }
}

TEST(Refine, ZeroIterationsIsIdentity) {
  Rng rng(5);
  const EmbeddingTable src = random_table(Language::kDE, 50, 6, rng);
  const EmbeddingTable tgt = random_table(Language::kEN, 50, 6, rng);
  const AlignmentMap m = procrustes_fit(src, tgt, diagonal(50));
  RefinementConfig config;
  config.iterations = 0;
  const AlignmentMap r = refine(m, src, tgt, config);
  EXPECT_EQ(r.w, m.w);
  EXPECT_EQ(r.report.refinement_iterations, 0u);
}

TEST(Refine, CorrectInitialMapInducesTheTrueCorrespondence) {
  Rng rng(6);
  const Eigen::MatrixXd rot = random_orthogonal(8, rng);
  const EmbeddingTable src = random_table(Language::kDE, 200, 8, rng, "de");
  const EmbeddingTable tgt = rotate_table(src, rot, Language::kEN, "en");
  RefinementConfig config;
  auto anchors = induce_dictionary(rot, src, tgt, config);
  std::sort(anchors.begin(), anchors.end());
  EXPECT_EQ(anchors, diagonal(200));
  AlignmentMap initial;
  initial.w = rot;
  const AlignmentMap r = refine(initial, src, tgt, config);
  EXPECT_LE((r.w - rot).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(r.report.anchors_per_iteration.size(), 5u);
  EXPECT_FALSE(r.report.stopped_early);
}

TEST(Refine, PerturbedStartImprovesMonotonically) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(200 + seed);
    const Eigen::MatrixXd rot = random_orthogonal(8, rng);
    const EmbeddingTable src = random_table(Language::kDE, 300, 8, rng, "de");
    const EmbeddingTable tgt = add_noise(rotate_table(src, rot, Language::kEN, "en"), 0.01, rng);
    Eigen::MatrixXd noisy = rot;
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += uniform_real(rng, -0.1, 0.1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(noisy, Eigen::ComputeFullU | Eigen::ComputeFullV);
    AlignmentMap initial;
    initial.w = svd.matrixU() * svd.matrixV().transpose();
    initial.report.mean_cosine_after_fit =
        mean_anchor_cosine(initial.w, src, tgt, diagonal(300));
    const AlignmentMap r = refine(initial, src, tgt, RefinementConfig{});
    double previous = initial.report.mean_cosine_after_fit;
    for (double c : r.report.mean_cosine_per_iteration) {
      EXPECT_GE(c, previous - 1e-12);
      previous = c;
    }
    EXPECT_LE(orthogonality_error(r.w), 1e-6);
  }
}

TEST(Refine, TooFewInducedAnchorsStopsEarly) {
  Rng rng(7);
  const EmbeddingTable src = random_table(Language::kDE, 40, 6, rng);
  const EmbeddingTable tgt = random_table(Language::kEN, 40, 6, rng);
  const AlignmentMap m = procrustes_fit(src, tgt, diagonal(40));
  RefinementConfig config;
  config.anchor_top_n = 3;
  const AlignmentMap r = refine(m, src, tgt, config);
  EXPECT_TRUE(r.report.stopped_early);
  EXPECT_EQ(r.w, m.w);
}

TEST(Apply, IdentityLeavesTheTableUnchanged) {
  Rng rng(8);
  const EmbeddingTable t = random_table(Language::kES, 25, 5, rng);
  AlignmentMap m;
  m.w = Eigen::MatrixXd::Identity(5, 5);
  const EmbeddingTable out = apply(m, t);
  EXPECT_EQ(out.words(), t.words());
  EXPECT_EQ(out.language(), Language::kES);
  for (std::size_t i = 0; i < t.data().size(); ++i) EXPECT_NEAR(out.data()[i], t.data()[i], 1e-6);
}

TEST(Apply, PreservesPairwiseCosines) {
  Rng rng(9);
  const EmbeddingTable t = random_table(Language::kDE, 30, 7, rng);
  AlignmentMap m;
  m.w = random_orthogonal(7, rng);
  const EmbeddingTable out = apply(m, t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      EXPECT_NEAR(cosine(out.row(i), out.row(j)), cosine(t.row(i), t.row(j)), 1e-6);
    }
  }
  AlignmentMap wrong;
  wrong.w = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(apply(wrong, t), ValidationError);
}

TEST(Apply, MeasuredAnchorCosineMatchesTheReport) {
  Rng rng(10);
  const Eigen::MatrixXd rot = random_orthogonal(9, rng);
  const EmbeddingTable src = random_table(Language::kDE, 60, 9, rng, "de");
  const EmbeddingTable tgt = add_noise(rotate_table(src, rot, Language::kEN, "en"), 0.05, rng);
  const AlignmentMap m = procrustes_fit(
      src, tgt, prefixed_dictionary(Language::kDE, "de", Language::kEN, "en", 60));
  const EmbeddingTable mapped = apply(m, src);
  double total = 0;
  for (std::size_t i = 0; i < 60; ++i) total += cosine(mapped.row(i), tgt.row(i));
  EXPECT_NEAR(total / 60, m.report.mean_cosine_after_fit, 1e-9);
}

TEST(ChainToPivot, PivotOnlyPassesThrough) {
  Rng rng(12);
  const EmbeddingTable en = random_table(Language::kEN, 20, 4, rng);
  const PivotResult r = chain_to_pivot({{Language::kEN, en}}, {}, RefinementConfig{});
  EXPECT_EQ(r.tables.at(Language::kEN), en);
  EXPECT_TRUE(r.maps.empty());
}

TEST(ChainToPivot, ThreeRotatedSpacesLandOnEnglish) {
  Rng rng(13);
  const std::size_t n = 150, d = 10;
  const EmbeddingTable en = random_table(Language::kEN, n, d, rng, "en");
  const EmbeddingTable de = rotate_table(en, random_orthogonal(d, rng), Language::kDE, "de");
  const EmbeddingTable es = rotate_table(en, random_orthogonal(d, rng), Language::kES, "es");
  std::map<Language, BilingualDictionary> dicts;
  dicts[Language::kDE] = prefixed_dictionary(Language::kDE, "de", Language::kEN, "en", 40);
  // English-to-Spanish orientation is accepted as well.
  dicts[Language::kES] = prefixed_dictionary(Language::kEN, "en", Language::kES, "es", 40);
  const PivotResult r = chain_to_pivot(
      {{Language::kEN, en}, {Language::kDE, de}, {Language::kES, es}}, dicts, RefinementConfig{});
  EXPECT_EQ(r.tables.at(Language::kEN), en);
  for (Language l : {Language::kDE, Language::kES}) {
    const EmbeddingTable& mapped = r.tables.at(l);
    for (std::size_t i = 0; i < en.data().size(); ++i) {
      ASSERT_NEAR(mapped.data()[i], en.data()[i], 1e-5);
    }
    EXPECT_LE(orthogonality_error(r.maps.at(l).w), 1e-6);
  }
}

TEST(ChainToPivot, MissingDictionaryIsAMissingResource) {
  Rng rng(14);
  const EmbeddingTable en = random_table(Language::kEN, 20, 4, rng);
  const EmbeddingTable de = random_table(Language::kDE, 20, 4, rng);
  EXPECT_THROW(chain_to_pivot({{Language::kEN, en}, {Language::kDE, de}}, {}, RefinementConfig{}),
               MissingResourceError);
  EXPECT_THROW(chain_to_pivot({{Language::kDE, de}}, {}, RefinementConfig{}),
               MissingResourceError);
}

TEST(InductionPrecision, IdenticalAndRecoveredSpacesArePerfect) {
  Rng rng(15);
  const EmbeddingTable en = random_table(Language::kEN, 100, 12, rng, "w");
  AlignmentMap id;
  id.w = Eigen::MatrixXd::Identity(12, 12);
  EXPECT_DOUBLE_EQ(
      induction_precision(id, en, en,
                          prefixed_dictionary(Language::kEN, "w", Language::kEN, "w", 100), 1),
      1.0);
  const Eigen::MatrixXd rot = random_orthogonal(12, rng);
  const EmbeddingTable de = rotate_table(en, rot, Language::kDE, "de");
  const auto dict = prefixed_dictionary(Language::kDE, "de", Language::kEN, "w", 100);
  const AlignmentMap m = procrustes_fit(de, en, dict);
  EXPECT_DOUBLE_EQ(induction_precision(m, de, en, dict, 1), 1.0);
}

TEST(InductionPrecision, RandomMapIsNearChance) {
  double total = 0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(300 + seed);
    const EmbeddingTable en = random_table(Language::kEN, 1000, 32, rng, "en");
    const EmbeddingTable de = rotate_table(en, random_orthogonal(32, rng), Language::kDE, "de");
    AlignmentMap m;
    m.w = random_orthogonal(32, rng);
    total += induction_precision(m, de, en,
                                 prefixed_dictionary(Language::kDE, "de", Language::kEN, "en", 1000), 1);
  }
  EXPECT_LT(total / seeds, 0.01);
}

TEST(InductionPrecision, EmptyUsableDictionaryFails) {
  Rng rng(16);
  const EmbeddingTable en = random_table(Language::kEN, 10, 4, rng);
  AlignmentMap id;
  id.w = Eigen::MatrixXd::Identity(4, 4);
  BilingualDictionary d(Language::kEN, Language::kEN);
  d.add("nope", "none");
  EXPECT_THROW(induction_precision(id, en, en, d, 1), ValidationError);
}

TEST(FitReport, JsonFields) {
  Rng rng(17);
  const EmbeddingTable t = random_table(Language::kEN, 10, 3, rng);
  AlignmentMap m = procrustes_fit(t, t, diagonal(10));
  m.source_language = Language::kDE;
  const nlohmann::json j = fit_report_json(m);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["anchors_used"], 10);
  EXPECT_TRUE(j.contains("pair"));
  EXPECT_TRUE(j.contains("smallest_singular_value"));
}
