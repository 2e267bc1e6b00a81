// Shared helpers and independent oracles for the test binaries.
#ifndef CWI_TESTS_SUPPORT_HPP
#define CWI_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cwi/alignment.hpp"
#include "cwi/corpus.hpp"
#include "cwi/embeddings.hpp"
#include "cwi/random.hpp"
#include "cwi/tagger.hpp"

namespace cwi::testing {

inline std::filesystem::path fixture_dir() { return CWI_FIXTURE_DIR; }

// Fixture embeddings aligned into the English space.
inline SharedSpace fixture_space() {
  const auto dir = fixture_dir();
  std::map<Language, EmbeddingTable> tables;
  std::map<Language, BilingualDictionary> dictionaries;
  for (Language l : {Language::kEN, Language::kDE, Language::kES, Language::kFR}) {
    std::string code(to_string(l));
    for (char& c : code) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    tables[l] = normalize(load_vec_file(dir / "embeddings" / ("wiki." + code + ".vec"),
                                        kDefaultMaxVocab, l));
    if (l != Language::kEN) {
      dictionaries[l] = load_dictionary_file(dir / "dictionaries" / (code + "-en.txt"), l,
                                             Language::kEN);
    }
  }
  return SharedSpace(chain_to_pivot(tables, dictionaries, RefinementConfig{}).tables);
}

// Fresh, empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(CWI_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Counts the label column of a shared-task TSV without the corpus parser.
struct LabelCount {
  std::size_t complex = 0;
  std::size_t noncomplex = 0;
};

inline LabelCount recount_labels(const std::filesystem::path& path) {
  LabelCount out;
  std::ifstream in(path, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t tabs = 0;
    std::size_t pos = 0;
    while (tabs < 9) {
      pos = line.find('\t', pos) + 1;
      ++tabs;
    }
    (line[pos] == '1' ? out.complex : out.noncomplex)++;
  }
  return out;
}

// Per-class F1 straight from label vectors.
inline double brute_f1(const std::vector<int>& gold, const std::vector<int>& pred, int cls) {
  double tp = 0, predicted = 0, actual = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] == cls) predicted += 1;
    if (gold[i] == cls) actual += 1;
    if (pred[i] == cls && gold[i] == cls) tp += 1;
  }
  const double p = predicted == 0 ? 0.0 : tp / predicted;
  const double r = actual == 0 ? 0.0 : tp / actual;
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

inline double brute_macro_f1(const std::vector<int>& gold, const std::vector<int>& pred) {
  return (brute_f1(gold, pred, 1) + brute_f1(gold, pred, 0)) / 2;
}

// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1;
  }
  return q;
}

// Table of n unit rows named "<prefix><i>".
inline EmbeddingTable random_table(Language language, std::size_t n, std::size_t d,
                                   Rng& rng, const std::string& prefix = "w") {
  std::normal_distribution<double> normal;
  EmbeddingTable table(language, d);
  std::vector<float> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0;
    std::vector<double> v(d);
    for (double& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    for (std::size_t k = 0; k < d; ++k) row[k] = static_cast<float>(v[k] / std::sqrt(norm));
    table.add(prefix + std::to_string(i), row);
  }
  return table;
}

// Rows of `table` multiplied by r (double math), same words.
inline EmbeddingTable rotate_table(const EmbeddingTable& table, const Eigen::MatrixXd& r,
                                   Language language, const std::string& prefix) {
  const std::size_t d = table.dim();
  EmbeddingTable out(language, d);
  std::vector<float> row(d);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto src = table.row(i);
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0;
      for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(src[k]) * r(k, c);
      row[c] = static_cast<float>(acc);
    }
    out.add(prefix + std::to_string(i), row);
  }
  return out;
}

// Straight-line BiLSTM forward pass with explicit scalar loops.
inline std::vector<double> oracle_forward(const TaggerModel& m,
                                          const std::vector<std::vector<double>>& xs) {
  const std::size_t h = m.hidden;
  const std::size_t d = m.input_dim;
  const std::size_t T = xs.size();
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  auto run = [&](const LstmDirectionParams& p, bool reverse) {
    std::vector<std::vector<double>> hs(T, std::vector<double>(h));
    std::vector<double> hp(h, 0.0), cp(h, 0.0);
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = reverse ? T - 1 - s : s;
      std::vector<double> z(4 * h);
      for (std::size_t r = 0; r < 4 * h; ++r) {
        double acc = p.b(r);
        for (std::size_t k = 0; k < d; ++k) acc += p.w(r, k) * xs[t][k];
        for (std::size_t k = 0; k < h; ++k) acc += p.u(r, k) * hp[k];
        z[r] = acc;
      }
      std::vector<double> hn(h), cn(h);
      for (std::size_t j = 0; j < h; ++j) {
        const double i = sig(z[j]);
        const double f = sig(z[h + j]);
        const double g = std::tanh(z[2 * h + j]);
        const double o = sig(z[3 * h + j]);
        cn[j] = f * cp[j] + i * g;
        hn[j] = o * std::tanh(cn[j]);
      }
      hs[t] = hn;
      hp = hn;
      cp = cn;
    }
    return hs;
  };
  const auto hf = run(m.params.forward, false);
  const auto hb = run(m.params.backward, true);
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    double z = m.params.head_b;
    for (std::size_t j = 0; j < h; ++j) {
      z += m.params.head_w(j) * hf[t][j] + m.params.head_w(h + j) * hb[t][j];
    }
    out[t] = sig(z);
  }
  return out;
}

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& xs, std::size_t d) {
  Eigen::MatrixXd m(d, xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (std::size_t k = 0; k < d; ++k) m(k, t) = xs[t][k];
  }
  return m;
}

inline Eigen::MatrixXd random_inputs(std::size_t d, std::size_t T, Rng& rng) {
  Eigen::MatrixXd m(d, T);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng, -1.0, 1.0);
  return m;
}

// Largest relative error between backward() and central differences of
// loss() over every parameter, |a - n| / max(|a|, |n|, 1e-6).
inline double gradient_check_error(const TaggerModel& model, const Eigen::MatrixXd& inputs,
                                   const std::vector<int>& labels, double step = 1e-5) {
  const BiLstmParams analytic = backward(model, forward(model, inputs), labels);
  TaggerModel probe = model;
  auto values = probe.params.tensors();
  const auto grads = analytic.tensors();
  double worst = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    for (std::size_t i = 0; i < values[t].size(); ++i) {
      const double saved = values[t][i];
      values[t][i] = saved + step;
      const double up = loss(forward(probe, inputs).probabilities, labels);
      values[t][i] = saved - step;
      const double down = loss(forward(probe, inputs).probabilities, labels);
      values[t][i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = grads[t][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

inline std::vector<int> random_labels(std::size_t T, Rng& rng) {
  std::vector<int> labels(T);
  for (int& y : labels) y = static_cast<int>(uniform_index(rng, 2));
  return labels;
}

// The separable 20-sequence task: a token is complex iff it is one of the
// designated hard words, whose embeddings share a positive first coordinate.
struct SeparableTask {
  std::vector<EncodedSequence> data;
};

inline SeparableTask separable_task(std::uint64_t seed, std::size_t d = 6) {
  Rng rng(seed);
  const std::size_t vocab = 24;
  std::vector<std::vector<double>> vectors(vocab, std::vector<double>(d));
  std::vector<int> hard(vocab);
  for (std::size_t w = 0; w < vocab; ++w) {
    hard[w] = w % 3 == 0 ? 1 : 0;
    for (std::size_t k = 0; k < d; ++k) vectors[w][k] = uniform_real(rng, -0.5, 0.5);
    vectors[w][0] = hard[w] ? 1.0 : -1.0;
  }
  SeparableTask task;
  for (std::size_t s = 0; s < 20; ++s) {
    const std::size_t T = 4 + uniform_index(rng, 5);
    EncodedSequence seq;
    seq.inputs.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t w = uniform_index(rng, vocab);
      for (std::size_t k = 0; k < d; ++k) {
        seq.inputs(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = vectors[w][k];
      }
      seq.labels.push_back(hard[w]);
    }
    task.data.push_back(std::move(seq));
  }
  return task;
}

// Settings under which the separable task is learnt within 5 epochs.
inline TrainingConfig separable_config() {
  TrainingConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 5;
  c.batch_size = 4;
  c.seed = 7;
  return c;
}

}  // namespace cwi::testing

#endif  // CWI_TESTS_SUPPORT_HPP
