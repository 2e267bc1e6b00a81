#ifndef CWI_EVALUATION_HPP
#define CWI_EVALUATION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cwi/classifier.hpp"
#include "cwi/corpus.hpp"
#include "cwi/language.hpp"
#include "cwi/tagger.hpp"
#include "json.hpp"

namespace cwi {

// Complex is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(int gold, int predicted);
  std::size_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
};

enum class PositiveClass { kComplex, kNonComplex };

// F1 = 2PR / (P + R); every 0/0 (in P, R or F1) counts as 0.
double f1_for_class(const ConfusionCounts& counts, PositiveClass positive);

// Mean of the complex and non-complex F1.
double macro_f1(const ConfusionCounts& counts);

struct EvalReport {
  std::set<Language> train_languages;
  std::size_t shots = 0;
  std::string target;  // column name, e.g. "EN-WN"
  Split split = Split::kTest;
  ConfusionCounts counts;
  double f1_complex = 0.0;
  double f1_noncomplex = 0.0;
  double macro_f1 = 0.0;
  std::uint64_t seed = 0;
  std::string model_id;
  std::size_t repeats = 1;
};

nlohmann::json to_json(const EvalReport& report);

// One prediction per instance. The corpus must be a dev or test split.
// Failures are rethrown naming the instance's hit_id.
EvalReport evaluate(const InstanceClassifier& classifier, const Corpus& corpus);

// --- experiments ------------------------------------------------------------

struct ExperimentSpec {
  std::set<Language> train_languages;
  Target target = Target::kDE;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  std::string model = "bilstm";  // bilstm | echo-gold | majority
  std::size_t repeats = 1;       // seeds averaged per cell

  bool operator==(const ExperimentSpec&) const = default;
};

enum class TransferMode { kZeroShot, kFewShot, kInLanguage };

// Throws ValidationError: train languages must be a non-empty subset of
// {EN, DE, ES}; shots > 0 needs a target language that has training data
// and is not already among the training languages.
void validate(const ExperimentSpec& spec);
TransferMode transfer_mode(const ExperimentSpec& spec);

// "EN+ES" style label of a language set, in EN, DE, ES order.
std::string languages_label(const std::set<Language>& languages);
// Row label of the results grid: languages, plus the shot count if any.
std::string row_label(const ExperimentSpec& spec);
// Unique, file-name safe cell identifier.
std::string cell_id(const ExperimentSpec& spec);

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& json);

// Union of the training languages' train splits (English = all three
// genres), plus `shots` instances sampled from the target collection's
// train split.
Corpus assemble_training_corpus(const ExperimentSpec& spec, const DataLayout& data);

struct ExperimentConfig {
  std::size_t hidden = 128;
  double threshold = 0.5;
  TrainingConfig training;
};

struct ExperimentContext {
  const DataLayout* data = nullptr;
  const SharedSpace* space = nullptr;  // needed by the bilstm model only
  ExperimentConfig config;
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct CellResult {
  ExperimentSpec spec;
  std::size_t training_instances = 0;
  std::size_t target_language_training_instances = 0;
  std::optional<EvalReport> dev;  // absent for French
  EvalReport test;
  std::vector<double> epoch_losses;       // first repeat
  std::vector<double> dev_macro_f1_per_epoch;  // first repeat, bilstm only
};

nlohmann::json to_json(const CellResult& result);

CellResult run_experiment(const ExperimentSpec& spec, const ExperimentContext& context);

// --- results grid -----------------------------------------------------------

struct GridMarks {
  bool best_zero_shot = false;   // bold in the printed tables
  bool best_monolingual = false; // underlined
  bool best_few_shot = false;    // bold among cells with the same shot count
};

struct GridCell {
  std::optional<double> dev;
  double test = 0.0;
  GridMarks dev_marks;
  GridMarks test_marks;
};

struct GridTable {
  std::vector<std::string> rows;  // canonical order
  std::vector<Target> columns;    // canonical order, only those present
  std::map<std::pair<std::string, Target>, GridCell> cells;
};

// Throws ValidationError when two results share a cell.
GridTable build_grid(std::span<const CellResult> results);

nlohmann::json to_json(const GridTable& table);
std::string render_text(const GridTable& table);

struct GridRun {
  std::vector<std::optional<CellResult>> results;  // parallel to specs
  std::vector<std::string> errors;                 // one per failed cell
  int exit_code = 0;  // highest exit code among failed cells
  GridTable table;
};

// Runs independent cells on up to `parallelism` workers (0 = all cores).
// Duplicate specs are rejected up front.
GridRun run_grid(const std::vector<ExperimentSpec>& specs,
                 const ExperimentContext& context, std::size_t parallelism = 0);

}  // namespace cwi

#endif  // CWI_EVALUATION_HPP
