#include <memory>

#include "cwi/error.hpp"
#include "cwi/evaluation.hpp"
#include "cwi/random.hpp"

namespace cwi {

namespace {

bool trainable(Language language) {
  return language == Language::kEN || language == Language::kDE ||
         language == Language::kES;
}

std::uint64_t repeat_seed(std::uint64_t seed, std::size_t repeat) {
  return repeat == 0 ? seed : derive_seed(seed, "repeat/" + std::to_string(repeat));
}

std::unique_ptr<InstanceClassifier> fixed_classifier(const std::string& model,
                                                     const Corpus& gold) {
  if (model == "echo-gold") return std::make_unique<EchoGoldClassifier>(gold);
  return std::make_unique<ConstantClassifier>(0.0);  // majority: non-complex
}

void fill_metadata(EvalReport& report, const ExperimentSpec& spec) {
  report.train_languages = spec.train_languages;
  report.shots = spec.shots;
  report.target = std::string(to_string(spec.target));
  report.seed = spec.seed;
  report.model_id = spec.model;
  report.repeats = spec.repeats;
}

// Counts summed, F1 averaged over repeats.
EvalReport combine(const std::vector<EvalReport>& runs, const ExperimentSpec& spec) {
  EvalReport out = runs.front();
  out.counts = {};
  out.f1_complex = 0.0;
  out.f1_noncomplex = 0.0;
  for (const EvalReport& r : runs) {
    out.counts += r.counts;
    out.f1_complex += r.f1_complex;
    out.f1_noncomplex += r.f1_noncomplex;
  }
  const double n = static_cast<double>(runs.size());
  out.f1_complex /= n;
  out.f1_noncomplex /= n;
  out.macro_f1 = (out.f1_complex + out.f1_noncomplex) / 2.0;
  fill_metadata(out, spec);
  return out;
}

}  // namespace

void validate(const ExperimentSpec& spec) {
  if (spec.train_languages.empty()) {
    throw ValidationError("at least one training language is required");
  }
  for (Language l : spec.train_languages) {
    if (!trainable(l)) {
      throw ValidationError("no training data exists for " + std::string(to_string(l)));
    }
  }
  if (spec.model != "bilstm" && spec.model != "echo-gold" && spec.model != "majority") {
    throw ValidationError("unknown model '" + spec.model + "'");
  }
  if (spec.repeats < 1) throw ValidationError("repeats must be >= 1");
  if (spec.shots > 0) {
    const Language target = language_of(spec.target);
    if (!trainable(target)) {
      throw ValidationError("shots > 0 needs training data for " +
                            std::string(to_string(target)) + ", which has none");
    }
    if (spec.train_languages.count(target) != 0) {
      throw ValidationError("shots > 0 with " + std::string(to_string(target)) +
                            " already among the training languages");
    }
  }
}

TransferMode transfer_mode(const ExperimentSpec& spec) {
  if (spec.train_languages.count(language_of(spec.target)) != 0) {
    return TransferMode::kInLanguage;
  }
  return spec.shots == 0 ? TransferMode::kZeroShot : TransferMode::kFewShot;
}

std::string languages_label(const std::set<Language>& languages) {
  std::string out;
  for (Language l : languages) {
    if (!out.empty()) out += '+';
    out += to_string(l);
  }
  return out;
}

std::string row_label(const ExperimentSpec& spec) {
  std::string out = languages_label(spec.train_languages);
  if (spec.shots > 0) out += " | " + std::to_string(spec.shots) + "-shot";
  return out;
}

std::string cell_id(const ExperimentSpec& spec) {
  return languages_label(spec.train_languages) + "_to_" +
         std::string(to_string(spec.target)) + "_shots" + std::to_string(spec.shots) +
         "_seed" + std::to_string(spec.seed) + "_" + spec.model;
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json languages = nlohmann::json::array();
  for (Language l : spec.train_languages) languages.push_back(to_string(l));
  return {{"train_languages", languages},
          {"target", to_string(spec.target)},
          {"shots", spec.shots},
          {"seed", spec.seed},
          {"model", spec.model},
          {"repeats", spec.repeats}};
}

ExperimentSpec spec_from_json(const nlohmann::json& json) {
  ExperimentSpec spec;
  try {
    for (const auto& l : json.at("train_languages")) {
      spec.train_languages.insert(parse_language(l.get<std::string>()));
    }
    spec.target = parse_target(json.at("target").get<std::string>());
    spec.shots = json.value("shots", std::size_t{0});
    spec.seed = json.value("seed", std::uint64_t{0});
    spec.model = json.value("model", std::string("bilstm"));
    spec.repeats = json.value("repeats", std::size_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed experiment spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

Corpus assemble_training_corpus(const ExperimentSpec& spec, const DataLayout& data) {
  validate(spec);
  std::vector<Corpus> parts;
  for (Language l : spec.train_languages) {
    parts.push_back(data.load_language(l, Split::kTrain));
  }
  if (spec.shots > 0) {
    parts.push_back(sample_shots(data.load(spec.target, Split::kTrain), spec.shots,
                                 derive_seed(spec.seed, "shots")));
  }
  return merge(parts);
}

nlohmann::json to_json(const CellResult& result) {
  nlohmann::json out = {{"schema_version", 1},
                        {"cell", cell_id(result.spec)},
                        {"spec", to_json(result.spec)},
                        {"training_instances", result.training_instances},
                        {"target_language_training_instances",
                         result.target_language_training_instances},
                        {"dev", nullptr},
                        {"test", to_json(result.test)},
                        {"epoch_losses", result.epoch_losses},
                        {"dev_macro_f1_per_epoch", result.dev_macro_f1_per_epoch}};
  if (result.dev) out["dev"] = to_json(*result.dev);
  return out;
}

CellResult run_experiment(const ExperimentSpec& spec, const ExperimentContext& context) {
  validate(spec);
  if (context.data == nullptr) throw MissingResourceError("no data root configured");
  const DataLayout& data = *context.data;
  const bool bilstm = spec.model == "bilstm";
  const Language target_language = language_of(spec.target);
  if (bilstm) {
    if (context.space == nullptr) {
      throw MissingResourceError("the bilstm model needs shared-space embeddings");
    }
    for (Language l : spec.train_languages) context.space->table(l);
    context.space->table(target_language);
  }

  const bool has_dev = data.has(spec.target, Split::kDev);
  if (!has_dev && spec.target != Target::kFR) data.path_for(spec.target, Split::kDev);
  std::optional<Corpus> dev;
  if (has_dev) dev = data.load(spec.target, Split::kDev);
  const Corpus test = data.load(spec.target, Split::kTest);

  CellResult result;
  result.spec = spec;
  std::vector<EvalReport> dev_runs;
  std::vector<EvalReport> test_runs;

  for (std::size_t r = 0; r < spec.repeats; ++r) {
    ExperimentSpec run = spec;
    run.seed = repeat_seed(spec.seed, r);
    const Corpus training = assemble_training_corpus(run, data);
    std::size_t in_target = 0;
    for (const Instance& i : training.instances) {
      if (i.language == target_language) ++in_target;
    }
    if (r == 0) {
      result.training_instances = training.instances.size();
      result.target_language_training_instances = in_target;
    }

    if (bilstm) {
      const std::vector<TokenSequence> sequences = to_sequences(training);
      TaggerModel model = init_model(context.space->dim(), context.config.hidden,
                                     derive_seed(run.seed, "init"));
      model.threshold = context.config.threshold;
      TrainingConfig tc = context.config.training;
      tc.seed = derive_seed(run.seed, "train");
      EpochCallback on_epoch;
      if (r == 0 && dev) {
        on_epoch = [&](const EpochRecord&, const TaggerModel& current) {
          const BiLstmClassifier probe(current, *context.space, spec.model);
          result.dev_macro_f1_per_epoch.push_back(evaluate(probe, *dev).macro_f1);
        };
      }
      TrainResult trained = train(std::move(model), sequences, *context.space, tc, on_epoch);
      if (r == 0) {
        for (const EpochRecord& e : trained.epochs) result.epoch_losses.push_back(e.mean_loss);
        if (context.checkpoint_dir) {
          std::filesystem::create_directories(*context.checkpoint_dir);
          save_checkpoint_file(*context.checkpoint_dir / (cell_id(spec) + ".json"),
                               trained.model);
        }
      }
      const BiLstmClassifier classifier(std::move(trained.model), *context.space,
                                        spec.model);
      if (dev) dev_runs.push_back(evaluate(classifier, *dev));
      test_runs.push_back(evaluate(classifier, test));
    } else {
      if (dev) dev_runs.push_back(evaluate(*fixed_classifier(spec.model, *dev), *dev));
      test_runs.push_back(evaluate(*fixed_classifier(spec.model, test), test));
    }
  }

  if (dev) result.dev = combine(dev_runs, spec);
  result.test = combine(test_runs, spec);
  return result;
}

}  // namespace cwi
