#include "cwi/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "cwi/alignment.hpp"
#include "cwi/corpus.hpp"
#include "cwi/embeddings.hpp"
#include "cwi/error.hpp"
#include "cwi/evaluation.hpp"
#include "cwi/random.hpp"
#include "cwi/tagger.hpp"
#include "json.hpp"

namespace cwi {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct Cli::State {
  CLI::App app{"Cross-lingual complex word identification toolkit.", "cwi"};

  // Every flag is registered through add(); the key doubles as the
  // config-file key (dashes become underscores).
  std::map<std::string, std::vector<CLI::Option*>> options;

  std::string config_path;
  std::string data_root;
  std::string embeddings_root;
  std::string dictionaries_root;
  std::string output_dir = "out";
  std::string aligned_dir;
  std::uint64_t seed = 13;
  std::size_t max_vocab = kDefaultMaxVocab;
  bool serial = false;

  // alignment
  std::vector<std::string> align_languages = {"DE", "ES", "FR"};
  std::size_t refine_iterations = 5;
  std::size_t k_csls = 10;
  std::size_t anchor_top_n = 10000;

  // training and experiments
  std::vector<std::string> languages;
  std::vector<std::string> train_files;
  std::string target;
  std::size_t shots = 0;
  std::size_t hidden = 128;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 5e-5;
  double rho = 0.9;
  double epsilon = 1e-8;
  double gradient_clip = 5.0;
  bool no_clip = false;
  double threshold = 0.5;

  // corpus files
  std::vector<std::string> files;
  std::string input;
  std::string language;
  std::string genre;
  std::string split;

  // prediction and evaluation
  std::string model_path;
  std::string stub;
  std::string predictions;
  std::string output_name;

  // experiment
  std::string spec_path;
  std::string model_kind = "bilstm";
  std::size_t repeats = 1;
  bool full_grid = false;
  std::size_t parallelism = 0;
  bool save_checkpoints = false;

  CLI::App* stats = nullptr;
  CLI::App* align = nullptr;
  CLI::App* train = nullptr;
  CLI::App* predict = nullptr;
  CLI::App* eval = nullptr;
  CLI::App* experiment = nullptr;

  Json config;
  fs::path config_dir;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& value,
                   const std::string& description) {
    CLI::Option* o = app->add_option("--" + name, value, description);
    options[name].push_back(o);
    return o;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, bool& value,
                    const std::string& description) {
    CLI::Option* o = app->add_flag("--" + name, value, description);
    options[name].push_back(o);
    return o;
  }

  bool given(const std::string& name) const {
    const auto found = options.find(name);
    if (found == options.end()) return false;
    return std::any_of(found->second.begin(), found->second.end(),
                       [](const CLI::Option* o) { return o->count() > 0; });
  }

  const Json* config_value(const std::string& name) const {
    std::string key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    if (config.contains(key)) return &config[key];
    for (const char* section : {"training", "alignment", "experiment"}) {
      if (config.contains(section) && config[section].is_object() &&
          config[section].contains(key)) {
        return &config[section][key];
      }
    }
    return nullptr;
  }

  // Config values fill only the settings whose flag was not given.
  template <typename T>
  void merge(const std::string& name, T& value) {
    if (given(name)) return;
    const Json* v = config_value(name);
    if (v == nullptr) return;
    try {
      value = v->get<T>();
    } catch (const Json::exception& e) {
      throw ValidationError("config key '" + name + "': " + e.what());
    }
  }

  void merge_path(const std::string& name, std::string& value) {
    if (given(name)) return;
    const Json* v = config_value(name);
    if (v == nullptr) return;
    if (!v->is_string()) throw ValidationError("config key '" + name + "' must be a path");
    const fs::path p = v->get<std::string>();
    value = (p.is_relative() ? config_dir / p : p).lexically_normal().string();
  }

  void build();
  void load_config();

  int cmd_stats(std::ostream& out, std::ostream& err);
  int cmd_align(std::ostream& out, std::ostream& err);
  int cmd_train(std::ostream& out, std::ostream& err);
  int cmd_predict(std::ostream& out, std::ostream& err);
  int cmd_eval(std::ostream& out, std::ostream& err);
  int cmd_experiment(std::ostream& out, std::ostream& err);

  fs::path output_path() const;
  fs::path aligned_path() const;
  Execution execution() const { return serial ? Execution::kSerial : Execution::kParallel; }
  ExperimentConfig experiment_config() const;
  SharedSpace load_space(const std::set<Language>& languages) const;
  std::unique_ptr<InstanceClassifier> classifier_for(const Corpus& gold,
                                                     const SharedSpace* space) const;
  Corpus read_file(const fs::path& path, bool preprocess_it,
                   std::vector<std::string>* warnings) const;
};

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingResourceError("cannot write '" + path.string() + "'");
  out << text;
}

void require_dir(const std::string& path, const std::string& what) {
  if (path.empty()) {
    throw MissingResourceError(what + " is not configured (set --" + what +
                               " or the config key)");
  }
  if (!fs::is_directory(path)) {
    throw MissingResourceError(what + " '" + path + "' does not exist");
  }
}

std::set<Language> parse_languages(const std::vector<std::string>& names) {
  std::set<Language> out;
  for (const std::string& n : names) out.insert(parse_language(n));
  return out;
}

struct FileGuess {
  std::optional<Target> target;
  std::optional<Split> split;
};

// "News_Dev.tsv" -> (EN-N, dev); "French_Test.tsv" -> (FR, test).
FileGuess guess_from_name(const fs::path& path) {
  FileGuess guess;
  const std::string stem = lower(path.stem().string());
  const auto underscore = stem.rfind('_');
  if (underscore == std::string::npos) return guess;
  const std::string collection = stem.substr(0, underscore);
  const std::string split = stem.substr(underscore + 1);
  for (Target t : kAllTargets) {
    if (lower(std::string(collection_name(t))) == collection) guess.target = t;
  }
  try {
    guess.split = parse_split(split);
  } catch (const Error&) {
  }
  return guess;
}

std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t tab = line.find('\t', begin);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(begin));
      return fields;
    }
    fields.push_back(line.substr(begin, tab - begin));
    begin = tab + 1;
  }
}

// Probabilities per corpus instance index.
std::map<std::size_t, double> predict_all(const InstanceClassifier& classifier,
                                          const Corpus& corpus) {
  std::map<std::size_t, double> out;
  for (const TokenSequence& seq : to_sequences(corpus)) {
    const std::vector<double> p = classifier.predict_sequence(seq);
    std::size_t k = 0;
    for (const auto& [index, tokens] : seq.instance_refs) out[index] = p[k++];
  }
  return out;
}

Json stats_entry(const CorpusStats& s) {
  return {{"complex", s.complex}, {"noncomplex", s.noncomplex}, {"instances", s.instances}};
}

std::vector<ExperimentSpec> full_grid_specs(const Cli::State& st) {
  static const std::vector<std::set<Language>> combinations = {
      {Language::kEN},
      {Language::kDE},
      {Language::kES},
      {Language::kEN, Language::kDE},
      {Language::kEN, Language::kES},
      {Language::kDE, Language::kES},
      {Language::kEN, Language::kDE, Language::kES}};
  std::vector<ExperimentSpec> specs;
  for (const auto& combination : combinations) {
    for (Target t : kAllTargets) {
      ExperimentSpec spec{combination, t, st.shots, st.seed, st.model_kind, st.repeats};
      if (st.shots > 0) {
        const Language l = language_of(t);
        if (l == Language::kFR || combination.count(l) != 0) continue;
      }
      specs.push_back(spec);
    }
  }
  return specs;
}

}  // namespace

void Cli::State::build() {
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  app.add_option("--config", config_path,
                 "JSON config file; keys match flag names, flags given on the "
                 "command line win")
      ->check(CLI::ExistingFile);
  add(&app, "data-root", data_root, "Directory searched for <Collection>_<Split>.tsv files");
  add(&app, "embeddings-root", embeddings_root,
      "Directory holding fastText .vec files (wiki.<lang>.vec, cc.<lang>.300.vec or <lang>.vec)");
  add(&app, "dictionaries-root", dictionaries_root,
      "Directory holding bilingual dictionaries (<lang>-en.txt or en-<lang>.txt)");
  add(&app, "output-dir", output_dir, "Directory receiving every output (default: out)");
  add(&app, "aligned-dir", aligned_dir,
      "Directory of aligned <lang>.vec tables (default: <output-dir>/aligned)");
  add(&app, "seed", seed, "Top-level random seed; every component derives its own from it");
  add(&app, "max-vocab", max_vocab, "Rows loaded per embedding file (default: 200000)");
  flag(&app, "serial", serial, "Use the single-threaded reference kernels");

  stats = app.add_subcommand("stats", "Complex / non-complex counts per file and per language");
  stats->add_option("files", files, "TSV files; defaults to every collection under --data-root");
  add(stats, "language", language, "Language of the files when the name does not tell");
  add(stats, "genre", genre, "Genre of the files when the name does not tell");
  add(stats, "split", split, "Split of the files when the name does not tell");

  align = app.add_subcommand("align", "Map DE/ES/FR embeddings into the English space");
  add(align, "languages", align_languages, "Languages to align to English (default: DE,ES,FR)")
      ->delimiter(',');
  add(align, "refine-iterations", refine_iterations, "CSLS refinement rounds (default: 5)");
  add(align, "k-csls", k_csls, "Neighbourhood size of CSLS (default: 10)");
  add(align, "anchor-top-n", anchor_top_n,
      "Most frequent words considered when inducing anchors (default: 10000)");

  train = app.add_subcommand("train", "Train the BiLSTM tagger and write a checkpoint");
  experiment = app.add_subcommand("experiment", "Run experiment cells and build the results grid");
  for (CLI::App* sub : {train, experiment}) {
    add(sub, "languages", languages, "Training languages, e.g. EN,ES")->delimiter(',');
    add(sub, "target", target, "Target column: EN-W, EN-WN, EN-N, DE, ES or FR");
    add(sub, "shots", shots, "Target-language training instances to add (default: 0)");
    add(sub, "hidden", hidden, "LSTM hidden size per direction (default: 128)");
    add(sub, "epochs", epochs, "Training epochs (default: 5)");
    add(sub, "batch-size", batch_size, "Sequences per mini-batch (default: 32)");
    add(sub, "learning-rate", learning_rate, "RMSprop learning rate (default: 5e-5)");
    add(sub, "rho", rho, "RMSprop decay (default: 0.9)");
    add(sub, "epsilon", epsilon, "RMSprop epsilon (default: 1e-8)");
    add(sub, "gradient-clip", gradient_clip, "Global gradient norm limit (default: 5)");
    flag(sub, "no-clip", no_clip, "Disable gradient clipping");
    add(sub, "threshold", threshold, "Probability at or above which a span is complex (default: 0.5)");
  }
  add(train, "train-file", train_files,
      "Train on these TSV files instead of --languages (repeatable)");
  add(train, "output", output_name, "Checkpoint file name under --output-dir (default: model.json)");

  add(experiment, "spec", spec_path,
      "JSON file with a \"cells\" list of {train_languages, target, shots, seed, model, repeats}")
      ->check(CLI::ExistingFile);
  add(experiment, "model", model_kind, "bilstm, echo-gold or majority (default: bilstm)");
  add(experiment, "repeats", repeats, "Seeds averaged per cell (default: 1)");
  flag(experiment, "grid", full_grid,
       "Run every training combination against every target column");
  add(experiment, "parallelism", parallelism, "Cells run at once (default: all cores)");
  flag(experiment, "save-checkpoints", save_checkpoints,
       "Write each cell's model under <output-dir>/checkpoints");

  predict = app.add_subcommand("predict", "Append predicted label and probability to each line");
  eval = app.add_subcommand("eval", "Macro-F1 report for predictions or a model");
  for (CLI::App* sub : {predict, eval}) {
    add(sub, "model", model_path, "Tagger checkpoint written by `train`");
    add(sub, "stub", stub, "Built-in model instead: echo-gold, majority, random or constant:<p>");
    add(sub, "input", input, "Annotated TSV file to score");
    add(sub, "language", language, "Language of --input when the name does not tell");
    add(sub, "genre", genre, "Genre of --input when the name does not tell");
    add(sub, "split", split, "Split of --input when the name does not tell");
  }
  add(predict, "output", output_name,
      "Predictions file name under --output-dir (default: predictions.tsv)");
  add(eval, "predictions", predictions, "Predictions TSV written by `predict`");
  add(eval, "target", target, "Target column recorded in the report");
  add(eval, "output", output_name, "Report file name under --output-dir (default: eval_report.json)");
}

void Cli::State::load_config() {
  if (config_path.empty()) return;
  std::ifstream in(config_path);
  if (!in) throw MissingResourceError("cannot open config '" + config_path + "'");
  try {
    in >> config;
  } catch (const Json::exception& e) {
    throw ParseError("config '" + config_path + "' is not valid JSON: " + e.what());
  }
  if (!config.is_object()) throw ValidationError("config must be a JSON object");
  config_dir = fs::path(config_path).parent_path();

  merge_path("data-root", data_root);
  merge_path("embeddings-root", embeddings_root);
  merge_path("dictionaries-root", dictionaries_root);
  merge_path("output-dir", output_dir);
  merge_path("aligned-dir", aligned_dir);
  merge("seed", seed);
  merge("max-vocab", max_vocab);
  merge("serial", serial);
  merge("refine-iterations", refine_iterations);
  merge("k-csls", k_csls);
  merge("anchor-top-n", anchor_top_n);
  merge("hidden", hidden);
  merge("epochs", epochs);
  merge("batch-size", batch_size);
  merge("learning-rate", learning_rate);
  merge("rho", rho);
  merge("epsilon", epsilon);
  merge("threshold", threshold);
  merge("parallelism", parallelism);
  merge("target", target);
  merge("shots", shots);
  merge("repeats", repeats);
  if (experiment->parsed()) merge("model", model_kind);
  if (!given("languages")) {
    // Either ["EN", "ES"] or "EN,ES".
    if (const Json* v = config_value("languages")) {
      std::vector<std::string>& dest = align->parsed() ? align_languages : languages;
      if (v->is_string()) {
        dest.clear();
        std::stringstream list(v->get<std::string>());
        for (std::string item; std::getline(list, item, ',');) dest.push_back(item);
      } else {
        merge("languages", dest);
      }
    }
  }
  if (!given("gradient-clip") && !given("no-clip")) {
    if (const Json* v = config_value("gradient-clip")) {
      if (v->is_null()) {
        no_clip = true;
      } else {
        merge("gradient-clip", gradient_clip);
      }
    }
  }
}

fs::path Cli::State::output_path() const {
  fs::create_directories(output_dir);
  return output_dir;
}

fs::path Cli::State::aligned_path() const {
  return aligned_dir.empty() ? fs::path(output_dir) / "aligned" : fs::path(aligned_dir);
}

ExperimentConfig Cli::State::experiment_config() const {
  ExperimentConfig c;
  c.hidden = hidden;
  c.threshold = threshold;
  c.training.learning_rate = learning_rate;
  c.training.epochs = epochs;
  c.training.batch_size = batch_size;
  c.training.rho = rho;
  c.training.epsilon = epsilon;
  c.training.seed = seed;
  c.training.gradient_clip =
      no_clip ? std::nullopt : std::optional<double>(gradient_clip);
  c.training.execution = execution();
  validate(c.training);
  if (hidden < 1) throw ValidationError("hidden size must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("threshold must lie in (0, 1)");
  }
  return c;
}

SharedSpace Cli::State::load_space(const std::set<Language>& needed) const {
  const fs::path dir = aligned_path();
  std::map<Language, EmbeddingTable> tables;
  for (Language l : needed) {
    const fs::path path = dir / (lower(std::string(to_string(l))) + ".vec");
    if (!fs::exists(path)) {
      throw MissingResourceError("no aligned embeddings for " + std::string(to_string(l)) +
                                 " at '" + path.string() + "'; run `cwi align` first");
    }
    tables.emplace(l, load_vec_file(path, max_vocab, l));
  }
  return SharedSpace(std::move(tables));
}

Corpus Cli::State::read_file(const fs::path& path, bool preprocess_it,
                             std::vector<std::string>* warnings) const {
  const FileGuess guess = guess_from_name(path);
  std::optional<Language> lang;
  std::optional<Genre> gen;
  if (!language.empty()) lang = parse_language(language);
  if (!genre.empty()) gen = parse_genre(genre);
  if (!lang && guess.target) lang = language_of(*guess.target);
  if (!gen && guess.target) gen = genre_of(*guess.target);
  if (!lang) {
    throw ValidationError("cannot tell the language of '" + path.string() +
                          "'; pass --language");
  }
  if (!gen) gen = *lang == Language::kEN ? Genre::kNews : Genre::kWikipedia;
  Split sp = Split::kTest;
  if (!split.empty()) {
    sp = parse_split(split);
  } else if (guess.split) {
    sp = *guess.split;
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingResourceError("cannot open '" + path.string() + "'");
  try {
    Corpus parsed = parse_tsv(in, *lang, *gen, sp, warnings);
    if (!preprocess_it) return parsed;
    PreprocessResult r = preprocess(parsed);
    if (r.dropped > 0 && warnings != nullptr) {
      warnings->push_back(std::to_string(r.dropped) +
                          " instances dropped by preprocessing (span touched removed characters)");
    }
    return std::move(r.corpus);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::unique_ptr<InstanceClassifier> Cli::State::classifier_for(
    const Corpus& gold, const SharedSpace* space) const {
  if (!stub.empty()) {
    if (stub == "echo-gold") return std::make_unique<EchoGoldClassifier>(gold);
    if (stub == "majority") return std::make_unique<ConstantClassifier>(0.0);
    if (stub == "random") return std::make_unique<RandomClassifier>(seed);
    if (stub.rfind("constant:", 0) == 0) {
      double p = 0.0;
      try {
        p = std::stod(stub.substr(9));
      } catch (const std::exception&) {
        throw ValidationError("bad stub '" + stub + "'");
      }
      return std::make_unique<ConstantClassifier>(p);
    }
    throw ValidationError("unknown stub '" + stub +
                          "' (echo-gold, majority, random or constant:<p>)");
  }
  TaggerModel model = load_checkpoint_file(model_path);
  return std::make_unique<BiLstmClassifier>(std::move(model), *space);
}

int Cli::State::cmd_stats(std::ostream& out, std::ostream& err) {
  std::vector<fs::path> paths(files.begin(), files.end());
  if (paths.empty()) {
    require_dir(data_root, "data-root");
    const DataLayout layout(data_root);
    for (Target t : kAllTargets) {
      for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
        if (layout.has(t, s)) paths.push_back(layout.path_for(t, s));
      }
    }
    if (paths.empty()) {
      throw MissingResourceError("no <Collection>_<Split>.tsv files under '" + data_root + "'");
    }
  }

  Json per_file = Json::array();
  std::map<Language, CorpusStats> per_language;
  std::map<Language, std::pair<std::size_t, std::size_t>> token_counts;
  CorpusStats total;
  for (const fs::path& path : paths) {
    std::vector<std::string> warnings;
    const Corpus corpus = read_file(path, false, &warnings);
    for (const std::string& w : warnings) err << path.string() << ": warning: " << w << '\n';
    const CorpusStats s = cwi::stats(corpus);
    Json entry = stats_entry(s);
    entry["path"] = path.string();
    entry["language"] = to_string(corpus.language);
    entry["genre"] = to_string(corpus.genre);
    entry["split"] = to_string(corpus.split);

    // Token-level view: tokens of distinct sentences, labelled by overlap.
    std::size_t tc = 0;
    std::size_t tn = 0;
    try {
      for (const TokenSequence& seq : to_sequences(preprocess(corpus).corpus)) {
        for (int label : seq.labels) label == 1 ? ++tc : ++tn;
      }
      entry["tokens_complex"] = tc;
      entry["tokens_noncomplex"] = tn;
      token_counts[corpus.language].first += tc;
      token_counts[corpus.language].second += tn;
    } catch (const Error& e) {
      err << path.string() << ": warning: no token counts: " << e.what() << '\n';
      entry["tokens_complex"] = nullptr;
      entry["tokens_noncomplex"] = nullptr;
    }
    per_file.push_back(std::move(entry));
    per_language[corpus.language] += s;
    total += s;
  }
  Json languages = Json::object();
  for (const auto& [l, s] : per_language) {
    Json entry = stats_entry(s);
    entry["tokens_complex"] = token_counts[l].first;
    entry["tokens_noncomplex"] = token_counts[l].second;
    languages[std::string(to_string(l))] = std::move(entry);
  }
  const Json doc = {{"schema_version", 1},
                    {"files", per_file},
                    {"languages", languages},
                    {"total", stats_entry(total)}};
  out << doc.dump(2) << '\n';
  return 0;
}

int Cli::State::cmd_align(std::ostream& out, std::ostream& err) {
  require_dir(embeddings_root, "embeddings-root");
  require_dir(dictionaries_root, "dictionaries-root");
  const std::set<Language> sources = parse_languages(align_languages);
  if (sources.count(Language::kEN) != 0) {
    throw ValidationError("English is the pivot; list only the languages to map into it");
  }

  auto find_vec = [&](Language l) {
    const std::string code = lower(std::string(to_string(l)));
    std::vector<fs::path> tried;
    for (const std::string& name :
         {"wiki." + code + ".vec", "cc." + code + ".300.vec", code + ".vec"}) {
      tried.push_back(fs::path(embeddings_root) / name);
      if (fs::exists(tried.back())) return tried.back();
    }
    std::string message = "no embeddings for " + std::string(to_string(l)) + "; looked for";
    for (const auto& p : tried) message += " '" + p.string() + "'";
    throw MissingResourceError(message);
  };
  // Resolve every input before loading anything.
  std::map<Language, fs::path> vec_paths;
  std::map<Language, std::pair<fs::path, bool>> dict_paths;  // bool: EN on the left
  vec_paths[Language::kEN] = find_vec(Language::kEN);
  for (Language l : sources) {
    vec_paths[l] = find_vec(l);
    const std::string code = lower(std::string(to_string(l)));
    std::vector<std::pair<fs::path, bool>> candidates = {
        {fs::path(dictionaries_root) / (code + "-en.txt"), false},
        {fs::path(dictionaries_root) / ("en-" + code + ".txt"), true},
        {fs::path(dictionaries_root) / (code + "-en.0-5000.txt"), false},
        {fs::path(dictionaries_root) / ("en-" + code + ".0-5000.txt"), true}};
    bool found = false;
    for (const auto& c : candidates) {
      if (fs::exists(c.first)) {
        dict_paths[l] = c;
        found = true;
        break;
      }
    }
    if (!found) {
      std::string message = "no dictionary between " + std::string(to_string(l)) +
                            " and EN; looked for";
      for (const auto& c : candidates) message += " '" + c.first.string() + "'";
      throw MissingResourceError(message);
    }
  }

  std::map<Language, EmbeddingTable> tables;
  for (const auto& [l, path] : vec_paths) {
    LoadReport report;
    tables.emplace(l, normalize(load_vec_file(path, max_vocab, l, &report)));
    for (const std::string& w : report.warnings) err << path.string() << ": warning: " << w << '\n';
  }
  std::map<Language, BilingualDictionary> dictionaries;
  for (const auto& [l, entry] : dict_paths) {
    const auto& [path, en_first] = entry;
    dictionaries.emplace(l, en_first ? load_dictionary_file(path, Language::kEN, l)
                                     : load_dictionary_file(path, l, Language::kEN));
  }

  RefinementConfig rc;
  rc.iterations = refine_iterations;
  rc.k_csls = k_csls;
  rc.anchor_top_n = anchor_top_n;
  rc.execution = execution();
  const PivotResult result = chain_to_pivot(tables, dictionaries, rc);

  const fs::path dir = aligned_path();
  fs::create_directories(dir);
  for (const auto& [l, table] : result.tables) {
    write_vec_file(dir / (lower(std::string(to_string(l))) + ".vec"), table);
  }
  Json maps = Json::array();
  for (const auto& [l, map] : result.maps) maps.push_back(fit_report_json(map));
  const Json doc = {{"schema_version", 1},
                    {"pivot", "EN"},
                    {"aligned_dir", dir.string()},
                    {"maps", maps}};
  write_text(output_path() / "alignment_report.json", doc.dump(2) + "\n");
  out << doc.dump(2) << '\n';
  return 0;
}

int Cli::State::cmd_train(std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = experiment_config();
  Corpus training;
  std::set<Language> needed;
  if (!train_files.empty()) {
    if (!languages.empty()) throw ValidationError("give --languages or --train-file, not both");
    std::vector<Corpus> parts;
    for (const std::string& f : train_files) {
      std::vector<std::string> warnings;
      parts.push_back(read_file(f, true, &warnings));
      for (const std::string& w : warnings) err << f << ": warning: " << w << '\n';
      needed.insert(parts.back().language);
    }
    training = cwi::merge(parts);
  } else {
    if (languages.empty()) throw ValidationError("--languages or --train-file is required");
    require_dir(data_root, "data-root");
    ExperimentSpec spec;
    spec.train_languages = parse_languages(languages);
    spec.target = target.empty() ? Target::kDE : parse_target(target);
    if (shots > 0 && target.empty()) throw ValidationError("--shots needs --target");
    spec.shots = shots;
    spec.seed = seed;
    validate(spec);
    needed = spec.train_languages;
    if (shots > 0) needed.insert(language_of(spec.target));
    const DataLayout layout(data_root);
    training = assemble_training_corpus(spec, layout);
  }
  const SharedSpace space = load_space(needed);
  const std::vector<TokenSequence> sequences = to_sequences(training);

  TaggerModel model = init_model(space.dim(), config.hidden, derive_seed(seed, "init"));
  model.threshold = config.threshold;
  TrainingConfig tc = config.training;
  tc.seed = derive_seed(seed, "train");

  const fs::path dir = output_path();
  std::ofstream log(dir / "train_log.jsonl");
  if (!log) throw MissingResourceError("cannot write '" + (dir / "train_log.jsonl").string() + "'");
  const TrainResult result =
      cwi::train(std::move(model), sequences, space, tc, [&](const EpochRecord& r, const TaggerModel&) {
        const Json line = {{"schema_version", 1},
                           {"epoch", r.epoch},
                           {"mean_loss", r.mean_loss},
                           {"wall_seconds", r.wall_seconds}};
        log << line.dump() << '\n';
        err << "epoch " << r.epoch << ": loss " << r.mean_loss << '\n';
      });
  const fs::path checkpoint = dir / (output_name.empty() ? "model.json" : output_name);
  save_checkpoint_file(checkpoint, result.model);

  Json losses = Json::array();
  for (const EpochRecord& r : result.epochs) losses.push_back(r.mean_loss);
  const Json doc = {{"schema_version", 1},
                    {"checkpoint", checkpoint.string()},
                    {"training_instances", training.instances.size()},
                    {"training_sequences", sequences.size()},
                    {"epoch_losses", losses}};
  out << doc.dump(2) << '\n';
  return 0;
}

namespace {

void require_model_choice(const std::string& model_path, const std::string& stub) {
  if (model_path.empty() == stub.empty()) {
    throw ValidationError("give exactly one of --model or --stub");
  }
}

}  // namespace

int Cli::State::cmd_predict(std::ostream& out, std::ostream& err) {
  require_model_choice(model_path, stub);
  if (input.empty()) throw ValidationError("--input is required");
  if (!model_path.empty() && !fs::exists(model_path)) {
    throw MissingResourceError("checkpoint '" + model_path + "' does not exist");
  }
  std::vector<std::string> warnings;
  const Corpus corpus = read_file(input, true, &warnings);
  for (const std::string& w : warnings) err << input << ": warning: " << w << '\n';

  std::optional<SharedSpace> space;
  if (stub.empty()) space = load_space({corpus.language});
  const auto classifier = classifier_for(corpus, space ? &*space : nullptr);
  const std::map<std::size_t, double> probabilities = predict_all(*classifier, corpus);

  std::vector<std::string> lines;
  {
    std::ifstream in(input, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  std::ostringstream body;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
    const Instance& instance = corpus.instances[i];
    const InstancePrediction p =
        threshold_probability(probabilities.at(i), classifier->threshold());
    body << lines.at(instance.line - 1) << '\t' << p.label << '\t'
         << format_probability(p.probability) << '\n';
  }
  const fs::path path = output_path() / (output_name.empty() ? "predictions.tsv" : output_name);
  write_text(path, body.str());
  out << Json({{"schema_version", 1},
               {"predictions", path.string()},
               {"instances", corpus.instances.size()},
               {"model_id", classifier->id()}})
             .dump(2)
      << '\n';
  return 0;
}

int Cli::State::cmd_eval(std::ostream& out, std::ostream& err) {
  EvalReport report;
  if (!predictions.empty()) {
    if (!model_path.empty() || !stub.empty() || !input.empty()) {
      throw ValidationError("--predictions excludes --model, --stub and --input");
    }
    std::ifstream in(predictions, std::ios::binary);
    if (!in) throw MissingResourceError("cannot open predictions '" + predictions + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::vector<std::string> fields = split_tabs(line);
      if (fields.size() != 13) {
        throw ParseError(predictions + ": expected 13 fields, found " +
                             std::to_string(fields.size()),
                         line_no);
      }
      auto label = [&](const std::string& text, const char* what) {
        if (text != "0" && text != "1") {
          throw ParseError(predictions + ": " + what + " must be 0 or 1", line_no);
        }
        return text == "1" ? 1 : 0;
      };
      report.counts.add(label(fields[9], "gold label"), label(fields[11], "predicted label"));
    }
    report.model_id = "predictions";
    report.split = split.empty() ? Split::kTest : parse_split(split);
    report.f1_complex = f1_for_class(report.counts, PositiveClass::kComplex);
    report.f1_noncomplex = f1_for_class(report.counts, PositiveClass::kNonComplex);
    report.macro_f1 = (report.f1_complex + report.f1_noncomplex) / 2.0;
  } else {
    require_model_choice(model_path, stub);
    if (input.empty()) throw ValidationError("--input or --predictions is required");
    if (!model_path.empty() && !fs::exists(model_path)) {
      throw MissingResourceError("checkpoint '" + model_path + "' does not exist");
    }
    std::vector<std::string> warnings;
    const Corpus corpus = read_file(input, true, &warnings);
    for (const std::string& w : warnings) err << input << ": warning: " << w << '\n';
    std::optional<SharedSpace> space;
    if (stub.empty()) space = load_space({corpus.language});
    const auto classifier = classifier_for(corpus, space ? &*space : nullptr);
    report = evaluate(*classifier, corpus);
    if (target.empty()) {
      const FileGuess guess = guess_from_name(input);
      if (guess.target) report.target = std::string(to_string(*guess.target));
    }
  }
  if (!target.empty()) report.target = std::string(to_string(parse_target(target)));
  report.seed = seed;
  const Json doc = to_json(report);
  write_text(output_path() / (output_name.empty() ? "eval_report.json" : output_name),
             doc.dump(2) + "\n");
  out << doc.dump(2) << '\n';
  return 0;
}

int Cli::State::cmd_experiment(std::ostream& out, std::ostream& err) {
  std::vector<ExperimentSpec> specs;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw MissingResourceError("cannot open spec '" + spec_path + "'");
    Json doc;
    try {
      in >> doc;
    } catch (const Json::exception& e) {
      throw ParseError("spec '" + spec_path + "' is not valid JSON: " + e.what());
    }
    const Json cells = doc.is_array() ? doc : doc.is_object() && doc.contains("cells")
                                                  ? doc["cells"]
                                                  : Json::array({doc});
    for (Json cell : cells) {
      if (!cell.contains("seed")) cell["seed"] = seed;
      if (!cell.contains("model")) cell["model"] = model_kind;
      if (!cell.contains("repeats")) cell["repeats"] = repeats;
      specs.push_back(spec_from_json(cell));
    }
  } else if (config.contains("cells") && !full_grid && languages.empty()) {
    for (Json cell : config["cells"]) {
      if (!cell.contains("seed")) cell["seed"] = seed;
      if (!cell.contains("model")) cell["model"] = model_kind;
      if (!cell.contains("repeats")) cell["repeats"] = repeats;
      specs.push_back(spec_from_json(cell));
    }
  } else if (full_grid) {
    specs = full_grid_specs(*this);
  } else {
    if (languages.empty() || target.empty()) {
      throw ValidationError("give --spec, --grid, or --languages with --target");
    }
    specs.push_back({parse_languages(languages), parse_target(target), shots, seed,
                     model_kind, repeats});
    validate(specs.back());
  }
  if (specs.empty()) throw ValidationError("no experiment cells to run");

  require_dir(data_root, "data-root");
  const DataLayout layout(data_root);
  ExperimentContext context;
  context.data = &layout;
  context.config = experiment_config();

  std::set<Language> needed;
  for (const ExperimentSpec& s : specs) {
    if (s.model != "bilstm") continue;
    needed.insert(s.train_languages.begin(), s.train_languages.end());
    needed.insert(language_of(s.target));
  }
  std::optional<SharedSpace> space;
  if (!needed.empty()) {
    space = load_space(needed);
    context.space = &*space;
  }
  const fs::path dir = output_path();
  if (save_checkpoints) context.checkpoint_dir = dir / "checkpoints";

  const GridRun run = run_grid(specs, context, parallelism);
  std::ostringstream reports;
  for (const auto& r : run.results) {
    if (r) reports << to_json(*r).dump() << '\n';
  }
  write_text(dir / "reports.jsonl", reports.str());
  write_text(dir / "grid.json", to_json(run.table).dump(2) + "\n");
  const std::string text = render_text(run.table);
  write_text(dir / "grid.txt", text);
  out << text;
  for (const std::string& e : run.errors) err << "cell failed: " << e << '\n';
  return run.exit_code;
}

Cli::Cli() : state_(std::make_unique<State>()) { state_->build(); }

Cli::~Cli() = default;

CLI::App& Cli::app() { return state_->app; }

int Cli::run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  State& st = *state_;
  try {
    st.app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = st.app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }
  try {
    st.load_config();
    if (st.stats->parsed()) return st.cmd_stats(out, err);
    if (st.align->parsed()) return st.cmd_align(out, err);
    if (st.train->parsed()) return st.cmd_train(out, err);
    if (st.predict->parsed()) return st.cmd_predict(out, err);
    if (st.eval->parsed()) return st.cmd_eval(out, err);
    if (st.experiment->parsed()) return st.cmd_experiment(out, err);
    return static_cast<int>(ExitCode::kValidation);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kMissingResource);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kValidation);
  }
}

int Cli::run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run_cli(int argc, const char* const* argv) {
  Cli cli;
  return cli.run(argc, argv, std::cout, std::cerr);
}

}  // namespace cwi
