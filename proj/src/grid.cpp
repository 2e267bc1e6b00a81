#include <algorithm>
#include <cstdio>
#include <omp.h>
#include <set>
#include <sstream>
#include <tuple>

#include "cwi/error.hpp"
#include "cwi/evaluation.hpp"

namespace cwi {

namespace {

// Canonical row order of the training-language combinations.
int combination_rank(const std::set<Language>& languages) {
  static const std::vector<std::set<Language>> order = {
      {Language::kEN},
      {Language::kDE},
      {Language::kES},
      {Language::kEN, Language::kDE},
      {Language::kEN, Language::kES},
      {Language::kDE, Language::kES},
      {Language::kEN, Language::kDE, Language::kES}};
  const auto found = std::find(order.begin(), order.end(), languages);
  return static_cast<int>(found - order.begin());
}

struct RowKey {
  int rank;
  std::size_t shots;
  std::string label;
  bool operator<(const RowKey& o) const {
    return std::tie(rank, shots, label) < std::tie(o.rank, o.shots, o.label);
  }
};

enum class Group { kZeroShot, kMonolingual, kFewShot, kOther };

Group group_of(const ExperimentSpec& spec) {
  const Language target = language_of(spec.target);
  if (spec.shots > 0) return Group::kFewShot;
  if (spec.train_languages.count(target) == 0) return Group::kZeroShot;
  if (spec.train_languages.size() == 1) return Group::kMonolingual;
  return Group::kOther;
}

struct Entry {
  const CellResult* result;
  GridCell* cell;
};

// Marks the maxima of `value` within each group of entries; ties share a mark.
template <typename Value, typename Mark>
void mark_maxima(std::vector<Entry>& entries, Value value, Mark mark) {
  std::map<std::pair<int, std::size_t>, double> best;
  for (const Entry& e : entries) {
    const auto v = value(*e.cell);
    if (!v) continue;
    const Group g = group_of(e.result->spec);
    if (g == Group::kOther) continue;
    const std::pair<int, std::size_t> key{static_cast<int>(g),
                                          g == Group::kFewShot ? e.result->spec.shots : 0};
    const auto found = best.find(key);
    if (found == best.end() || *v > found->second) best[key] = *v;
  }
  for (Entry& e : entries) {
    const auto v = value(*e.cell);
    if (!v) continue;
    const Group g = group_of(e.result->spec);
    if (g == Group::kOther) continue;
    const std::pair<int, std::size_t> key{static_cast<int>(g),
                                          g == Group::kFewShot ? e.result->spec.shots : 0};
    if (*v == best.at(key)) mark(*e.cell, g);
  }
}

void set_mark(GridMarks& marks, Group g) {
  if (g == Group::kZeroShot) marks.best_zero_shot = true;
  if (g == Group::kMonolingual) marks.best_monolingual = true;
  if (g == Group::kFewShot) marks.best_few_shot = true;
}

nlohmann::json marks_json(const GridMarks& m) {
  return {{"best_zero_shot", m.best_zero_shot},
          {"best_monolingual", m.best_monolingual},
          {"best_few_shot", m.best_few_shot}};
}

std::string format_value(double v, const GridMarks& m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string out = buf;
  out += (m.best_zero_shot || m.best_few_shot) ? '*' : ' ';
  out += m.best_monolingual ? '_' : ' ';
  return out;
}

std::string pad(const std::string& text, std::size_t width, bool left) {
  if (text.size() >= width) return text;
  const std::string fill(width - text.size(), ' ');
  return left ? text + fill : fill + text;
}

}  // namespace

GridTable build_grid(std::span<const CellResult> results) {
  GridTable table;
  std::set<RowKey> row_keys;
  std::set<Target> columns;
  std::vector<Entry> entries;
  for (const CellResult& r : results) {
    const std::string row = row_label(r.spec);
    const auto key = std::make_pair(row, r.spec.target);
    if (table.cells.count(key) != 0) {
      throw ValidationError("duplicate grid cell (" + row + ", " +
                            std::string(to_string(r.spec.target)) + ")");
    }
    GridCell& cell = table.cells[key];
    if (r.dev) cell.dev = r.dev->macro_f1;
    cell.test = r.test.macro_f1;
    row_keys.insert({combination_rank(r.spec.train_languages), r.spec.shots, row});
    columns.insert(r.spec.target);
    entries.push_back({&r, &cell});
  }
  for (const RowKey& k : row_keys) table.rows.push_back(k.label);
  for (Target t : kAllTargets) {
    if (columns.count(t) != 0) table.columns.push_back(t);
  }

  for (Target t : table.columns) {
    std::vector<Entry> column;
    for (const Entry& e : entries) {
      if (e.result->spec.target == t) column.push_back(e);
    }
    mark_maxima(
        column, [](const GridCell& c) { return c.dev; },
        [](GridCell& c, Group g) { set_mark(c.dev_marks, g); });
    mark_maxima(
        column, [](const GridCell& c) { return std::optional<double>(c.test); },
        [](GridCell& c, Group g) { set_mark(c.test_marks, g); });
  }
  return table;
}

nlohmann::json to_json(const GridTable& table) {
  nlohmann::json columns = nlohmann::json::array();
  for (Target t : table.columns) columns.push_back(to_string(t));
  nlohmann::json cells = nlohmann::json::array();
  for (const std::string& row : table.rows) {
    for (Target t : table.columns) {
      const auto found = table.cells.find({row, t});
      if (found == table.cells.end()) continue;
      const GridCell& c = found->second;
      cells.push_back({{"row", row},
                       {"target", to_string(t)},
                       {"dev", c.dev ? nlohmann::json(*c.dev) : nlohmann::json(nullptr)},
                       {"test", c.test},
                       {"dev_marks", marks_json(c.dev_marks)},
                       {"test_marks", marks_json(c.test_marks)}});
    }
  }
  return {{"schema_version", 1},
          {"rows", table.rows},
          {"columns", columns},
          {"cells", cells}};
}

std::string render_text(const GridTable& table) {
  std::size_t row_width = 5;
  for (const std::string& r : table.rows) row_width = std::max(row_width, r.size());
  constexpr std::size_t kCell = 8;

  std::ostringstream out;
  for (const Split split : {Split::kDev, Split::kTest}) {
    out << "[" << to_string(split) << "]\n";
    out << pad("train", row_width, true);
    for (Target t : table.columns) out << "  " << pad(std::string(to_string(t)), kCell, true);
    out << '\n';
    for (const std::string& row : table.rows) {
      out << pad(row, row_width, true);
      for (Target t : table.columns) {
        std::string text = "-";
        const auto found = table.cells.find({row, t});
        if (found != table.cells.end()) {
          const GridCell& c = found->second;
          if (split == Split::kTest) {
            text = format_value(c.test, c.test_marks);
          } else {
            text = c.dev ? format_value(*c.dev, c.dev_marks) : "n/a";
          }
        }
        out << "  " << pad(text, kCell, true);
      }
      out << '\n';
    }
    out << '\n';
  }
  out << "* best zero-shot (or best at that shot count)  _ best monolingual\n";
  return out.str();
}

GridRun run_grid(const std::vector<ExperimentSpec>& specs, const ExperimentContext& context,
                 std::size_t parallelism) {
  if (specs.empty()) throw ValidationError("experiment grid is empty");
  std::set<std::pair<std::string, Target>> seen;
  for (const ExperimentSpec& s : specs) {
    validate(s);
    if (!seen.insert({row_label(s), s.target}).second) {
      throw ValidationError("duplicate grid cell (" + row_label(s) + ", " +
                            std::string(to_string(s.target)) + ")");
    }
  }

  GridRun run;
  run.results.resize(specs.size());
  std::vector<std::string> failures(specs.size());
  std::vector<int> codes(specs.size(), 0);
  const int workers = parallelism == 0 ? omp_get_num_procs() : static_cast<int>(parallelism);
  const long n = static_cast<long>(specs.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long i = 0; i < n; ++i) {
    const ExperimentSpec& spec = specs[static_cast<std::size_t>(i)];
    try {
      run.results[static_cast<std::size_t>(i)] = run_experiment(spec, context);
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(i)] = cell_id(spec) + ": " + e.what();
      codes[static_cast<std::size_t>(i)] = static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = cell_id(spec) + ": " + e.what();
      codes[static_cast<std::size_t>(i)] = static_cast<int>(ExitCode::kValidation);
    }
  }

  std::vector<CellResult> done;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (run.results[i]) done.push_back(*run.results[i]);
    if (!failures[i].empty()) run.errors.push_back(failures[i]);
    run.exit_code = std::max(run.exit_code, codes[i]);
  }
  run.table = build_grid(done);
  return run;
}

}  // namespace cwi
