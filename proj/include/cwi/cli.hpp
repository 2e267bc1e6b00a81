#ifndef CWI_CLI_HPP
#define CWI_CLI_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace cwi {

// Command-line front end: stats | align | train | predict | eval | experiment.
// Options come from an optional JSON --config file; flags given on the
// command line win.
class Cli {
 public:
  Cli();
  ~Cli();

  // Returns the process exit code: 0 success, 1 invalid input, 2 missing
  // resource, 3 numerical failure.
  int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
  int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

  CLI::App& app();

  struct State;

 private:
  std::unique_ptr<State> state_;
};

int run_cli(int argc, const char* const* argv);

}  // namespace cwi

#endif  // CWI_CLI_HPP
