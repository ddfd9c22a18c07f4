#pragma once

// Command-line front end. Parsing and dispatch live behind run() so the test
// suite can drive commands in-process; main() is a thin wrapper.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <string>
#include <vector>

namespace harmcot {
namespace cli {

int run(const std::vector<std::string>& args);

// Collects evaluation reports under run_dir into a comparison table
// (table.csv: rows = runs, columns = accuracy/precision/recall/f1) and
// copies any sweep CSVs up as plot-ready files. Idempotent.
void emit_report(const std::string& run_dir);

}  // namespace cli
}  // namespace harmcot
