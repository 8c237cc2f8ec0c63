#pragma once

#include <string>
#include <vector>

namespace imm {

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;  // measured values against their thresholds
    double seconds = 0.0;
};

// Names in execution order. The first seven are fast property suites; the
// last three (end_to_end, particles, determinism) run real training.
std::vector<std::string> verify_suite_names();

// Runs the selected suites (empty filter = all) and reports one result each.
// Unknown filter names throw DomainError. A suite that throws is reported as
// a failure with the exception text; run_verify itself only throws on bad
// filters.
std::vector<SuiteResult> run_verify(const std::vector<std::string>& filters);

}  // namespace imm
