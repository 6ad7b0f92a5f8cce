#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psychkit/dataset.hpp"
#include "psychkit/serialize.hpp"

namespace psychkit::report {

inline constexpr const char* kToolVersion = "0.1.0";

struct ReportOptions {
    std::filesystem::path input;
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> group;  // overrides grouping_variable
    std::filesystem::path out_dir = "report";
};

struct Failure {
    std::string module;
    std::string message;
};

struct ReportOutcome {
    io::Json report;
    std::vector<Failure> failures;
    bool ok() const { return failures.empty(); }
};

/// Runs dataset, CTT, inference, IRT, DIF and proficiency stages and writes
/// report.json, report.meta.json and CSV sidecars into `out_dir`. Failures
/// are collected (and written to failures.json) rather than thrown.
ReportOutcome run_report(const ReportOptions& options);

/// Same pipeline on an already loaded matrix; writes nothing.
ReportOutcome build_report(const ResponseMatrix& matrix, const AnalysisConfig& config);

}  // namespace psychkit::report
