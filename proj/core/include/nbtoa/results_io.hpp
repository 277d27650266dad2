#pragma once

#include <filesystem>
#include <string>

#include "nbtoa/harness.hpp"
#include "nbtoa/theory.hpp"

namespace nbtoa::io {

/// One JSON object per line, sorted by packet_id.
[[nodiscard]] std::string records_jsonl(const harness::ExperimentResult& result);
[[nodiscard]] std::string summary_json(const harness::ExperimentResult& result);

/// Writes records.jsonl, summary.json and the plot CSVs into out_dir. Records are flushed
/// before the summary so a failure later leaves them on disk.
void write_experiment(const harness::ExperimentResult& result, const std::filesystem::path& out_dir);

[[nodiscard]] std::string metric_study_json(const harness::MetricStudy& study);

[[nodiscard]] std::string theory_suite_json(const theory::SuiteResult& suite);
[[nodiscard]] std::string theory_suite_table(const theory::SuiteResult& suite);

} // namespace nbtoa::io
