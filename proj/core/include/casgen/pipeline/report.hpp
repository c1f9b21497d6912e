#pragma once

#include "casgen/hpo/fanova.hpp"
#include "casgen/pipeline/stages.hpp"

#include <string>
#include <vector>

namespace casgen::pipeline {

/// Stage rows ("After 1." .. "After 4.") with CAS, wall-clock generation time
/// and the exact denoiser-forward-evaluation count.
void write_table1_csv(const std::string& path, const std::vector<StageResult>& stages);

/// Plain CSV parse: rows of comma-separated cells, first row is the header.
std::vector<std::vector<std::string>> parse_csv(const std::string& path);

/// Grouped bar chart (SVG): one group per parameter or interaction, one bar
/// per optimization stage.
void write_importance_chart(const std::string& path,
                            const std::vector<hpo::ImportanceReport>& reports);

/// Merges per-stage importance CSVs into one (parameter, fraction, stage) CSV.
void write_importance_csv(const std::string& path,
                          const std::vector<hpo::ImportanceReport>& reports);

/// Re-reads the importance CSVs of a run directory (stage2/stage4), erroring
/// with the list of missing artifacts.
std::vector<hpo::ImportanceReport> load_run_importance(const std::string& run_dir);

}  // namespace casgen::pipeline
