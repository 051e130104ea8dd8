#pragma once

#include "debtmine/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

// Batch stages. Each reads only files written by earlier stages and writes
// into <out>/<stage>/: its outputs, config.txt (full parameter snapshot),
// manifest.csv (input and output SHA-256) and timing.txt (wall clock).
namespace debtmine::pipeline {

/// Synthetic survey into <out>/data: schema.txt, survey.csv, ground truth.
void cmd_synth(const Config& config);

/// Homals diagnostics per group, non-response removal, representativeness
/// check and cleaned.csv.
void cmd_clean(const Config& config);

/// Scree and parallel analysis, factor extraction and rotation, loadings,
/// reliability, factor scores and analysis.csv (cleaned data + scores).
void cmd_factors(const Config& config);

/// Stepwise cross-validated evaluation for every class mode, variant and
/// model family, plus forest importance.
void cmd_evaluate(const Config& config);

/// <out>/report.md from the artifacts of all stages.
void cmd_report(const Config& config);

std::filesystem::path output_dir(const Config& config);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Files each stage must leave behind, relative to the output directory.
std::vector<std::string> stage_artifacts(const std::string& stage, const Config& config);

} // namespace debtmine::pipeline
