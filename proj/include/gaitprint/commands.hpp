#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gaitprint/cma.hpp"
#include "gaitprint/config.hpp"
#include "gaitprint/identify.hpp"

namespace gaitprint {

// Files written under ExperimentConfig::out_dir:
//   ingest:   series.gprt, ingest_report.json
//   train:    split.csv, train_report.json, models/*.json,
//             screen_report.json (grid cells), dsu/*.csv (funreg, optional)
//   evaluate: rank_report.json, ranks.csv, probabilities.csv,
//             sensitivity.csv, sensitivity.svg
//   cma:      cma/cma_<subject>.json, cma/fingerprint_<subject>.svg,
//             cma/fingerprint_<subject>_unadjusted.svg, cma_summary.csv
//   plot:     redraws the SVGs from the CSV/JSON outputs

struct IngestSummary {
    int n_subjects = 0;
    std::map<std::string, int> seconds;  // per subject
    double median_seconds = 0;
    std::size_t rows_rejected = 0;
};

struct TrainSummary {
    std::vector<std::string> models;
    std::map<std::string, std::string> failures;
    int n_train_seconds = 0;
    int n_test_seconds = 0;
};

struct EvaluateSummary {
    RankReport report;
    std::vector<SensitivityRow> sensitivity;
};

IngestSummary cmd_ingest(const ExperimentConfig& cfg);
TrainSummary cmd_train(const ExperimentConfig& cfg);
EvaluateSummary cmd_evaluate(const ExperimentConfig& cfg);
std::vector<CmaResult> cmd_cma(const ExperimentConfig& cfg);
void cmd_plot(const ExperimentConfig& cfg);

// Runs body and maps exceptions to exit codes: 2 config, 3 data,
// 4 numerical, 1 anything else.
int run_guarded(const std::function<void()>& body);

std::string artifact_stem(const std::string& subject);

} // namespace gaitprint
