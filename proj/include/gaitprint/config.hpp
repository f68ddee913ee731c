#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gaitprint/funreg.hpp"
#include "gaitprint/glm.hpp"
#include "gaitprint/gridcells.hpp"
#include "gaitprint/ingest.hpp"

namespace gaitprint {

inline constexpr const char* kMethodGridcell = "gridcell-logistic";
inline constexpr const char* kMethodFunreg = "funreg";

struct FunRegSettings {
    int degree = 3;
    int num_basis = 8;
    int lag_stride = 1;
    std::vector<double> lambda_values{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1, 10};
    std::string lambda_grid_mode = "isotropic";  // or "full"
    int folds = 5;
    bool normalize_penalty = true;
    int max_iter = 100;
    double tol = 1e-9;
    bool dump_dsu = false;
};

struct ExperimentConfig {
    // [data]
    std::filesystem::path data_path;
    ColumnSchema schema;
    std::vector<int> sessions;          // empty keeps all
    std::vector<int> require_sessions;  // drop subjects missing any of these
    double trim_transition_seconds = 0;
    // [segment]
    int samples_per_interval = 100;
    // [grid]
    GridSpec grid;
    // [split]
    SplitSpec split;
    // [method]
    std::string method = kMethodGridcell;
    // [fit]
    FitConfig fit;
    double screen_unique_frac = 0.10;
    double screen_freq_ratio = 95.0 / 5.0;
    // [funreg]
    FunRegSettings funreg;
    // [cma]
    double cma_alpha = 0.05;
    std::int64_t cma_n_mc = 2'000'000;
    std::vector<std::string> cma_subjects;  // empty runs every model
    // [evaluate]
    std::vector<int> ks{1, 5};
    std::vector<int> sensitivity_windows{1, 2, 5, 10, 25, 50, 100};
    // [output]
    std::filesystem::path out_dir = "gaitprint_out";
    // [experiment]
    std::uint64_t seed = 0;
    int jobs = 0;

    void validate() const;
    std::vector<Lambda> lambda_candidates() const;
    FunRegConfig funreg_config() const;
};

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Every setting that can change an output, one per line in fixed order.
// Output location and job count are left out so they never change the hash.
std::string canonical_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

} // namespace gaitprint
