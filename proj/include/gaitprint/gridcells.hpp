#pragma once

#include <Eigen/Core>

#include <compare>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gaitprint/ingest.hpp"
#include "gaitprint/lagmap.hpp"

namespace gaitprint {

/// Square partition of [lo, hi]^2 per lag. Cells are half-open on the left
/// and bottom, with the top edge closed at hi.
struct GridSpec {
    double range_lo = 0.0;
    double range_hi = 3.0;
    double cell_size = 0.25;
    std::vector<int> lags{15, 30, 45};

    int cells_per_side() const;
    int cells_per_lag() const { return cells_per_side() * cells_per_side(); }
    int num_cells() const { return static_cast<int>(lags.size()) * cells_per_lag(); }
    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

/// Column c bins the lagged value d, row r bins the value v.
struct CellIndex {
    int u = 0;
    int r = 0;
    int c = 0;

    auto operator<=>(const CellIndex&) const = default;
    /// "u{lag}_r{row}_c{col}"
    std::string name() const;
};

CellIndex parse_cell_name(std::string_view name);

/// (r, c) of the cell holding (d, v), or nullopt when outside [lo, hi]^2.
std::optional<std::pair<int, int>> locate_cell(double d, double v, const GridSpec& spec);

/// Canonical position of a cell: lag-major, then row-major within a lag.
int cell_column(const CellIndex& cell, const GridSpec& spec);
CellIndex column_cell(int column, const GridSpec& spec);

struct PredictorRow {
    std::string subject_id;
    int session = 1;
    int j = 0;
    Eigen::VectorXi counts;
    long discarded = 0;
    GridSpec spec;
};

PredictorRow count_cells(const LagMap& map, const GridSpec& spec);

/// build_lagmap over spec.lags followed by count_cells.
PredictorRow featurize(const SecondFrame& frame, const GridSpec& spec);

struct RowKey {
    std::string subject_id;
    int session = 1;
    int j = 0;
};

/// Seconds x cells count matrix. Rows ordered by (subject, j), columns by
/// `cells` (canonical order unless screened).
struct Design {
    Eigen::MatrixXd X;
    std::vector<RowKey> rows;
    std::vector<CellIndex> cells;
    GridSpec spec;

    std::vector<std::string> column_names() const;
};

Design build_design(std::vector<PredictorRow> rows, const GridSpec& spec);
Design build_design(std::vector<PredictorRow> rows);

/// Featurizes every frame of every subject, in parallel over frames.
Design featurize_series(std::span<const SubjectSeries> series, const GridSpec& spec, int jobs = 1);

struct RemovedCell {
    CellIndex cell;
    double unique_fraction = 0;
    double frequency_ratio = 0;  // +inf for single-valued columns
};

struct ScreenReport {
    double unique_frac = 0.10;
    double freq_ratio = 95.0 / 5.0;
    std::vector<CellIndex> kept;
    std::vector<RemovedCell> removed;
};

struct ScreenResult {
    ScreenReport report;
    Design reduced;
};

/// Near-zero-variance screen. A column goes when it is single-valued, or when
/// its unique-value fraction is below `unique_frac` and the ratio of its most
/// common to second most common value exceeds `freq_ratio`.
ScreenResult screen_predictors(const Design& design, double unique_frac = 0.10, double freq_ratio = 95.0 / 5.0);

/// Restricts a design to a kept-set computed elsewhere (e.g. on training rows).
Design apply_screen(const Design& design, const ScreenReport& report);

/// Header "subject,session,j,<cell names>".
void write_design_csv(std::ostream& out, const Design& design);

} // namespace gaitprint
