#include "gaitprint/gridcells.hpp"
#include "gaitprint/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

namespace gaitprint {

int GridSpec::cells_per_side() const
{
    return static_cast<int>(std::lround((range_hi - range_lo) / cell_size));
}

void GridSpec::validate() const
{
    if (!(cell_size > 0) || !(range_hi > range_lo))
        throw ConfigError("grid: need range_hi > range_lo and cell_size > 0");
    const double n = (range_hi - range_lo) / cell_size;
    if (std::abs(n - std::round(n)) > 1e-9 || std::round(n) < 1)
        throw ConfigError("grid: (range_hi - range_lo) / cell_size must be a positive integer");
    if (lags.empty())
        throw ConfigError("grid: no lags configured");
    for (int u : lags)
        if (u < 1)
            throw ConfigError("grid: lags must be >= 1");
}

std::string CellIndex::name() const
{
    return "u" + std::to_string(u) + "_r" + std::to_string(r) + "_c" + std::to_string(c);
}

CellIndex parse_cell_name(std::string_view name)
{
    CellIndex cell;
    auto field = [&](char tag, int& value) {
        if (name.empty() || name.front() != tag)
            throw DataError("bad cell name");
        name.remove_prefix(1);
        const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), value);
        if (ec != std::errc{})
            throw DataError("bad cell name");
        name.remove_prefix(static_cast<std::size_t>(ptr - name.data()));
        if (!name.empty() && name.front() == '_')
            name.remove_prefix(1);
    };
    const std::string original(name);
    try {
        field('u', cell.u);
        field('r', cell.r);
        field('c', cell.c);
    } catch (const DataError&) {
        throw DataError("bad cell name '" + original + "'");
    }
    if (!name.empty())
        throw DataError("bad cell name '" + original + "'");
    return cell;
}

std::optional<std::pair<int, int>> locate_cell(double d, double v, const GridSpec& spec)
{
    const int n = spec.cells_per_side();
    auto bin = [&](double x) -> int {
        if (!(x >= spec.range_lo) || !(x <= spec.range_hi))
            return -1;
        if (x == spec.range_hi)
            return n - 1;
        return std::min(n - 1, static_cast<int>(std::floor((x - spec.range_lo) / spec.cell_size)));
    };
    const int c = bin(d);
    const int r = bin(v);
    if (c < 0 || r < 0)
        return std::nullopt;
    return std::pair{r, c};
}

int cell_column(const CellIndex& cell, const GridSpec& spec)
{
    const auto it = std::find(spec.lags.begin(), spec.lags.end(), cell.u);
    if (it == spec.lags.end())
        throw ConfigError("cell lag " + std::to_string(cell.u) + " not in grid");
    const int n = spec.cells_per_side();
    return static_cast<int>(it - spec.lags.begin()) * n * n + cell.r * n + cell.c;
}

CellIndex column_cell(int column, const GridSpec& spec)
{
    const int n = spec.cells_per_side();
    const int per_lag = n * n;
    const int k = column / per_lag;
    const int within = column % per_lag;
    return {spec.lags.at(static_cast<std::size_t>(k)), within / n, within % n};
}

PredictorRow count_cells(const LagMap& map, const GridSpec& spec)
{
    spec.validate();
    const int n = spec.cells_per_side();
    PredictorRow row;
    row.subject_id = map.subject_id;
    row.j = map.j;
    row.spec = spec;
    row.counts = Eigen::VectorXi::Zero(spec.num_cells());
    for (std::size_t k = 0; k < spec.lags.size(); ++k) {
        const int u = spec.lags[k];
        const auto it = std::lower_bound(map.lags.begin(), map.lags.end(), u);
        if (it == map.lags.end() || *it != u)
            throw ConfigError("count_cells: lag map lacks lag " + std::to_string(u));
        const auto m = static_cast<std::size_t>(it - map.lags.begin());
        for (std::size_t i = map.offset[m]; i < map.offset[m + 1]; ++i) {
            const auto& t = map.triples[i];
            if (const auto rc = locate_cell(t.d, t.v, spec))
                ++row.counts[static_cast<int>(k) * n * n + rc->first * n + rc->second];
            else
                ++row.discarded;
        }
    }
    return row;
}

PredictorRow featurize(const SecondFrame& frame, const GridSpec& spec)
{
    auto row = count_cells(build_lagmap(frame, spec.lags), spec);
    row.session = frame.session;
    return row;
}

std::vector<std::string> Design::column_names() const
{
    std::vector<std::string> names;
    names.reserve(cells.size());
    for (const auto& c : cells)
        names.push_back(c.name());
    return names;
}

Design build_design(std::vector<PredictorRow> rows, const GridSpec& spec)
{
    spec.validate();
    for (const auto& r : rows)
        if (!(r.spec == spec))
            throw ConfigError("build_design: rows built with different grid specs");
    std::stable_sort(rows.begin(), rows.end(), [](const PredictorRow& a, const PredictorRow& b) {
        return std::tie(a.subject_id, a.j) < std::tie(b.subject_id, b.j);
    });

    Design design;
    design.spec = spec;
    const int G = spec.num_cells();
    for (int g = 0; g < G; ++g)
        design.cells.push_back(column_cell(g, spec));
    design.X.resize(static_cast<Eigen::Index>(rows.size()), G);
    if (rows.empty())
        spdlog::warn("build_design: no rows, returning an empty 0 x {} design", G);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        design.X.row(static_cast<Eigen::Index>(i)) = rows[i].counts.cast<double>().transpose();
        design.rows.push_back({rows[i].subject_id, rows[i].session, rows[i].j});
    }
    return design;
}

Design build_design(std::vector<PredictorRow> rows)
{
    if (rows.empty())
        return build_design(std::move(rows), GridSpec{});
    const GridSpec spec = rows.front().spec;
    return build_design(std::move(rows), spec);
}

Design featurize_series(std::span<const SubjectSeries> series, const GridSpec& spec, int jobs)
{
    std::vector<const SecondFrame*> frames;
    for (const auto& s : series)
        for (const auto& f : s.frames)
            frames.push_back(&f);
    std::vector<PredictorRow> rows(frames.size());
    parallel_for(frames.size(), jobs, [&](std::size_t i) { rows[i] = featurize(*frames[i], spec); });
    return build_design(std::move(rows), spec);
}

ScreenResult screen_predictors(const Design& design, double unique_frac, double freq_ratio)
{
    const auto n = design.X.rows();
    if (n == 0 || design.X.cols() == 0)
        throw DataError("screen_predictors: empty design");

    ScreenResult result;
    result.report.unique_frac = unique_frac;
    result.report.freq_ratio = freq_ratio;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index g = 0; g < design.X.cols(); ++g) {
        std::map<double, long> freq;
        for (Eigen::Index i = 0; i < n; ++i)
            ++freq[design.X(i, g)];
        long first = 0, second = 0;
        for (const auto& [value, count] : freq) {
            if (count > first) {
                second = first;
                first = count;
            } else if (count > second) {
                second = count;
            }
        }
        const double unique = static_cast<double>(freq.size()) / static_cast<double>(n);
        const double ratio = second > 0 ? static_cast<double>(first) / static_cast<double>(second)
                                        : std::numeric_limits<double>::infinity();
        const bool single = freq.size() == 1;
        if (single || (unique < unique_frac && ratio > freq_ratio))
            result.report.removed.push_back({design.cells[static_cast<std::size_t>(g)], unique, ratio});
        else {
            result.report.kept.push_back(design.cells[static_cast<std::size_t>(g)]);
            keep.push_back(g);
        }
    }
    if (keep.empty())
        throw DataError("screen_predictors: every predictor was removed");
    result.reduced = apply_screen(design, result.report);
    return result;
}

Design apply_screen(const Design& design, const ScreenReport& report)
{
    std::map<CellIndex, Eigen::Index> position;
    for (std::size_t g = 0; g < design.cells.size(); ++g)
        position[design.cells[g]] = static_cast<Eigen::Index>(g);
    Design out;
    out.spec = design.spec;
    out.rows = design.rows;
    out.cells = report.kept;
    out.X.resize(design.X.rows(), static_cast<Eigen::Index>(report.kept.size()));
    for (std::size_t k = 0; k < report.kept.size(); ++k) {
        const auto it = position.find(report.kept[k]);
        if (it == position.end())
            throw DataError("apply_screen: design lacks cell " + report.kept[k].name());
        out.X.col(static_cast<Eigen::Index>(k)) = design.X.col(it->second);
    }
    return out;
}

void write_design_csv(std::ostream& out, const Design& design)
{
    out << "subject,session,j";
    for (const auto& c : design.cells)
        out << ',' << c.name();
    out << '\n';
    for (Eigen::Index i = 0; i < design.X.rows(); ++i) {
        const auto& key = design.rows[static_cast<std::size_t>(i)];
        out << key.subject_id << ',' << key.session << ',' << key.j;
        for (Eigen::Index g = 0; g < design.X.cols(); ++g)
            out << ',' << static_cast<long long>(design.X(i, g));
        out << '\n';
    }
}

} // namespace gaitprint
