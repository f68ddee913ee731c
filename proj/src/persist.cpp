#include "gaitprint/persist.hpp"

#include <limits>

namespace gaitprint {
namespace {

json to_array(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd from_array(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        rows.push_back(to_array(m.row(i).transpose()));
    return rows;
}

Eigen::MatrixXd mat(const json& j)
{
    const auto n = static_cast<Eigen::Index>(j.size());
    if (n == 0)
        return {};
    const auto m = static_cast<Eigen::Index>(j.front().size());
    Eigen::MatrixXd out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != m)
            throw DataError("model artifact: ragged matrix");
        out.row(i) = from_array(j[static_cast<std::size_t>(i)]).transpose();
    }
    return out;
}

// JSON has no infinity; store it as null.
json finite_or_null(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

json basis_json(const BSplineBasis<double>& b)
{
    return json{{"degree", b.degree()}, {"knots", b.knots()}};
}

BSplineBasis<double> basis_from(const json& j)
{
    return BSplineBasis<double>(j.at("degree").get<int>(), j.at("knots").get<std::vector<double>>());
}

void check_version(const json& j, const char* kind)
{
    if (j.at("format").get<std::string>() != kind)
        throw DataError(std::string("model artifact: expected format ") + kind);
    if (j.at("version").get<int>() != kModelFormatVersion)
        throw DataError("model artifact: unsupported version");
}

} // namespace

void to_json(json& j, const GridSpec& g)
{
    j = json{{"range_lo", g.range_lo}, {"range_hi", g.range_hi}, {"cell_size", g.cell_size}, {"lags", g.lags}};
}

void from_json(const json& j, GridSpec& g)
{
    g.range_lo = j.at("range_lo").get<double>();
    g.range_hi = j.at("range_hi").get<double>();
    g.cell_size = j.at("cell_size").get<double>();
    g.lags = j.at("lags").get<std::vector<int>>();
}

void to_json(json& j, const ScreenReport& r)
{
    json kept = json::array();
    for (const auto& c : r.kept)
        kept.push_back(c.name());
    json removed = json::array();
    for (const auto& c : r.removed)
        removed.push_back(json{{"cell", c.cell.name()},
                               {"unique_fraction", c.unique_fraction},
                               {"frequency_ratio", finite_or_null(c.frequency_ratio)}});
    j = json{{"unique_frac", r.unique_frac}, {"freq_ratio", r.freq_ratio}, {"kept", kept}, {"removed", removed}};
}

void from_json(const json& j, ScreenReport& r)
{
    r.unique_frac = j.at("unique_frac").get<double>();
    r.freq_ratio = j.at("freq_ratio").get<double>();
    r.kept.clear();
    for (const auto& c : j.at("kept"))
        r.kept.push_back(parse_cell_name(c.get<std::string>()));
    r.removed.clear();
    for (const auto& c : j.at("removed")) {
        RemovedCell rc;
        rc.cell = parse_cell_name(c.at("cell").get<std::string>());
        rc.unique_fraction = c.at("unique_fraction").get<double>();
        rc.frequency_ratio = c.at("frequency_ratio").is_null() ? std::numeric_limits<double>::infinity()
                                                               : c.at("frequency_ratio").get<double>();
        r.removed.push_back(rc);
    }
}

void to_json(json& j, const FitConfig& c)
{
    j = json{{"max_iter", c.max_iter}, {"tol", c.tol}, {"ridge", c.ridge}, {"standardize", c.standardize}};
}

void from_json(const json& j, FitConfig& c)
{
    c.max_iter = j.at("max_iter").get<int>();
    c.tol = j.at("tol").get<double>();
    c.ridge = j.at("ridge").get<double>();
    c.standardize = j.at("standardize").get<bool>();
}

void to_json(json& j, const LogisticFit& f)
{
    j = json{{"target", f.target},       {"converged", f.converged}, {"n_iter", f.n_iter},
             {"deviance", f.deviance},   {"config", f.config},       {"column_names", f.column_names},
             {"center", to_array(f.center)},  {"scale", to_array(f.scale)},    {"beta", to_array(f.beta)},
             {"cov", mat(f.cov)}};
}

void from_json(const json& j, LogisticFit& f)
{
    f.target = j.at("target").get<std::string>();
    f.converged = j.at("converged").get<bool>();
    f.n_iter = j.at("n_iter").get<int>();
    f.deviance = j.at("deviance").get<double>();
    f.config = j.at("config").get<FitConfig>();
    f.column_names = j.at("column_names").get<std::vector<std::string>>();
    f.center = from_array(j.at("center"));
    f.scale = from_array(j.at("scale"));
    f.beta = from_array(j.at("beta"));
    f.cov = mat(j.at("cov"));
    if (f.cov.rows() != f.beta.size() || f.cov.cols() != f.beta.size())
        throw DataError("model artifact: covariance does not match coefficients");
}

void to_json(json& j, const Lambda& l)
{
    j = json{{"d", l.d}, {"v", l.v}, {"u", l.u}};
}

void from_json(const json& j, Lambda& l)
{
    l.d = j.at("d").get<double>();
    l.v = j.at("v").get<double>();
    l.u = j.at("u").get<double>();
}

void to_json(json& j, const FunFit& f)
{
    j = json{{"target", f.target},     {"converged", f.converged}, {"n_iter", f.n_iter}, {"deviance", f.deviance},
             {"lambda", f.lambda},     {"intercept", f.intercept}, {"beta", to_array(f.beta)}};
}

void from_json(const json& j, FunFit& f)
{
    f.target = j.at("target").get<std::string>();
    f.converged = j.at("converged").get<bool>();
    f.n_iter = j.at("n_iter").get<int>();
    f.deviance = j.at("deviance").get<double>();
    f.lambda = j.at("lambda").get<Lambda>();
    f.intercept = j.at("intercept").get<double>();
    f.beta = from_array(j.at("beta"));
}

void to_json(json& j, const MarginalBases& b)
{
    j = json{{"d", basis_json(b.d)}, {"v", basis_json(b.v)}, {"u", basis_json(b.u)}};
}

void from_json(const json& j, MarginalBases& b)
{
    b.d = basis_from(j.at("d"));
    b.v = basis_from(j.at("v"));
    b.u = basis_from(j.at("u"));
}

void to_json(json& j, const CmaResult& r)
{
    json cells = json::array();
    for (const auto& c : r.intervals)
        cells.push_back(json{{"cell", c.name},
                             {"estimate", c.estimate},
                             {"se", c.se},
                             {"lo", c.lo},
                             {"hi", c.hi},
                             {"unadjusted_lo", c.unadjusted_lo},
                             {"unadjusted_hi", c.unadjusted_hi},
                             {"significant", c.significant},
                             {"unadjusted_significant", c.unadjusted_significant}});
    j = json{{"subject", r.subject},
             {"alpha", r.alpha},
             {"q", r.q},
             {"z", r.z},
             {"mc_se", r.mc_se},
             {"fit_converged", r.fit_converged},
             {"n_significant", r.significant.size()},
             {"n_unadjusted_significant", r.unadjusted_significant.size()},
             {"significant", r.significant},
             {"unadjusted_significant", r.unadjusted_significant},
             {"cells", cells}};
}

void from_json(const json& j, CmaResult& r)
{
    r.subject = j.at("subject").get<std::string>();
    r.alpha = j.at("alpha").get<double>();
    r.q = j.at("q").get<double>();
    r.z = j.at("z").get<double>();
    r.mc_se = j.at("mc_se").get<double>();
    r.fit_converged = j.at("fit_converged").get<bool>();
    r.significant = j.at("significant").get<std::vector<std::string>>();
    r.unadjusted_significant = j.at("unadjusted_significant").get<std::vector<std::string>>();
    r.intervals.clear();
    for (const auto& c : j.at("cells")) {
        CellInterval ci;
        ci.name = c.at("cell").get<std::string>();
        ci.estimate = c.at("estimate").get<double>();
        ci.se = c.at("se").get<double>();
        ci.lo = c.at("lo").get<double>();
        ci.hi = c.at("hi").get<double>();
        ci.unadjusted_lo = c.at("unadjusted_lo").get<double>();
        ci.unadjusted_hi = c.at("unadjusted_hi").get<double>();
        ci.significant = c.at("significant").get<bool>();
        ci.unadjusted_significant = c.at("unadjusted_significant").get<bool>();
        r.intervals.push_back(std::move(ci));
    }
}

void to_json(json& j, const RankReport& r)
{
    json acc = json::object();
    json cor = json::object();
    for (int k : r.ks) {
        acc["rank" + std::to_string(k)] = r.accuracy.at(k);
        cor["rank" + std::to_string(k)] = r.correct.at(k);
    }
    j = json{{"total", r.total}, {"accuracy", acc}, {"correct", cor}};
}

json to_json(const GridModelArtifact& a)
{
    return json{{"format", "gaitprint-gridcell-logistic"},
                {"version", kModelFormatVersion},
                {"config_hash", a.config_hash},
                {"grid", a.grid},
                {"screen", a.screen},
                {"fit", a.fit}};
}

GridModelArtifact grid_model_from_json(const json& j)
{
    check_version(j, "gaitprint-gridcell-logistic");
    GridModelArtifact a;
    a.config_hash = j.at("config_hash").get<std::string>();
    a.grid = j.at("grid").get<GridSpec>();
    a.screen = j.at("screen").get<ScreenReport>();
    a.fit = j.at("fit").get<LogisticFit>();
    return a;
}

json to_json(const FunModelArtifact& a)
{
    return json{{"format", "gaitprint-funreg"},
                {"version", kModelFormatVersion},
                {"config_hash", a.config_hash},
                {"bases", a.bases},
                {"lag_stride", a.lag_stride},
                {"normalized_penalty", a.normalized_penalty},
                {"fit", a.fit}};
}

FunModelArtifact fun_model_from_json(const json& j)
{
    check_version(j, "gaitprint-funreg");
    FunModelArtifact a;
    a.config_hash = j.at("config_hash").get<std::string>();
    a.bases = j.at("bases").get<MarginalBases>();
    a.lag_stride = j.at("lag_stride").get<int>();
    a.normalized_penalty = j.at("normalized_penalty").get<bool>();
    a.fit = j.at("fit").get<FunFit>();
    if (a.fit.beta.size() != a.bases.size())
        throw DataError("model artifact: coefficient count does not match bases");
    return a;
}

} // namespace gaitprint
