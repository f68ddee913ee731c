#include "gaitprint/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gaitprint/error.hpp"
#include "gaitprint/parallel.hpp"
#include "gaitprint/series_io.hpp"

namespace gaitprint {
namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(std::move(t));
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T value{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw ConfigError("config: " + key + " = '" + text + "' is not a valid number");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text)
{
    auto t = trim(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "true" || t == "yes" || t == "1" || t == "on")
        return true;
    if (t == "false" || t == "no" || t == "0" || t == "off")
        return false;
    throw ConfigError("config: " + key + " = '" + text + "' is not a boolean");
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, const std::string& text)
{
    std::vector<T> out;
    for (const auto& item : split_list(text))
        out.push_back(parse_number<T>(key, item));
    return out;
}

char parse_delimiter(const std::string& text)
{
    const auto t = trim(text);
    if (t.empty() || t == "auto")
        return '\0';
    if (t == "tab" || t == "\\t")
        return '\t';
    if (t == "comma" || t == ",")
        return ',';
    if (t == "space" || t == "whitespace")
        return ' ';
    if (t == "semicolon" || t == ";")
        return ';';
    throw ConfigError("config: unknown delimiter '" + text + "'");
}

std::string delimiter_name(char d)
{
    switch (d) {
    case '\0': return "auto";
    case '\t': return "tab";
    case ',': return "comma";
    case ' ': return "whitespace";
    case ';': return "semicolon";
    default: return std::string(1, d);
    }
}

template <typename T>
std::string join(const std::vector<T>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out += ',';
        if constexpr (std::is_same_v<T, double>)
            out += format_double(values[i]);
        else if constexpr (std::is_same_v<T, std::string>)
            out += values[i];
        else
            out += std::to_string(values[i]);
    }
    return out;
}

} // namespace

void ExperimentConfig::validate() const
{
    if (samples_per_interval < 2)
        throw ConfigError("config: segment.samples_per_interval must be >= 2");
    grid.validate();
    for (int u : grid.lags)
        if (u >= samples_per_interval)
            throw ConfigError("config: grid lag " + std::to_string(u) + " must be below samples_per_interval");
    if (!(split.train_fraction > 0 && split.train_fraction < 1))
        throw ConfigError("config: split.train_fraction must lie in (0, 1)");
    if (method != kMethodGridcell && method != kMethodFunreg)
        throw ConfigError("config: unknown method '" + method + "' (expected gridcell-logistic or funreg)");
    if (fit.max_iter < 1 || !(fit.tol > 0) || fit.ridge < 0)
        throw ConfigError("config: fit settings out of range");
    if (funreg.degree < 1 || funreg.num_basis < funreg.degree + 1)
        throw ConfigError("config: funreg.num_basis must exceed funreg.degree");
    if (funreg.lag_stride < 1)
        throw ConfigError("config: funreg.lag_stride must be >= 1");
    if (funreg.lambda_values.empty())
        throw ConfigError("config: funreg.lambda_values is empty");
    for (double l : funreg.lambda_values)
        if (!(l >= 0) || !std::isfinite(l))
            throw ConfigError("config: funreg.lambda_values must be finite and non-negative");
    if (funreg.lambda_grid_mode != "isotropic" && funreg.lambda_grid_mode != "full")
        throw ConfigError("config: funreg.lambda_grid_mode must be isotropic or full");
    if (funreg.folds < 2)
        throw ConfigError("config: funreg.folds must be >= 2");
    if (!(cma_alpha > 0 && cma_alpha < 1))
        throw ConfigError("config: cma.alpha must lie in (0, 1)");
    if (cma_n_mc < 100)
        throw ConfigError("config: cma.n_mc must be >= 100");
    if (ks.empty() || std::any_of(ks.begin(), ks.end(), [](int k) { return k < 1; }))
        throw ConfigError("config: evaluate.ks must be positive");
    if (std::any_of(sensitivity_windows.begin(), sensitivity_windows.end(), [](int w) { return w < 1; }))
        throw ConfigError("config: evaluate.sensitivity_windows must be positive");
    if (trim_transition_seconds < 0)
        throw ConfigError("config: data.trim_transition_seconds must be >= 0");
}

std::vector<Lambda> ExperimentConfig::lambda_candidates() const
{
    return lambda_grid(funreg.lambda_values, funreg.lambda_grid_mode == "isotropic");
}

FunRegConfig ExperimentConfig::funreg_config() const
{
    FunRegConfig c;
    c.max_iter = funreg.max_iter;
    c.tol = funreg.tol;
    c.folds = funreg.folds;
    c.seed = seed;
    c.grid = lambda_candidates();
    c.jobs = jobs;
    return c;
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir)
{
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    ExperimentConfig c;
    std::set<std::string> seen;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config: key '" + section + "' outside any section");
        for (const auto& [name, node] : body) {
            const std::string key = section + "." + name;
            const std::string v = trim(node.data());
            seen.insert(key);

            if (key == "data.path") {
                std::filesystem::path p = v;
                c.data_path = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
            } else if (key == "data.subject_column") c.schema.subject = v;
            else if (key == "data.time_column") c.schema.time = v;
            else if (key == "data.x_column") c.schema.x = v;
            else if (key == "data.y_column") c.schema.y = v;
            else if (key == "data.z_column") c.schema.z = v;
            else if (key == "data.session_column") c.schema.session = v;
            else if (key == "data.activity_column") c.schema.activity = v;
            else if (key == "data.keep_activities") c.schema.keep_activities = split_list(v);
            else if (key == "data.subject_from_path") c.schema.subject_from_path = v;
            else if (key == "data.session_from_path") c.schema.session_from_path = v;
            else if (key == "data.file_pattern") c.schema.file_pattern = v;
            else if (key == "data.has_header") c.schema.has_header = parse_bool(key, v);
            else if (key == "data.delimiter") c.schema.delimiter = parse_delimiter(v);
            else if (key == "data.time_scale") c.schema.time_scale = parse_number<double>(key, v);
            else if (key == "data.sessions") c.sessions = parse_number_list<int>(key, v);
            else if (key == "data.require_sessions") c.require_sessions = parse_number_list<int>(key, v);
            else if (key == "data.axes_as_rows") c.schema.axes_as_rows = parse_bool(key, v);
            else if (key == "data.trim_transition_seconds") c.trim_transition_seconds = parse_number<double>(key, v);
            else if (key == "segment.samples_per_interval") c.samples_per_interval = parse_number<int>(key, v);
            else if (key == "grid.range_lo") c.grid.range_lo = parse_number<double>(key, v);
            else if (key == "grid.range_hi") c.grid.range_hi = parse_number<double>(key, v);
            else if (key == "grid.cell_size") c.grid.cell_size = parse_number<double>(key, v);
            else if (key == "grid.lags") c.grid.lags = parse_number_list<int>(key, v);
            else if (key == "split.train_fraction") c.split.train_fraction = parse_number<double>(key, v);
            else if (key == "split.mode") {
                try {
                    c.split.mode = parse_split_mode(v);
                } catch (const std::exception&) {
                    throw ConfigError("config: split.mode must be within-session or cross-session");
                }
            } else if (key == "split.train_session") c.split.train_session = parse_number<int>(key, v);
            else if (key == "split.test_session") c.split.test_session = parse_number<int>(key, v);
            else if (key == "method.name") c.method = v;
            else if (key == "fit.max_iter") c.fit.max_iter = parse_number<int>(key, v);
            else if (key == "fit.tol") c.fit.tol = parse_number<double>(key, v);
            else if (key == "fit.ridge") c.fit.ridge = parse_number<double>(key, v);
            else if (key == "fit.standardize") c.fit.standardize = parse_bool(key, v);
            else if (key == "fit.screen_unique_frac") c.screen_unique_frac = parse_number<double>(key, v);
            else if (key == "fit.screen_freq_ratio") c.screen_freq_ratio = parse_number<double>(key, v);
            else if (key == "funreg.degree") c.funreg.degree = parse_number<int>(key, v);
            else if (key == "funreg.num_basis") c.funreg.num_basis = parse_number<int>(key, v);
            else if (key == "funreg.lag_stride") c.funreg.lag_stride = parse_number<int>(key, v);
            else if (key == "funreg.lambda_values") c.funreg.lambda_values = parse_number_list<double>(key, v);
            else if (key == "funreg.lambda_grid_mode") c.funreg.lambda_grid_mode = v;
            else if (key == "funreg.folds") c.funreg.folds = parse_number<int>(key, v);
            else if (key == "funreg.normalize_penalty") c.funreg.normalize_penalty = parse_bool(key, v);
            else if (key == "funreg.max_iter") c.funreg.max_iter = parse_number<int>(key, v);
            else if (key == "funreg.tol") c.funreg.tol = parse_number<double>(key, v);
            else if (key == "funreg.dump_dsu") c.funreg.dump_dsu = parse_bool(key, v);
            else if (key == "cma.alpha") c.cma_alpha = parse_number<double>(key, v);
            else if (key == "cma.n_mc") c.cma_n_mc = parse_number<std::int64_t>(key, v);
            else if (key == "cma.subjects") c.cma_subjects = split_list(v);
            else if (key == "evaluate.ks") c.ks = parse_number_list<int>(key, v);
            else if (key == "evaluate.sensitivity_windows") c.sensitivity_windows = parse_number_list<int>(key, v);
            else if (key == "output.dir") c.out_dir = v;
            else if (key == "experiment.seed") c.seed = parse_number<std::uint64_t>(key, v);
            else if (key == "experiment.jobs") c.jobs = parse_number<int>(key, v);
            else
                throw ConfigError("config: unknown key '" + key + "'");
        }
    }
    c.split.seed = c.seed;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open " + path.string());
    return parse_config(in, path.parent_path());
}

std::string canonical_config(const ExperimentConfig& c)
{
    std::ostringstream o;
    o << "[data]\n"
      << "path=" << c.data_path.generic_string() << '\n'
      << "subject_column=" << c.schema.subject << '\n'
      << "time_column=" << c.schema.time << '\n'
      << "x_column=" << c.schema.x << '\n'
      << "y_column=" << c.schema.y << '\n'
      << "z_column=" << c.schema.z << '\n'
      << "session_column=" << c.schema.session << '\n'
      << "activity_column=" << c.schema.activity << '\n'
      << "keep_activities=" << join(c.schema.keep_activities) << '\n'
      << "subject_from_path=" << c.schema.subject_from_path << '\n'
      << "session_from_path=" << c.schema.session_from_path << '\n'
      << "file_pattern=" << c.schema.file_pattern << '\n'
      << "has_header=" << (c.schema.has_header ? "true" : "false") << '\n'
      << "delimiter=" << delimiter_name(c.schema.delimiter) << '\n'
      << "time_scale=" << format_double(c.schema.time_scale) << '\n'
      << "axes_as_rows=" << (c.schema.axes_as_rows ? "true" : "false") << '\n'
      << "sessions=" << join(c.sessions) << '\n'
      << "require_sessions=" << join(c.require_sessions) << '\n'
      << "trim_transition_seconds=" << format_double(c.trim_transition_seconds) << '\n'
      << "[segment]\n"
      << "samples_per_interval=" << c.samples_per_interval << '\n'
      << "[grid]\n"
      << "range_lo=" << format_double(c.grid.range_lo) << '\n'
      << "range_hi=" << format_double(c.grid.range_hi) << '\n'
      << "cell_size=" << format_double(c.grid.cell_size) << '\n'
      << "lags=" << join(c.grid.lags) << '\n'
      << "[split]\n"
      << "train_fraction=" << format_double(c.split.train_fraction) << '\n'
      << "mode=" << to_string(c.split.mode) << '\n'
      << "train_session=" << c.split.train_session << '\n'
      << "test_session=" << c.split.test_session << '\n'
      << "[method]\n"
      << "name=" << c.method << '\n'
      << "[fit]\n"
      << "max_iter=" << c.fit.max_iter << '\n'
      << "tol=" << format_double(c.fit.tol) << '\n'
      << "ridge=" << format_double(c.fit.ridge) << '\n'
      << "standardize=" << (c.fit.standardize ? "true" : "false") << '\n'
      << "screen_unique_frac=" << format_double(c.screen_unique_frac) << '\n'
      << "screen_freq_ratio=" << format_double(c.screen_freq_ratio) << '\n'
      << "[funreg]\n"
      << "degree=" << c.funreg.degree << '\n'
      << "num_basis=" << c.funreg.num_basis << '\n'
      << "lag_stride=" << c.funreg.lag_stride << '\n'
      << "lambda_values=" << join(c.funreg.lambda_values) << '\n'
      << "lambda_grid_mode=" << c.funreg.lambda_grid_mode << '\n'
      << "folds=" << c.funreg.folds << '\n'
      << "normalize_penalty=" << (c.funreg.normalize_penalty ? "true" : "false") << '\n'
      << "max_iter=" << c.funreg.max_iter << '\n'
      << "tol=" << format_double(c.funreg.tol) << '\n'
      << "dump_dsu=" << (c.funreg.dump_dsu ? "true" : "false") << '\n'
      << "[cma]\n"
      << "alpha=" << format_double(c.cma_alpha) << '\n'
      << "n_mc=" << c.cma_n_mc << '\n'
      << "subjects=" << join(c.cma_subjects) << '\n'
      << "[evaluate]\n"
      << "ks=" << join(c.ks) << '\n'
      << "sensitivity_windows=" << join(c.sensitivity_windows) << '\n'
      << "[experiment]\n"
      << "seed=" << c.seed << '\n';
    return o.str();
}

std::string config_hash(const ExperimentConfig& cfg)
{
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canonical_config(cfg));
    return o.str();
}

} // namespace gaitprint
