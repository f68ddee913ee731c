#include "gaitprint/ingest.hpp"
#include "gaitprint/parallel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <tuple>

namespace gaitprint {
namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delim)
{
    std::vector<std::string_view> out;
    if (delim == ' ') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
                ++i;
            if (i >= line.size())
                break;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
                ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        }
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

bool parse_double(std::string_view s, double& value)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

std::string capture(const std::string& pattern, const std::string& text)
{
    if (pattern.empty())
        return {};
    std::smatch m;
    const std::regex re(pattern);
    if (std::regex_search(text, m, re) && m.size() > 1)
        return m[1].str();
    return {};
}

struct ColumnPositions {
    int subject = -1, time = -1, x = -1, y = -1, z = -1, session = -1, activity = -1;
};

int resolve_column(const std::string& name, const std::vector<std::string_view>& header,
                   bool has_header, bool required, const std::string& source)
{
    if (name.empty()) {
        if (required)
            throw ConfigError("column mapping: required column left empty");
        return -1;
    }
    if (!has_header) {
        int idx = -1;
        const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
        if (ec != std::errc{} || ptr != name.data() + name.size() || idx < 0)
            throw ConfigError("column mapping: '" + name + "' is not a column index");
        return idx;
    }
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    throw DataError(source + ": column '" + name + "' not found in header");
}

} // namespace

LoadReport parse_accelerometry(std::istream& in, const ColumnSchema& schema, const std::string& source)
{
    LoadReport report;
    std::string line;
    std::size_t line_no = 0;

    // First non-empty line decides the delimiter and, with a header, the columns.
    std::string first;
    while (std::getline(in, first)) {
        ++line_no;
        if (!trim(first).empty())
            break;
    }
    if (trim(first).empty())
        return report;

    char delim = schema.delimiter;
    if (delim == '\0')
        delim = first.find('\t') != std::string::npos ? '\t' : ',';

    std::string path_subject = capture(schema.subject_from_path, source);
    int path_session = 1;
    if (const auto s = capture(schema.session_from_path, source); !s.empty())
        path_session = std::stoi(s);

    if (schema.axes_as_rows) {
        std::vector<std::string> lines{first};
        while (std::getline(in, line))
            if (!trim(line).empty())
                lines.push_back(line);
        auto row_of = [&](const std::string& name) {
            int idx = -1;
            const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
            if (ec != std::errc{} || ptr != name.data() + name.size() || idx < 0)
                throw ConfigError("column mapping: '" + name + "' is not an axis row index");
            if (idx >= static_cast<int>(lines.size()))
                throw DataError(source + ": axis row " + name + " missing");
            return split_fields(lines[static_cast<std::size_t>(idx)], delim);
        };
        const auto xs = row_of(schema.x), ys = row_of(schema.y), zs = row_of(schema.z);
        if (xs.size() != ys.size() || xs.size() != zs.size())
            throw DataError(source + ": axis rows have different lengths");
        if (path_subject.empty())
            path_subject = std::filesystem::path(source).stem().string();
        auto& stream = report.streams[path_subject];
        for (std::size_t k = 0; k < xs.size(); ++k) {
            ++report.rows_read;
            RawSample sample;
            sample.subject_id = path_subject;
            sample.session = path_session;
            sample.t = static_cast<std::int64_t>(k);
            if (!parse_double(xs[k], sample.x) || !parse_double(ys[k], sample.y) || !parse_double(zs[k], sample.z)
                || !std::isfinite(sample.x) || !std::isfinite(sample.y) || !std::isfinite(sample.z)) {
                ++report.rows_rejected;
                if (report.reject_examples.size() < 10)
                    report.reject_examples.push_back(source + ": sample " + std::to_string(k + 1)
                                                     + ": non-numeric or non-finite acceleration");
                continue;
            }
            stream.push_back(std::move(sample));
        }
        if (stream.empty())
            report.streams.erase(path_subject);
        return report;
    }

    const auto header = split_fields(first, delim);
    ColumnPositions cols;
    cols.subject = resolve_column(schema.subject, header, schema.has_header, false, source);
    cols.time = resolve_column(schema.time, header, schema.has_header, false, source);
    cols.x = resolve_column(schema.x, header, schema.has_header, true, source);
    cols.y = resolve_column(schema.y, header, schema.has_header, true, source);
    cols.z = resolve_column(schema.z, header, schema.has_header, true, source);
    cols.session = resolve_column(schema.session, header, schema.has_header, false, source);
    cols.activity = resolve_column(schema.activity, header, schema.has_header, false, source);
    const int needed = std::max({cols.subject, cols.time, cols.x, cols.y, cols.z, cols.session, cols.activity});

    if (cols.subject < 0 && path_subject.empty())
        path_subject = std::filesystem::path(source).stem().string();

    const std::set<std::string, std::less<>> keep(schema.keep_activities.begin(), schema.keep_activities.end());
    std::map<std::string, std::int64_t> row_counter;

    auto reject = [&](std::size_t at, const std::string& why) {
        ++report.rows_rejected;
        if (report.reject_examples.size() < 10)
            report.reject_examples.push_back(source + ":" + std::to_string(at) + ": " + why);
    };

    auto handle = [&](std::string_view text, std::size_t at) {
        if (trim(text).empty())
            return;
        ++report.rows_read;
        const auto f = split_fields(text, delim);
        if (static_cast<int>(f.size()) <= needed) {
            reject(at, "too few fields");
            return;
        }
        RawSample sample;
        sample.subject_id = cols.subject >= 0 ? std::string(trim(f[cols.subject])) : path_subject;
        if (sample.subject_id.empty()) {
            reject(at, "empty subject id");
            return;
        }
        if (cols.activity >= 0) {
            sample.activity = std::string(trim(f[cols.activity]));
            if (!keep.empty() && !keep.contains(sample.activity)) {
                ++report.rows_filtered;
                return;
            }
        }
        if (!parse_double(f[cols.x], sample.x) || !parse_double(f[cols.y], sample.y)
            || !parse_double(f[cols.z], sample.z) || !std::isfinite(sample.x)
            || !std::isfinite(sample.y) || !std::isfinite(sample.z)) {
            reject(at, "non-numeric or non-finite acceleration");
            return;
        }
        sample.session = path_session;
        if (cols.session >= 0) {
            double s = 0;
            if (!parse_double(f[cols.session], s)) {
                reject(at, "non-numeric session");
                return;
            }
            sample.session = static_cast<int>(s);
        }
        if (cols.time >= 0) {
            double t = 0;
            if (!parse_double(f[cols.time], t) || !std::isfinite(t)) {
                reject(at, "non-numeric time");
                return;
            }
            sample.t = std::llround(t * schema.time_scale);
        } else {
            sample.t = row_counter[sample.subject_id + '\x1f' + std::to_string(sample.session)]++;
        }
        report.streams[sample.subject_id].push_back(std::move(sample));
    };

    if (!schema.has_header)
        handle(first, line_no);
    while (std::getline(in, line)) {
        ++line_no;
        handle(line, line_no);
    }

    for (auto& [subject, stream] : report.streams) {
        std::stable_sort(stream.begin(), stream.end(), [](const RawSample& a, const RawSample& b) {
            return std::tie(a.session, a.t) < std::tie(b.session, b.t);
        });
        for (std::size_t i = 1; i < stream.size(); ++i)
            if (stream[i].session == stream[i - 1].session && stream[i].t == stream[i - 1].t)
                throw DataError(source + ": duplicate sample key (subject " + subject + ", session "
                                + std::to_string(stream[i].session) + ", t " + std::to_string(stream[i].t) + ")");
    }
    return report;
}

LoadReport load_accelerometry(const std::filesystem::path& path, const ColumnSchema& schema)
{
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    std::optional<std::regex> pattern;
    if (!schema.file_pattern.empty()) {
        try {
            pattern.emplace(schema.file_pattern);
        } catch (const std::regex_error&) {
            throw ConfigError("column mapping: invalid file_pattern regex '" + schema.file_pattern + "'");
        }
    }
    std::error_code ec;
    if (!fs::exists(path, ec))
        throw DataError("data path does not exist: " + path.string());
    if (fs::is_directory(path, ec)) {
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (!entry.is_regular_file())
                continue;
            const auto ext = entry.path().extension().string();
            if (ext != ".csv" && ext != ".tsv" && ext != ".txt")
                continue;
            if (!pattern || std::regex_search(entry.path().generic_string(), *pattern))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw DataError("no accelerometry files found in " + path.string());
    } else {
        files.push_back(path);
    }

    LoadReport total;
    // Next free implicit sample index per (subject, session).
    std::map<std::pair<std::string, int>, std::int64_t> next_t;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in)
            throw DataError("cannot read " + file.string());
        auto part = parse_accelerometry(in, schema, file.string());
        total.rows_read += part.rows_read;
        total.rows_filtered += part.rows_filtered;
        total.rows_rejected += part.rows_rejected;
        for (auto& ex : part.reject_examples)
            if (total.reject_examples.size() < 10)
                total.reject_examples.push_back(std::move(ex));
        for (auto& [subject, stream] : part.streams) {
            if (schema.time.empty()) {
                std::map<int, std::int64_t> last;
                for (auto& r : stream) {
                    r.t += next_t[{subject, r.session}];
                    last[r.session] = std::max(last[r.session], r.t);
                }
                for (const auto& [session, t] : last)
                    next_t[{subject, session}] = t + 2;
            }
            auto& dst = total.streams[subject];
            dst.insert(dst.end(), std::make_move_iterator(stream.begin()), std::make_move_iterator(stream.end()));
        }
    }
    if (files.size() > 1) {
        for (auto& [subject, stream] : total.streams) {
            std::stable_sort(stream.begin(), stream.end(), [](const RawSample& a, const RawSample& b) {
                return std::tie(a.session, a.t) < std::tie(b.session, b.t);
            });
            for (std::size_t i = 1; i < stream.size(); ++i)
                if (stream[i].session == stream[i - 1].session && stream[i].t == stream[i - 1].t)
                    throw DataError("duplicate sample key (subject " + subject + ", session "
                                    + std::to_string(stream[i].session) + ", t " + std::to_string(stream[i].t) + ")");
        }
    }
    if (total.rows_rejected > 0)
        spdlog::warn("ingest: rejected {} malformed rows", total.rows_rejected);
    return total;
}

SubjectSeries segment_seconds(std::span<const RawSample> stream, const SegmentOptions& options)
{
    const int S = options.samples_per_interval;
    if (S < 2)
        throw ConfigError("segment_seconds: samples per interval must be >= 2");
    if (options.trim_transition_samples < 0)
        throw ConfigError("segment_seconds: negative transition trim");

    SubjectSeries series;
    if (stream.empty())
        return series;
    series.subject_id = stream.front().subject_id;

    // Bout boundaries: [begin, end) index ranges.
    std::vector<std::pair<std::size_t, std::size_t>> bouts;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= stream.size(); ++i) {
        const bool boundary = i == stream.size() || stream[i].session != stream[i - 1].session
                              || stream[i].activity != stream[i - 1].activity
                              || stream[i].t != stream[i - 1].t + 1;
        if (boundary) {
            bouts.emplace_back(begin, i);
            begin = i;
        }
    }

    const auto trim = static_cast<std::size_t>(options.trim_transition_samples);
    int j = 0;
    for (std::size_t b = 0; b < bouts.size(); ++b) {
        auto [lo, hi] = bouts[b];
        if (b > 0)
            lo += trim;
        if (b + 1 < bouts.size())
            hi = hi > trim ? hi - trim : 0;
        if (hi <= lo)
            continue;
        const std::size_t n_frames = (hi - lo) / static_cast<std::size_t>(S);
        for (std::size_t f = 0; f < n_frames; ++f) {
            SecondFrame frame;
            frame.subject_id = series.subject_id;
            frame.j = ++j;
            const auto first = lo + f * static_cast<std::size_t>(S);
            frame.session = stream[first].session;
            frame.v.resize(S);
            for (int s = 0; s < S; ++s) {
                const auto& r = stream[first + static_cast<std::size_t>(s)];
                frame.v[s] = vector_magnitude(r.x, r.y, r.z);
            }
            series.frames.push_back(std::move(frame));
        }
    }
    return series;
}

SubjectSeries segment_seconds(std::span<const RawSample> stream, int samples_per_interval)
{
    return segment_seconds(stream, SegmentOptions{samples_per_interval, 0});
}

SplitResult stratified_split(std::span<const SubjectSeries> series, const SplitSpec& spec)
{
    SplitResult out;
    if (spec.mode == SplitMode::within_session
        && !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ConfigError("within-session split requires train_fraction in (0, 1)");

    for (const auto& subject : series) {
        SubjectSeries train{subject.subject_id, {}};
        SubjectSeries test{subject.subject_id, {}};
        if (spec.mode == SplitMode::cross_session) {
            for (const auto& frame : subject.frames) {
                if (frame.session == spec.train_session)
                    train.frames.push_back(frame);
                else if (frame.session == spec.test_session)
                    test.frames.push_back(frame);
            }
        } else {
            const int J = subject.J();
            if (J < 2)
                throw DataError("stratified_split: subject " + subject.subject_id + " has fewer than 2 seconds");
            const int n_train = std::max(1, static_cast<int>(std::floor(spec.train_fraction * J)));
            std::vector<int> order(static_cast<std::size_t>(J));
            std::iota(order.begin(), order.end(), 0);
            std::mt19937_64 rng(mix_seed(spec.seed, fnv1a(subject.subject_id)));
            // Fisher-Yates with explicit draws; std::shuffle is implementation-defined.
            for (int i = J - 1; i > 0; --i) {
                const auto k = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
                std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(k)]);
            }
            std::vector<char> in_train(static_cast<std::size_t>(J), 0);
            for (int i = 0; i < n_train; ++i)
                in_train[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
            for (int i = 0; i < J; ++i)
                (in_train[static_cast<std::size_t>(i)] ? train : test).frames.push_back(subject.frames[static_cast<std::size_t>(i)]);
        }
        auto by_j = [](const SecondFrame& a, const SecondFrame& b) { return a.j < b.j; };
        std::sort(train.frames.begin(), train.frames.end(), by_j);
        std::sort(test.frames.begin(), test.frames.end(), by_j);
        out.train.push_back(std::move(train));
        out.test.push_back(std::move(test));
    }
    return out;
}

SplitMode parse_split_mode(const std::string& text)
{
    if (text == "within-session")
        return SplitMode::within_session;
    if (text == "cross-session")
        return SplitMode::cross_session;
    throw ConfigError("unknown split mode '" + text + "' (within-session, cross-session)");
}

std::string to_string(SplitMode mode)
{
    return mode == SplitMode::within_session ? "within-session" : "cross-session";
}

} // namespace gaitprint
