#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gaitprint/error.hpp"

namespace gaitprint {

/// One tri-axial accelerometer reading in g. `t` is the sample index at the
/// configured rate (centiseconds at 100 Hz).
struct RawSample {
    std::string subject_id;
    std::int64_t t = 0;
    double x = 0, y = 0, z = 0;
    int session = 1;
    std::string activity;
};

/// Per-subject streams, sorted by (session, t).
using SubjectStreams = std::map<std::string, std::vector<RawSample>>;

/// Column mapping for delimited accelerometry files.
///
/// With `has_header` the column fields are header names, otherwise 0-based
/// column indices written as decimal strings. An empty `subject` column takes
/// the subject id from `subject_from_path` (a regex with one capture group
/// applied to the file path) or else from the file stem. An empty `time`
/// column numbers the rows of each file 0, 1, 2, ...; when a directory holds
/// several such files for one subject and session, later files continue the
/// numbering after a one-sample gap, so each file is its own bout.
/// `file_pattern` (regex, searched in the path) restricts which files of a
/// directory are read. With `axes_as_rows` a file holds one line per axis
/// (x, y and z name the line indices) and one sample per field.
struct ColumnSchema {
    std::string subject = "subject";
    std::string time = "t";
    std::string x = "x";
    std::string y = "y";
    std::string z = "z";
    std::string session;   // optional
    std::string activity;  // optional
    std::vector<std::string> keep_activities;  // empty keeps every row
    std::string subject_from_path;
    std::string session_from_path;
    std::string file_pattern;
    bool has_header = true;
    bool axes_as_rows = false;
    char delimiter = '\0';   // '\0' auto-detects tab or comma; ' ' splits on whitespace runs
    double time_scale = 1.0; // sample index = round(time * time_scale)
};

struct LoadReport {
    SubjectStreams streams;
    std::size_t rows_read = 0;
    std::size_t rows_filtered = 0;  // dropped by keep_activities
    std::size_t rows_rejected = 0;  // malformed
    std::vector<std::string> reject_examples;  // first few, "file:line: reason"
};

/// Reads one file, or every *.csv / *.tsv / *.txt file below a directory
/// (sorted by path). Throws DataError on unreadable input, a missing column
/// or a duplicate (subject, session, t) key.
LoadReport load_accelerometry(const std::filesystem::path& path, const ColumnSchema& schema);

/// Stream variant of load_accelerometry; `source` names the input in messages
/// and feeds the path-derived subject/session rules.
LoadReport parse_accelerometry(std::istream& in, const ColumnSchema& schema, const std::string& source);

template <typename Scalar>
Scalar vector_magnitude(Scalar x, Scalar y, Scalar z)
{
    using std::isfinite;
    if (!isfinite(x) || !isfinite(y) || !isfinite(z))
        throw DataError("vector_magnitude: non-finite acceleration");
    using std::sqrt;
    return sqrt(x * x + y * y + z * z);
}

/// One interval of S vector-magnitude values.
struct SecondFrame {
    std::string subject_id;
    int session = 1;
    int j = 0;  // 1-based
    Eigen::VectorXd v;
};

struct SubjectSeries {
    std::string subject_id;
    std::vector<SecondFrame> frames;

    int J() const { return static_cast<int>(frames.size()); }
};

struct SegmentOptions {
    int samples_per_interval = 100;
    /// Samples dropped on each side of an internal bout boundary.
    int trim_transition_samples = 0;
};

/// Splits a sorted stream into bouts (session change, activity change or a
/// gap in t) and each bout into whole intervals of S samples. Trailing
/// partial intervals are discarded.
SubjectSeries segment_seconds(std::span<const RawSample> stream, const SegmentOptions& options);
SubjectSeries segment_seconds(std::span<const RawSample> stream, int samples_per_interval);

enum class SplitMode { within_session, cross_session };

struct SplitSpec {
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::within_session;
    int train_session = 1;  // cross-session only
    int test_session = 2;
};

/// Frames keep their original j; each side lists frames in ascending j.
struct SplitResult {
    std::vector<SubjectSeries> train;
    std::vector<SubjectSeries> test;
};

/// Within-session: per subject, floor(fraction * J) seconds (at least one)
/// drawn without regard to time order go to train. Cross-session: whole
/// sessions. Deterministic given the seed and independent of subject order.
SplitResult stratified_split(std::span<const SubjectSeries> series, const SplitSpec& spec);

SplitMode parse_split_mode(const std::string& text);
std::string to_string(SplitMode mode);

} // namespace gaitprint
