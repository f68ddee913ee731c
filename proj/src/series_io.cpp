#include "gaitprint/series_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace gaitprint {
namespace {

template <typename T>
void put_le(std::ostream& out, T value)
{
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in)
{
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in)
        throw DataError("series store: truncated input");
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        u |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
    return static_cast<T>(u);
}

int common_interval_length(std::span<const SubjectSeries> series)
{
    int S = -1;
    for (const auto& s : series)
        for (const auto& f : s.frames) {
            if (S < 0)
                S = static_cast<int>(f.v.size());
            else if (S != f.v.size())
                throw DataError("series store: frames of different lengths");
        }
    return S < 0 ? 0 : S;
}

void append_frame(std::vector<SubjectSeries>& out, std::map<std::string, std::size_t>& index, SecondFrame frame)
{
    auto [it, inserted] = index.try_emplace(frame.subject_id, out.size());
    if (inserted)
        out.push_back(SubjectSeries{frame.subject_id, {}});
    out[it->second].frames.push_back(std::move(frame));
}

} // namespace

std::string format_double(double value)
{
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

void write_series_binary(std::ostream& out, std::span<const SubjectSeries> series, std::string_view tag)
{
    if (tag.size() > 0xffff)
        throw DataError("series store: tag too long");
    const int S = common_interval_length(series);
    std::uint64_t n = 0;
    for (const auto& s : series)
        n += s.frames.size();
    out.write("GPRT", 4);
    put_le<std::uint8_t>(out, kSeriesFormatVersion);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tag.size()));
    out.write(tag.data(), static_cast<std::streamsize>(tag.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(S));
    put_le<std::uint64_t>(out, n);
    for (const auto& s : series) {
        for (const auto& f : s.frames) {
            if (f.subject_id.size() > 0xffff)
                throw DataError("series store: subject id too long");
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(f.subject_id.size()));
            out.write(f.subject_id.data(), static_cast<std::streamsize>(f.subject_id.size()));
            put_le<std::int32_t>(out, f.session);
            put_le<std::int32_t>(out, f.j);
            for (int k = 0; k < S; ++k)
                put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(f.v[k]));
        }
    }
}

std::vector<SubjectSeries> read_series_binary(std::istream& in, std::string* tag)
{
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GPRT", 4) != 0)
        throw DataError("series store: bad magic (expected GPRT)");
    const auto version = get_le<std::uint8_t>(in);
    if (version != kSeriesFormatVersion)
        throw DataError("series store: unsupported version " + std::to_string(version));
    std::string stored_tag(get_le<std::uint16_t>(in), '\0');
    in.read(stored_tag.data(), static_cast<std::streamsize>(stored_tag.size()));
    if (tag)
        *tag = std::move(stored_tag);
    const auto S = get_le<std::uint32_t>(in);
    const auto n = get_le<std::uint64_t>(in);

    std::vector<SubjectSeries> out;
    std::map<std::string, std::size_t> index;
    for (std::uint64_t r = 0; r < n; ++r) {
        SecondFrame f;
        const auto len = get_le<std::uint16_t>(in);
        f.subject_id.resize(len);
        in.read(f.subject_id.data(), len);
        f.session = get_le<std::int32_t>(in);
        f.j = get_le<std::int32_t>(in);
        f.v.resize(S);
        for (std::uint32_t k = 0; k < S; ++k)
            f.v[k] = std::bit_cast<double>(get_le<std::uint64_t>(in));
        append_frame(out, index, std::move(f));
    }
    return out;
}

void write_series_csv(std::ostream& out, std::span<const SubjectSeries> series, std::string_view comment)
{
    const int S = common_interval_length(series);
    if (!comment.empty())
        out << "# " << comment << '\n';
    out << "subject,session,j";
    for (int k = 1; k <= S; ++k)
        out << ",v" << k;
    out << '\n';
    for (const auto& s : series)
        for (const auto& f : s.frames) {
            out << f.subject_id << ',' << f.session << ',' << f.j;
            for (int k = 0; k < S; ++k)
                out << ',' << format_double(f.v[k]);
            out << '\n';
        }
}

std::vector<SubjectSeries> read_series_csv(std::istream& in)
{
    std::string line;
    while (std::getline(in, line) && line.rfind('#', 0) == 0) {
    }
    if (!in || line.rfind("subject,session,j", 0) != 0)
        throw DataError("series csv: missing header");
    std::vector<SubjectSeries> out;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        std::stringstream row(line);
        std::string cell;
        SecondFrame f;
        std::getline(row, f.subject_id, ',');
        std::getline(row, cell, ',');
        f.session = std::stoi(cell);
        std::getline(row, cell, ',');
        f.j = std::stoi(cell);
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            double v = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{})
                throw DataError("series csv: bad value on line " + std::to_string(line_no));
            values.push_back(v);
        }
        f.v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
        append_frame(out, index, std::move(f));
    }
    return out;
}

} // namespace gaitprint
