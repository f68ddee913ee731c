#include "gaitprint/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace gaitprint {
namespace {

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

void header(std::ostream& out, double w, double h, const SvgOptions& opt)
{
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n";
    if (!opt.provenance.empty())
        out << "<!-- " << escape(opt.provenance) << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        out << "<text x=\"" << num(w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
            << escape(opt.title) << "</text>\n";
}

} // namespace

std::string viridis(double t)
{
    static constexpr std::array<std::array<double, 3>, 5> anchors{{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37},
    }};
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    const double x = t * (anchors.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), anchors.size() - 2);
    const double f = x - static_cast<double>(i);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(std::lround(anchors[i][0] + f * (anchors[i + 1][0] - anchors[i][0]))),
                  static_cast<int>(std::lround(anchors[i][1] + f * (anchors[i + 1][1] - anchors[i][1]))),
                  static_cast<int>(std::lround(anchors[i][2] + f * (anchors[i + 1][2] - anchors[i][2]))));
    return buf;
}

void write_fingerprint_svg(std::ostream& out, const Fingerprint& fp, const GridSpec& grid, const SvgOptions& opt)
{
    const int n = grid.cells_per_side();
    const double cell = 20, margin = 40, gap = 30;
    const double panel = n * cell;
    const double width = margin + fp.panels.size() * (panel + gap) + margin;
    const double height = 40 + panel + 60;
    header(out, width, height, opt);

    double lo = 0, hi = 0;
    bool any = false;
    for (const auto& p : fp.panels)
        for (Eigen::Index i = 0; i < p.size(); ++i)
            if (std::isfinite(p.data()[i])) {
                lo = any ? std::min(lo, p.data()[i]) : p.data()[i];
                hi = any ? std::max(hi, p.data()[i]) : p.data()[i];
                any = true;
            }
    const double span = hi > lo ? hi - lo : 1.0;

    for (std::size_t k = 0; k < fp.panels.size(); ++k) {
        const double x0 = margin + k * (panel + gap);
        const double y0 = 40;
        out << "<g>\n<text x=\"" << num(x0 + panel / 2) << "\" y=\"" << num(y0 - 6)
            << "\" text-anchor=\"middle\" font-size=\"12\">lag " << fp.lags[k] << "</text>\n";
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const double v = fp.panels[k](r, c);
                // Row 0 (lowest value bin) drawn at the bottom.
                const double x = x0 + c * cell;
                const double y = y0 + (n - 1 - r) * cell;
                const std::string fill = std::isfinite(v) ? viridis((v - lo) / span) : "#eeeeee";
                out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cell) << "\" height=\""
                    << num(cell) << "\" fill=\"" << fill << "\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
                if (opt.annotate && std::isfinite(v))
                    out << "<text x=\"" << num(x + cell / 2) << "\" y=\"" << num(y + cell * 0.65)
                        << "\" text-anchor=\"middle\" font-size=\"6\">" << num(v) << "</text>\n";
            }
        out << "<text x=\"" << num(x0 + panel / 2) << "\" y=\"" << num(y0 + panel + 16)
            << "\" text-anchor=\"middle\" font-size=\"10\">v(s-u) [" << num(grid.range_lo) << ", "
            << num(grid.range_hi) << "] g</text>\n</g>\n";
    }
    out << "<text x=\"" << num(margin) << "\" y=\"" << num(height - 12) << "\" font-size=\"10\">"
        << fp.n_significant << " significant cells";
    if (any)
        out << "; estimate range [" << num(lo) << ", " << num(hi) << "]";
    out << "</text>\n</svg>\n";
}

void write_sensitivity_svg(std::ostream& out, const std::vector<SensitivityRow>& rows, const SvgOptions& opt)
{
    const double width = 520, height = 340, left = 60, right = 120, top = 40, bottom = 50;
    const double pw = width - left - right, ph = height - top - bottom;
    header(out, width, height, opt);

    std::map<int, std::vector<const SensitivityRow*>> by_k;
    int wmax = 1;
    for (const auto& r : rows) {
        by_k[r.k].push_back(&r);
        wmax = std::max(wmax, r.window);
    }
    const double lmax = std::log(static_cast<double>(std::max(wmax, 2)));
    auto X = [&](int w) { return left + pw * std::log(static_cast<double>(w)) / lmax; };
    auto Y = [&](double a) { return top + ph * (1.0 - a); };

    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\""
        << num(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double a = i / 4.0;
        out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(Y(a) + 4)
            << "\" text-anchor=\"end\" font-size=\"10\">" << num(a) << "</text>\n";
    }
    std::vector<int> windows;
    for (const auto& r : rows)
        if (std::find(windows.begin(), windows.end(), r.window) == windows.end())
            windows.push_back(r.window);
    for (int w : windows)
        out << "<text x=\"" << num(X(w)) << "\" y=\"" << num(top + ph + 16)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << w << "</text>\n";
    out << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 10)
        << "\" text-anchor=\"middle\" font-size=\"11\">seconds averaged</text>\n";

    const std::array<const char*, 4> dashes{"", "6,3", "2,2", "8,3,2,3"};
    std::size_t line = 0;
    for (const auto& [k, pts] : by_k) {
        const std::string color = viridis(by_k.size() > 1 ? static_cast<double>(line) / (by_k.size() - 1) * 0.8 : 0.0);
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
        if (*dashes[line % dashes.size()])
            out << " stroke-dasharray=\"" << dashes[line % dashes.size()] << "\"";
        out << " points=\"";
        for (const auto* p : pts)
            out << num(X(p->window)) << ',' << num(Y(p->accuracy)) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << num(left + pw + 10) << "\" y=\"" << num(top + 16 + 16 * line) << "\" font-size=\"11\" fill=\""
            << color << "\">rank-" << k << "</text>\n";
        ++line;
    }
    out << "</svg>\n";
}

} // namespace gaitprint
