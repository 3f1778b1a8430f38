#pragma once

// Text outputs: CSV tables with a '#' comment header, and minimal SVG line charts.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ddlab/designs.hpp"
#include "ddlab/dpcheck.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/experiments.hpp"

namespace ddlab::io {

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Ordered key/value pairs echoed as the file header.
using Header = std::vector<std::pair<std::string, std::string>>;

inline void write_header(std::ostream& os, const Header& h) {
    for (const auto& [k, v] : h) os << "# " << k << " = " << v << '\n';
}

inline std::string join_indices(const std::vector<Index>& idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(idx[i] + 1);
    }
    return s;
}

inline void write_design_csv(std::ostream& os, const Header& h, const Matrix& x, const Vector& y) {
    write_header(os, h);
    for (Index j = 0; j < x.cols(); ++j) os << "x_" << (j + 1) << ',';
    os << "y\n";
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) os << fmt(x(i, j)) << ',';
        os << (i < y.size() ? fmt(y(i)) : std::string()) << '\n';
    }
}

/// Minor indices are written 1-based and ';'-separated.
inline void write_dp_csv(std::ostream& os, const Header& h, const dp::DpReport& r) {
    write_header(os, h);
    os << "I,J,size,mc_mean,mc_se,det_of_mean,z\n";
    for (const auto& rec : r.records) {
        os << join_indices(rec.rows) << ',' << join_indices(rec.cols) << ',' << rec.size << ','
           << fmt(rec.mc_mean) << ',' << fmt(rec.mc_se) << ',' << fmt(rec.det_of_mean) << ',' << fmt(rec.z) << '\n';
    }
}

inline void write_curve_csv(std::ostream& os, const Header& h, const std::vector<experiments::CurvePoint>& pts) {
    write_header(os, h);
    os << "n,d,mse_surrogate,mse_mc,mse_mc_se,ci_low,ci_high,lambda_n,alpha_or_beta,norm_implicit_mean\n";
    for (const auto& p : pts) {
        os << p.n << ',' << p.d << ',' << fmt(p.mse_surrogate) << ',';
        if (p.mse_mc) {
            os << fmt(p.mse_mc->mean) << ',' << fmt(p.mse_mc->std_error) << ',' << fmt(p.mse_mc->ci.low) << ','
               << fmt(p.mse_mc->ci.high) << ',';
        } else {
            os << ",,,,";
        }
        os << fmt(p.lambda_n) << ',' << fmt(p.alpha_or_beta) << ',' << fmt(p.norm_implicit_mean) << '\n';
    }
}

/// Discrepancy rows; the trailing `flag` column is empty for unflagged points.
inline void write_discrepancy_csv(std::ostream& os, const Header& h,
                                  const std::vector<experiments::DiscrepancyPoint>& pts) {
    write_header(os, h);
    os << "d,n,aspect,kind,value,ci_low,ci_high,trials,flag\n";
    for (const auto& p : pts) {
        os << p.d << ',' << p.n << ',' << fmt(p.aspect) << ',' << experiments::to_string(p.kind) << ','
           << fmt(p.value) << ',' << fmt(p.ci_low) << ',' << fmt(p.ci_high) << ',' << p.trials_used << ','
           << p.flag << '\n';
    }
}

/// Writes all files or none: contents go to temporaries first and are renamed at the end.
class FileBatch {
public:
    void add(std::filesystem::path path, std::string contents) {
        files_.emplace_back(std::move(path), std::move(contents));
    }

    std::vector<std::filesystem::path> commit() const {
        std::vector<std::filesystem::path> tmps;
        try {
            for (const auto& [path, text] : files_) {
                if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
                auto tmp = path;
                tmp += ".tmp";
                std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
                if (!os) throw InvalidInput("cannot open " + tmp.string() + " for writing");
                tmps.push_back(tmp);
                os << text;
                os.close();
                if (!os) throw InvalidInput("failed writing " + tmp.string());
            }
            for (const auto& [path, text] : files_) {
                if (std::filesystem::is_directory(path)) throw InvalidInput(path.string() + " is a directory");
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& t : tmps) std::filesystem::remove(t, ec);
            throw;
        }
        std::vector<std::filesystem::path> out;
        for (std::size_t i = 0; i < files_.size(); ++i) {
            std::filesystem::rename(tmps[i], files_[i].first);
            out.push_back(files_[i].first);
        }
        return out;
    }

private:
    std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

// ---------------------------------------------------------------------------------------------
// SVG charts

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err_low;   // optional error bars (absolute endpoints)
    std::vector<double> err_high;
    bool markers_only = false;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::optional<double> y_max;  // clip range above this value
    std::vector<Series> series;
    std::vector<std::pair<std::string, double>> hlines;
};

namespace detail {

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(5);
    os << v;
    return os.str();
}

}  // namespace detail

inline std::string render_svg(const Chart& c) {
    constexpr double W = 720, H = 480, L = 80, R = 170, T = 40, B = 60;
    auto tx = [&](double v) { return c.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return c.log_y ? std::log10(v) : v; };
    auto ok_x = [&](double v) { return std::isfinite(v) && (!c.log_x || v > 0); };
    auto ok_y = [&](double v) { return std::isfinite(v) && (!c.log_y || v > 0); };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto grow_y = [&](double v) {
        if (!ok_y(v)) return;
        if (c.y_max && v > *c.y_max) v = *c.y_max;
        y0 = std::min(y0, ty(v));
        y1 = std::max(y1, ty(v));
    };
    for (const auto& s : c.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!ok_x(s.x[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            grow_y(s.y[i]);
            if (i < s.err_low.size()) grow_y(s.err_low[i]);
            if (i < s.err_high.size()) grow_y(s.err_high[i]);
        }
    }
    for (const auto& h : c.hlines) grow_y(h.second);
    if (!(x1 >= x0)) x0 = 0, x1 = 1;
    if (!(y1 >= y0)) y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) {
        if (c.y_max) v = std::min(v, *c.y_max);
        return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape(c.title)
       << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0;
        const double fy = y0 + (y1 - y0) * k / 4.0;
        const double vx = c.log_x ? std::pow(10.0, fx) : fx;
        const double vy = c.log_y ? std::pow(10.0, fy) : fy;
        const double sx = L + (W - L - R) * k / 4.0;
        const double sy = H - B - (H - T - B) * k / 4.0;
        os << "<text x=\"" << sx << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << detail::num(vx)
           << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << detail::num(vy)
           << "</text>\n";
    }
    os << "<text x=\"" << L + (W - L - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
       << detail::escape(c.x_label) << "</text>\n";
    os << "<text transform=\"translate(18," << T + (H - T - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::escape(c.y_label) << "</text>\n";

    double legend_y = T + 10;
    for (const auto& [label, v] : c.hlines) {
        if (!ok_y(v)) continue;
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
           << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << legend_y + 4 << "\" fill=\"gray\">" << detail::escape(label)
           << "</text>\n";
        legend_y += 18;
    }
    for (std::size_t si = 0; si < c.series.size(); ++si) {
        const Series& s = c.series[si];
        const char* col = detail::palette(si);
        std::string path;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!ok_x(s.x[i]) || !ok_y(s.y[i])) continue;
            const double X = px(s.x[i]), Y = py(s.y[i]);
            if (!s.markers_only) path += (path.empty() ? "M" : " L") + detail::num(X) + "," + detail::num(Y);
            if (i < s.err_low.size() && i < s.err_high.size()) {
                const double lo = ok_y(s.err_low[i]) ? py(s.err_low[i]) : H - B;
                const double hi = ok_y(s.err_high[i]) ? py(s.err_high[i]) : T;
                os << "<line x1=\"" << X << "\" x2=\"" << X << "\" y1=\"" << lo << "\" y2=\"" << hi
                   << "\" stroke=\"" << col << "\"/>\n";
                os << "<line x1=\"" << X - 3 << "\" x2=\"" << X + 3 << "\" y1=\"" << lo << "\" y2=\"" << lo
                   << "\" stroke=\"" << col << "\"/>\n";
                os << "<line x1=\"" << X - 3 << "\" x2=\"" << X + 3 << "\" y1=\"" << hi << "\" y2=\"" << hi
                   << "\" stroke=\"" << col << "\"/>\n";
            }
            if (s.markers_only) {
                os << "<circle cx=\"" << X << "\" cy=\"" << Y << "\" r=\"3\" fill=\"" << col << "\"/>\n";
            }
        }
        if (!path.empty()) {
            os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.8\"/>\n";
        }
        os << "<rect x=\"" << W - R + 10 << "\" y=\"" << legend_y - 6 << "\" width=\"12\" height=\"3\" fill=\"" << col
           << "\"/>\n";
        os << "<text x=\"" << W - R + 28 << "\" y=\"" << legend_y << "\">" << detail::escape(s.label) << "</text>\n";
        legend_y += 18;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace ddlab::io
