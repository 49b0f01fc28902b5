#include "ctlab/output.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctlab/ctbounds.hpp"
#include "ctlab/types.hpp"

namespace ctlab {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string format_index(std::span<const int> multi) {
    std::string s;
    for (std::size_t i = 0; i < multi.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(multi[i]);
    }
    return s;
}

void CsvTable::add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw Error("csv row has " + std::to_string(row.size()) + " fields, header has " +
                                                 std::to_string(header.size()));
    rows.push_back(std::move(row));
}

void CsvTable::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

int CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("csv: cannot read '" + path.string() + "'");
    CsvTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ValidationError("csv: line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw ValidationError("csv: '" + path.string() + "' is empty");
    return t;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

void write_manifest(const std::filesystem::path& dir, const std::string& experiment, const std::string& config_json,
                    const std::vector<std::filesystem::path>& files) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& f : files)
        outputs.push_back({{"file", f.filename().string()},
                           {"bytes", std::filesystem::file_size(f)},
                           {"sha256", sha256_file(f)}});
    nlohmann::json m{{"experiment", experiment}, {"config", nlohmann::json::parse(config_json)}, {"outputs", outputs}};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw Error("cannot write manifest in '" + dir.string() + "'");
    out << m.dump(2) << '\n';
}

namespace {

double parse_field(const std::string& s, const std::string& column, std::size_t row) {
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used == s.size()) return x;
    } catch (const std::exception&) {
    }
    throw ValidationError("csv: row " + std::to_string(row + 1) + ", column " + column + ": '" + s +
                          "' is not a number");
}

int require_column(const CsvTable& t, const std::string& name) {
    const int c = t.column(name);
    if (c < 0) throw ValidationError("csv: missing column '" + name + "'");
    return c;
}

// Minimal SVG canvas with a data-to-pixel mapping.
class Svg {
public:
    static constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 30, kB = 50;

    Svg(double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
        if (x1_ <= x0_) x1_ = x0_ + 1.0;
        if (y1_ <= y0_) y1_ = y0_ + 1.0;
        os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
            << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\""
            << kH - kT - kB << "\" fill=\"none\" stroke=\"black\"/>\n";
    }

    double px(double x) const { return kL + (x - x0_) / (x1_ - x0_) * (kW - kL - kR); }
    double py(double y) const { return kH - kB - (y - y0_) / (y1_ - y0_) * (kH - kT - kB); }

    void ticks(const std::string& xlabel, const std::string& ylabel, bool log_y, bool log_x) {
        for (int i = 0; i <= 5; ++i) {
            const double x = x0_ + (x1_ - x0_) * i / 5.0, y = y0_ + (y1_ - y0_) * i / 5.0;
            os_ << "<text x=\"" << fmt(px(x)) << "\" y=\"" << kH - kB + 16 << "\" font-size=\"11\" "
                << "text-anchor=\"middle\">" << label(x, log_x) << "</text>\n";
            os_ << "<text x=\"" << kL - 6 << "\" y=\"" << fmt(py(y) + 4) << "\" font-size=\"11\" "
                << "text-anchor=\"end\">" << label(y, log_y) << "</text>\n";
        }
        os_ << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12 << "\" font-size=\"13\" "
            << "text-anchor=\"middle\">" << xlabel << "</text>\n";
        os_ << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
            << "transform=\"rotate(-90 16 " << (kT + kH - kB) / 2 << ")\">" << ylabel << "</text>\n";
    }

    void circle(double x, double y, const char* color) {
        os_ << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"3\" fill=\"" << color
            << "\" fill-opacity=\"0.6\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const char* color, const char* id,
                  bool dashed = false) {
        os_ << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
            << (dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
        for (const auto& [x, y] : pts) os_ << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
        os_ << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, const char* color = "black", const char* id = nullptr) {
        os_ << "<text";
        if (id) os_ << " id=\"" << id << "\"";
        os_ << " x=\"" << x << "\" y=\"" << y << "\" font-size=\"13\" fill=\"" << color << "\">" << s
            << "</text>\n";
    }

    void save(const std::filesystem::path& path) {
        os_ << "</svg>\n";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write '" + path.string() + "'");
        out << os_.str();
    }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }
    static std::string label(double v, bool log) {
        char buf[32];
        if (log) std::snprintf(buf, sizeof buf, "1e%.1f", v);
        else std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

    double x0_, x1_, y0_, y1_;
    std::ostringstream os_;
};

constexpr double kPlotFloor = 1e-300;

}  // namespace

PlotSummary emit_plot(const std::filesystem::path& csv, PlotKind kind, const std::filesystem::path& svg) {
    const CsvTable t = read_csv(csv);
    PlotSummary summary;
    if (kind == PlotKind::Decay) {
        const int cd = require_column(t, "distance"), cn = require_column(t, "norm");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            // Summary rows leave the distance field empty.
            if (t.rows[r][cd].empty()) continue;
            const double d = parse_field(t.rows[r][cd], "distance", r);
            const double n = parse_field(t.rows[r][cn], "norm", r);
            if (!std::isfinite(d) || !std::isfinite(n) || n < 0.0)
                throw ValidationError("csv: row " + std::to_string(r + 1) + " has a non-finite or negative value");
            pts.emplace_back(d, n);
        }
        if (pts.empty()) throw ValidationError("csv: no data rows to plot");
        const DecayFit fit = fit_exponential(pts, 1e-13, 1.0);
        std::vector<std::pair<double, double>> logs;
        for (const auto& [d, n] : pts)
            if (n > kPlotFloor) logs.emplace_back(d, std::log10(n));
        if (logs.empty()) throw ValidationError("csv: every norm is zero; nothing to plot on a log axis");
        double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
        for (const auto& [x, y] : logs) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        Svg s(x0, x1, std::floor(y0), std::ceil(y1));
        s.ticks("distance |beta - gamma|", "norm (log10)", true, false);
        for (const auto& [x, y] : logs) s.circle(x, y, "steelblue");
        char buf[128];
        if (fit.valid) {
            auto line = [&](double x) { return (fit.log_prefactor - fit.rate * x) / std::log(10.0); };
            s.polyline({{x0, line(x0)}, {x1, line(x1)}}, "firebrick", "fit");
            std::snprintf(buf, sizeof buf, "fitted rate = %.4f (R^2 = %.4f, %d points)", fit.rate, fit.r2,
                          fit.samples);
            summary.rate = fit.rate;
        } else {
            std::snprintf(buf, sizeof buf, "fitted rate = n/a (too few points above the noise floor)");
        }
        s.text(Svg::kL + 10, Svg::kT + 18, buf, "firebrick", "rate");
        summary.points = static_cast<int>(logs.size());
        s.save(svg);
    } else {
        const int ct = require_column(t, "t"), ca = require_column(t, "norm_AV"), c0 = require_column(t, "norm_0V"),
                  ce = require_column(t, "envelope");
        std::vector<std::pair<double, double>> av, zv, env;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double x = parse_field(t.rows[r][ct], "t", r);
            const double a = parse_field(t.rows[r][ca], "norm_AV", r);
            const double z = parse_field(t.rows[r][c0], "norm_0V", r);
            const double e = parse_field(t.rows[r][ce], "envelope", r);
            if (!(x > 0.0) || !(a > 0.0) || !(z > 0.0) || !(e > 0.0) || !std::isfinite(a + z + e))
                throw ValidationError("csv: row " + std::to_string(r + 1) + " needs positive finite t and norms");
            av.emplace_back(std::log10(x), std::log10(a));
            zv.emplace_back(std::log10(x), std::log10(z));
            env.emplace_back(std::log10(x), std::log10(e));
        }
        if (av.empty()) throw ValidationError("csv: no data rows to plot");
        double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
        for (const auto* series : {&av, &zv, &env})
            for (const auto& [x, y] : *series) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
        const double pad = 0.05 * std::max(y1 - y0, 0.1);
        Svg s(x0, x1, y0 - pad, y1 + pad);
        s.ticks("t (log10)", "norm (log10)", true, true);
        s.polyline(av, "steelblue", "norm_AV");
        s.polyline(zv, "seagreen", "norm_0V");
        s.polyline(env, "firebrick", "envelope", true);
        s.text(Svg::kW - 200, Svg::kT + 18, "magnetic norm", "steelblue");
        s.text(Svg::kW - 200, Svg::kT + 36, "field-free norm", "seagreen");
        s.text(Svg::kW - 200, Svg::kT + 54, "envelope C t^-g e^(Et)", "firebrick");
        summary.points = static_cast<int>(av.size());
        s.save(svg);
    }
    return summary;
}

}  // namespace ctlab
