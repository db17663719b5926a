#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness.hpp"

namespace gwtails {

inline constexpr const char* kCsvHeader = "x,trials,hits,p_hat,ci_lo,ci_hi,bound,verdict";

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("parse_double: trailing characters in \"" + s + "\"");
    return v;
}

inline std::string tails_csv(const TailReport& rep) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : rep.rows)
        out << format_double(r.x) << ',' << r.trials << ',' << r.hits << ',' << format_double(r.p_hat) << ','
            << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ',' << format_double(r.bound) << ','
            << (r.pass ? "pass" : "fail") << '\n';
    return out.str();
}

inline std::vector<TailRow> parse_tails_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("tails.csv: bad header");
    std::vector<TailRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 8) throw std::invalid_argument("tails.csv: expected 8 fields");
        if (f[7] != "pass" && f[7] != "fail") throw std::invalid_argument("tails.csv: bad verdict");
        rows.push_back({parse_double(f[0]), std::stoull(f[1]), std::stoull(f[2]), parse_double(f[3]),
                        parse_double(f[4]), parse_double(f[5]), parse_double(f[6]), f[7] == "pass"});
    }
    return rows;
}

inline nlohmann::json report_to_json(const TailReport& rep) {
    nlohmann::json j;
    j["schema"] = kSchema;
    j["target"] = rep.target;
    if (!rep.form.empty()) j["form"] = rep.form;
    j["distribution"] = rep.distribution;
    j["simulated"] = rep.simulated;
    j["trials"] = rep.trials;
    j["seed"] = rep.seed;
    j["fitted"] = rep.fitted;
    if (std::isnan(rep.C_hat))
        j["C_hat"] = nullptr;
    else if (std::isinf(rep.C_hat))
        j["C_hat"] = "inf";
    else
        j["C_hat"] = rep.C_hat;
    j["censored"] = rep.censored;
    j["censoring_rate"] = rep.censoring_rate;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows)
        j["rows"].push_back({{"x", r.x}, {"trials", r.trials}, {"hits", r.hits}, {"p_hat", r.p_hat},
                             {"ci_lo", r.ci_lo}, {"ci_hi", r.ci_hi}, {"bound", r.bound},
                             {"verdict", r.pass ? "pass" : "fail"}});
    j["verdict"] = rep.verdict ? "pass" : "fail";
    j["notes"] = rep.notes;
    j["extra"] = rep.extra;
    return j;
}

inline TailReport report_from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string()) != kSchema) throw std::invalid_argument("report: unknown schema");
    TailReport rep;
    rep.target = j.at("target").get<std::string>();
    rep.form = j.value("form", std::string());
    rep.distribution = j.at("distribution");
    rep.simulated = j.at("simulated");
    rep.trials = j.at("trials").get<std::uint64_t>();
    rep.seed = j.at("seed").get<std::uint64_t>();
    rep.fitted = j.at("fitted").get<bool>();
    const auto& c = j.at("C_hat");
    if (c.is_null())
        rep.C_hat = std::numeric_limits<double>::quiet_NaN();
    else if (c.is_string())
        rep.C_hat = parse_double(c.get<std::string>());
    else
        rep.C_hat = c.get<double>();
    rep.censored = j.at("censored").get<std::uint64_t>();
    rep.censoring_rate = j.at("censoring_rate").get<double>();
    for (const auto& r : j.at("rows"))
        rep.rows.push_back({r.at("x").get<double>(), r.at("trials").get<std::uint64_t>(), r.at("hits").get<std::uint64_t>(),
                            r.at("p_hat").get<double>(), r.at("ci_lo").get<double>(), r.at("ci_hi").get<double>(),
                            r.at("bound").get<double>(), r.at("verdict").get<std::string>() == "pass"});
    rep.verdict = j.at("verdict").get<std::string>() == "pass";
    rep.notes = j.at("notes").get<std::vector<std::string>>();
    rep.extra = j.at("extra");
    return rep;
}

/// log10 of p_hat with its Wilson band, and the bound, against x.
inline std::string tails_svg(const TailReport& rep) {
    constexpr double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << rep.target << (rep.form.empty() ? "" : " (" + rep.form + ")") << ": verdict " << (rep.verdict ? "pass" : "fail");
    if (rep.fitted) o << ", C = " << format_double(rep.C_hat);
    o << "</text>\n";
    if (rep.rows.empty()) {
        o << "</svg>\n";
        return o.str();
    }
    const double floor_p = 0.5 / static_cast<double>(std::max<std::uint64_t>(1, rep.rows.front().trials));
    auto ly = [&](double p) { return std::log10(std::max(p, floor_p)); };
    double xmin = rep.rows.front().x, xmax = rep.rows.back().x, ymin = 0.0, ymax = -1e300;
    for (const auto& r : rep.rows) {
        ymin = std::min({ymin, ly(r.ci_lo), ly(r.bound)});
        ymax = std::max({ymax, ly(r.ci_hi), ly(r.bound)});
    }
    ymax = std::max(ymax, ymin + 1.0);
    ymin = std::floor(ymin);
    ymax = std::min(0.0, std::ceil(ymax));
    if (ymax <= ymin) ymax = ymin + 1.0;
    if (xmax <= xmin) xmax = xmin + 1.0;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * (H - mt - mb); };
    char buf[96];
    o << "<g font-family=\"sans-serif\" font-size=\"11\" stroke=\"#888\">\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb << "\"/>\n";
    o << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\"/>\n";
    for (double y = ymin; y <= ymax + 1e-9; y += 1.0) {
        std::snprintf(buf, sizeof buf, "%.0f", y);
        o << "<text stroke=\"none\" x=\"" << ml - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    }
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "%g", r.x);
        o << "<text stroke=\"none\" x=\"" << px(r.x) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">" << buf
          << "</text>\n";
    }
    o << "<text stroke=\"none\" x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">x</text>\n";
    o << "<text stroke=\"none\" x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" transform=\"rotate(-90 16 " << (mt + H - mb) / 2
      << ")\" text-anchor=\"middle\">log10 probability</text>\n";
    o << "</g>\n";
    std::ostringstream band, est, bnd;
    for (const auto& r : rep.rows) band << px(r.x) << ',' << py(ly(r.ci_hi)) << ' ';
    for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it) band << px(it->x) << ',' << py(ly(it->ci_lo)) << ' ';
    for (const auto& r : rep.rows) {
        est << px(r.x) << ',' << py(ly(r.p_hat)) << ' ';
        bnd << px(r.x) << ',' << py(ly(r.bound)) << ' ';
    }
    o << "<polygon points=\"" << band.str() << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
    o << "<polyline points=\"" << est.str() << "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
    o << "<polyline points=\"" << bnd.str() << "\" fill=\"none\" stroke=\"#cb181d\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>\n";
    for (const auto& r : rep.rows)
        o << "<circle cx=\"" << px(r.x) << "\" cy=\"" << py(ly(r.p_hat)) << "\" r=\"3\" fill=\""
          << (r.pass ? "#08519c" : "#cb181d") << "\"/>\n";
    o << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<text x=\"" << W - mr - 150 << "\" y=\"" << mt + 12 << "\" fill=\"#08519c\">estimate, 95% band</text>\n";
    o << "<text x=\"" << W - mr - 150 << "\" y=\"" << mt + 26 << "\" fill=\"#cb181d\">bound</text>\n";
    o << "</g>\n</svg>\n";
    return o.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f.flush()) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

/// Writes report.json, tails.csv and plots/<target>.svg under dir.
inline void emit_report(const TailReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "plots");
    write_text(dir / "report.json", report_to_json(rep).dump(2) + "\n");
    write_text(dir / "tails.csv", tails_csv(rep));
    write_text(dir / "plots" / (rep.target + ".svg"), tails_svg(rep));
}

}  // namespace gwtails
