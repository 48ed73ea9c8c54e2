#include "nvscope/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nvscope {

namespace {

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string fmt(double v, int decimals = 2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    // avoid "-0.00"
    if (std::string(buf).find_first_not_of("-0.") == std::string::npos) std::snprintf(buf, sizeof buf, "%.*f", decimals, 0.0);
    return buf;
}

std::string escape(const std::string& s) {
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

// 1, 2, 5 x 10^k spacing giving roughly `target` intervals.
double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace

std::string render_svg(const std::vector<PlotTrace>& traces, const std::vector<double>& centers, const PlotOptions& opt) {
    if (traces.empty()) throw std::invalid_argument("render_svg: no traces");
    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& t : traces) {
        if (t.f_mhz.size() != t.y_mv.size() || t.f_mhz.empty())
            throw std::invalid_argument("render_svg: trace '" + t.label + "' is empty or ragged");
        x_min = std::min(x_min, *std::min_element(t.f_mhz.begin(), t.f_mhz.end()));
        x_max = std::max(x_max, *std::max_element(t.f_mhz.begin(), t.f_mhz.end()));
        y_min = std::min(y_min, *std::min_element(t.y_mv.begin(), t.y_mv.end()));
        y_max = std::max(y_max, *std::max_element(t.y_mv.begin(), t.y_mv.end()));
    }
    if (x_max <= x_min) x_max = x_min + 1.0;
    const double y_pad = std::max(0.05 * (y_max - y_min), 1.0);
    y_min -= y_pad;
    y_max += y_pad;

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;
    auto sx = [&](double f) { return left + (f - x_min) / (x_max - x_min) * pw; };
    auto sy = [&](double y) { return top + (y_max - y) / (y_max - y_min) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(opt.title)
       << "</text>\n";

    // axes
    os << "<g id=\"x-axis\" data-min-mhz=\"" << fmt(x_min, 3) << "\" data-max-mhz=\"" << fmt(x_max, 3) << "\">\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
       << fmt(top + ph) << "\" stroke=\"black\"/>\n";
    const double xs = nice_step(x_max - x_min, 8);
    std::vector<double> xticks{x_min};
    for (double t = std::ceil(x_min / xs) * xs; t < x_max; t += xs)
        if (t - x_min > 0.3 * xs && x_max - t > 0.3 * xs) xticks.push_back(t);
    xticks.push_back(x_max);
    for (double t : xticks) {
        os << "<line x1=\"" << fmt(sx(t)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(sx(t)) << "\" y2=\""
           << fmt(top + ph + 5) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">" << fmt(t, 0)
           << "</text>\n";
    }
    os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(opt.height - 10.0)
       << "\" text-anchor=\"middle\">frequency (MHz)</text>\n";
    os << "</g>\n";

    os << "<g id=\"y-axis\">\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(top + ph)
       << "\" stroke=\"black\"/>\n";
    const double ys = nice_step(y_max - y_min, 6);
    for (double t = std::ceil(y_min / ys) * ys; t <= y_max; t += ys) {
        os << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(sy(t)) << "\" x2=\"" << fmt(left) << "\" y2=\""
           << fmt(sy(t)) << "\" stroke=\"black\"/>";
        os << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(sy(t) + 4) << "\" text-anchor=\"end\">"
           << fmt(t, ys < 1 ? 1 : 0) << "</text>\n";
    }
    os << "<text transform=\"translate(16 " << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(opt.y_label) << "</text>\n";
    os << "</g>\n";

    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        os << "<polyline class=\"trace\" fill=\"none\" stroke=\"" << kColors[i % 4] << "\" stroke-width=\"1.5\"";
        if (i > 0) os << " stroke-dasharray=\"6 4\"";
        os << " points=\"";
        for (std::size_t k = 0; k < t.f_mhz.size(); ++k) {
            if (k) os << ' ';
            os << fmt(sx(t.f_mhz[k])) << ',' << fmt(sy(t.y_mv[k]));
        }
        os << "\"/>\n";
    }

    for (double c : centers) {
        if (c < x_min || c > x_max) continue;
        os << "<line class=\"center\" data-mhz=\"" << fmt(c, 3) << "\" x1=\"" << fmt(sx(c)) << "\" y1=\"" << fmt(top)
           << "\" x2=\"" << fmt(sx(c)) << "\" y2=\"" << fmt(top + ph) << "\" stroke=\"#555\" stroke-dasharray=\"2 3\"/>\n";
    }

    os << "<g id=\"legend\">\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const double y = top + 12 + 18.0 * static_cast<double>(i);
        const double x = left + pw - 190;
        os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 30) << "\" y2=\"" << fmt(y)
           << "\" stroke=\"" << kColors[i % 4] << "\" stroke-width=\"1.5\"" << (i > 0 ? " stroke-dasharray=\"6 4\"" : "")
           << "/>";
        os << "<text x=\"" << fmt(x + 36) << "\" y=\"" << fmt(y + 4) << "\">" << escape(traces[i].label) << "</text>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

}  // namespace nvscope
