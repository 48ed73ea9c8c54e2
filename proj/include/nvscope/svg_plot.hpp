#pragma once

// Self-contained SVG line charts of one or more spectra.

#include <string>
#include <vector>

namespace nvscope {

struct PlotTrace {
    std::string label;
    std::vector<double> f_mhz;
    std::vector<double> y_mv;
};

struct PlotOptions {
    int width = 800;
    int height = 480;
    std::string title = "ODMR spectrum";
    std::string y_label = "noise-adjusted signal (mV)";
};

/// Traces after the first are drawn dashed. The x axis spans exactly the
/// union of the traces' frequency ranges; centers are drawn as vertical markers.
std::string render_svg(const std::vector<PlotTrace>& traces, const std::vector<double>& centers_mhz = {},
                       const PlotOptions& options = {});

}  // namespace nvscope
