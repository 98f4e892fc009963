#pragma once

#include <string>
#include <vector>

namespace finrl_dapo::chart {

struct Series {
    std::string label;
    std::vector<double> values;
};

/// Render labelled polylines over a shared x axis (one slot per x_labels
/// entry) into a standalone SVG document. Y axis auto-scales with a small
/// margin; a legend lists every series.
std::string render_line_chart(const std::vector<Series>& series,
                              const std::vector<std::string>& x_labels,
                              const std::string& title, const std::string& y_label);

}  // namespace finrl_dapo::chart
