#pragma once

// Deterministic SVG rendering of grid heatmaps and time-series charts.
// Text output keeps figures diffable in golden-file tests.

#include <ostream>
#include <string>

#include "genagent/experiments.hpp"

namespace genagent::render {

struct HeatmapOptions {
    double midpoint = 0.5;  // diverging color scale center
    std::string title;
    std::string x_label = "price - previous price";
    std::string y_label = "fundamental - price";
};

// One rectangle per cell; gap increases upward; missing cells stay blank.
void render_heatmap_svg(std::ostream& out, const experiments::GridTable& table,
                        const HeatmapOptions& options = {});

struct SeriesOptions {
    std::string title;
};

// Price and fundamental on the left axis; fundamentalist weight markers and
// their centered moving average (dashed) on a right [0,1] axis.
void render_series_svg(std::ostream& out, const std::vector<experiments::TimeSeriesRow>& rows,
                       const SeriesOptions& options = {});

}  // namespace genagent::render
