#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protovae/numgrad/tensor.hpp"

namespace protovae::cli {

// Hand-emitted SVG. Data marks are <circle> (points) and <rect> (prototypes);
// frame, axes and legend use <line>, <polyline> and <text> only, so marks can
// be counted by element name. The plot-area group carries the axis ranges as
// data-x-min/data-x-max/data-y-min/data-y-max attributes.

/// Scatter of n x 2 coordinates coloured by label, with prototypes (m x 2,
/// possibly empty) overlaid as black squares.
std::string render_projection_plot(const numgrad::Tensor& coords, std::span<const std::int32_t> labels,
                                   const numgrad::Tensor& prototypes, const std::string& title = "");

struct LineSeries {
    std::string name;
    std::vector<double> x, y;
};

std::string render_line_plot(std::span<const LineSeries> series, const std::string& x_label,
                             const std::string& y_label, const std::string& title = "");

}  // namespace protovae::cli
