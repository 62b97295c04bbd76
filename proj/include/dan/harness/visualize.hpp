#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dan/tensor.hpp"

namespace dan::harness {

// Absolute values min-max scaled to [0, 1]; a constant map becomes 0.5.
Tensor normalize_heatmap(const Tensor& map);

// Nearest-neighbour resize of a [h x w] or [1 x h x w] map to [height x width].
Tensor upsample_nearest(const Tensor& map, std::size_t height, std::size_t width);

// Blends a heat colour (red for 1, blue for 0) over a [3 x H x W] frame.
Tensor overlay_heatmap(const Tensor& frame, const Tensor& heat, double alpha = 0.5);

// Binary P6, 8 bits per channel; values are clamped to [0, 1].
void write_ppm(std::ostream& os, const Tensor& image);
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(std::istream& is);

}  // namespace dan::harness
