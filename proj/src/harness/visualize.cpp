#include "dan/harness/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dan::harness {

Tensor normalize_heatmap(const Tensor& map) {
  Tensor out = map;
  for (double& v : out.data()) v = std::abs(v);
  const auto [lo, hi] = std::minmax_element(out.data().begin(), out.data().end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : out.data()) v = range > 0.0 ? (v - min) / range : 0.5;
  return out;
}

Tensor upsample_nearest(const Tensor& map, std::size_t height, std::size_t width) {
  std::size_t h = 0, w = 0;
  if (map.rank() == 2) {
    h = map.dim(0);
    w = map.dim(1);
  } else if (map.rank() == 3 && map.dim(0) == 1) {
    h = map.dim(1);
    w = map.dim(2);
  } else {
    throw std::invalid_argument("upsample_nearest: expected [h x w] or [1 x h x w], got " + shape_string(map.shape()));
  }
  Tensor out({height, width});
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * h / height;
    for (std::size_t x = 0; x < width; ++x) out[y * width + x] = map[sy * w + x * w / width];
  }
  return out;
}

Tensor overlay_heatmap(const Tensor& frame, const Tensor& heat, double alpha) {
  if (frame.rank() != 3 || frame.dim(0) != 3 || heat.rank() != 2 || heat.dim(0) != frame.dim(1) ||
      heat.dim(1) != frame.dim(2)) {
    throw std::invalid_argument("overlay_heatmap: heat " + shape_string(heat.shape()) + " does not match frame " +
                                shape_string(frame.shape()));
  }
  const std::size_t plane = heat.size();
  Tensor out = frame;
  for (std::size_t i = 0; i < plane; ++i) {
    const double colour[3] = {heat[i], 0.0, 1.0 - heat[i]};
    for (std::size_t c = 0; c < 3; ++c) {
      out[c * plane + i] = (1.0 - alpha) * frame[c * plane + i] + alpha * colour[c];
    }
  }
  return out;
}

void write_ppm(std::ostream& os, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("write_ppm: expected [3 x H x W]");
  const std::size_t h = image.dim(1), w = image.dim(2), plane = h * w;
  os << "P6\n" << w << ' ' << h << "\n255\n";
  std::string bytes(plane * 3, '\0');
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(image[c * plane + i], 0.0, 1.0);
      bytes[i * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_ppm(out, image);
}

Tensor read_ppm(std::istream& is) {
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w == 0 || h == 0) throw std::runtime_error("not an 8-bit binary PPM");
  is.get();
  std::string bytes(w * h * 3, '\0');
  if (!is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) throw std::runtime_error("truncated PPM");
  Tensor out({3, h, w});
  const std::size_t plane = w * h;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out[c * plane + i] = static_cast<unsigned char>(bytes[i * 3 + c]) / 255.0;
    }
  }
  return out;
}

}  // namespace dan::harness
