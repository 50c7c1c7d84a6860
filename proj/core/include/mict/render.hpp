#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mict/field.hpp"

namespace mict {

// Axial slices fix z, coronal fix y, sagittal fix x. Image columns follow
// the first in-plane axis and rows the second, both ascending.
enum class Plane { Axial, Coronal, Sagittal };

const char* to_string(Plane p);
std::optional<Plane> plane_from_string(std::string_view s);

struct PlaneAxes {
  int u;       // column axis
  int v;       // row axis
  int normal;  // fixed axis
};
PlaneAxes plane_axes(Plane p);

struct Window {
  double center = 0.0;
  double width = 1.0;  // > 0
};

// "c,w"; nullopt unless both parse and w > 0.
std::optional<Window> parse_window(std::string_view s);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

// Grayscale slice of `base` with optional overlays: lesion outline in red
// (mask voxels with a 4-neighbour outside the mask) or a heat tint for
// temperatures above 37 C. Throws Domain for an out of range index.
RgbImage render_slice(const ScalarField& base, Plane plane, int index, const Window& window,
                      const LabelMask* lesion = nullptr, const ScalarField* temperature = nullptr);

// Deterministic 8-bit RGB PNG.
std::string encode_png(const RgbImage& image);

// Marching-squares outline of a mask slice at iso 0.5, joined into
// polylines. Points are world mm along the plane's (u, v) axes.
struct Polyline {
  std::vector<std::array<double, 2>> points;
  bool closed = false;
};

std::vector<Polyline> mask_contours(const LabelMask& mask, Plane plane, int index);

}  // namespace mict
