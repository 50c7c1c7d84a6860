#include "mict/render.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <png.h>

#include "mict/error.hpp"
#include "mict/io_util.hpp"

namespace mict {

const char* to_string(Plane p) {
  switch (p) {
    case Plane::Axial: return "axial";
    case Plane::Coronal: return "coronal";
    case Plane::Sagittal: return "sagittal";
  }
  return "?";
}

std::optional<Plane> plane_from_string(std::string_view s) {
  if (s == "axial") return Plane::Axial;
  if (s == "coronal") return Plane::Coronal;
  if (s == "sagittal") return Plane::Sagittal;
  return std::nullopt;
}

PlaneAxes plane_axes(Plane p) {
  switch (p) {
    case Plane::Axial: return {0, 1, 2};
    case Plane::Coronal: return {0, 2, 1};
    case Plane::Sagittal: return {1, 2, 0};
  }
  return {0, 1, 2};
}

std::optional<Window> parse_window(std::string_view s) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) return std::nullopt;
  Window w;
  if (!parse_double(s.substr(0, comma), w.center) || !parse_double(s.substr(comma + 1), w.width)) return std::nullopt;
  if (!(w.width > 0.0) || !std::isfinite(w.center)) return std::nullopt;
  return w;
}

namespace {

std::size_t voxel_at(const GridSpec& g, const PlaneAxes& ax, int index, int col, int row) {
  Index3 c{};
  c[ax.u] = col;
  c[ax.v] = row;
  c[ax.normal] = index;
  return g.index(c[0], c[1], c[2]);
}

void check_index(const GridSpec& g, const PlaneAxes& ax, int index) {
  if (index < 0 || index >= g.dims[ax.normal])
    throw Error(ErrorCode::Domain, "slice index " + std::to_string(index) + " outside 0.." +
                                       std::to_string(g.dims[ax.normal] - 1));
}

}  // namespace

RgbImage render_slice(const ScalarField& base, Plane plane, int index, const Window& window, const LabelMask* lesion,
                      const ScalarField* temperature) {
  const GridSpec& g = base.grid();
  const PlaneAxes ax = plane_axes(plane);
  check_index(g, ax, index);
  if (lesion && !(lesion->grid() == g)) throw Error(ErrorCode::ShapeMismatch, "lesion overlay grid differs");
  if (temperature && !(temperature->grid() == g))
    throw Error(ErrorCode::ShapeMismatch, "temperature overlay grid differs");
  RgbImage img;
  img.width = g.dims[ax.u];
  img.height = g.dims[ax.v];
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  const double lo = window.center - 0.5 * window.width;
  for (int row = 0; row < img.height; ++row)
    for (int col = 0; col < img.width; ++col) {
      const std::size_t idx = voxel_at(g, ax, index, col, row);
      const double f = std::clamp((base[idx] - lo) / window.width, 0.0, 1.0);
      double r = 255.0 * f, gr = r, b = r;
      if (temperature) {
        const double t = (*temperature)[idx];
        if (t > 310.5) {
          const double h = std::clamp((t - 310.0) / 53.0, 0.0, 1.0);
          const double a = 0.25 + 0.5 * h;
          r = r * (1 - a) + 255.0 * a;
          gr = gr * (1 - a) + 200.0 * (1 - h) * a;
          b = b * (1 - a);
        }
      }
      if (lesion && (*lesion)[idx]) {
        bool edge = false;
        const int nb[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
        for (const auto& d : nb) {
          const int c2 = col + d[0], r2 = row + d[1];
          if (c2 < 0 || r2 < 0 || c2 >= img.width || r2 >= img.height || !(*lesion)[voxel_at(g, ax, index, c2, r2)])
            edge = true;
        }
        if (edge) r = 255.0, gr = 0.0, b = 0.0;
      }
      std::uint8_t* px = &img.pixels[(static_cast<std::size_t>(row) * img.width + col) * 3];
      px[0] = static_cast<std::uint8_t>(std::lround(r));
      px[1] = static_cast<std::uint8_t>(std::lround(gr));
      px[2] = static_cast<std::uint8_t>(std::lround(b));
    }
  return img;
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void png_noop_flush(png_structp) {}

}  // namespace

std::string encode_png(const RgbImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw Error(ErrorCode::InvalidArgument, "image buffer does not match its size");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::Io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw Error(ErrorCode::Io, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_append, png_noop_flush);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int row = 0; row < image.height; ++row)
    png_write_row(png, const_cast<png_bytep>(&image.pixels[static_cast<std::size_t>(row) * image.width * 3]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<Polyline> mask_contours(const LabelMask& mask, Plane plane, int index) {
  const GridSpec& g = mask.grid();
  const PlaneAxes ax = plane_axes(plane);
  check_index(g, ax, index);
  const int w = g.dims[ax.u], h = g.dims[ax.v];
  // Padded occupancy, so every outline closes.
  auto inside = [&](int col, int row) {
    if (col < 0 || row < 0 || col >= w || row >= h) return false;
    return mask[voxel_at(g, ax, index, col, row)] != 0;
  };
  using Key = std::pair<int, int>;  // half-pixel units, shifted by +2
  // Edge ids: 0 bottom, 1 right, 2 top, 3 left of the cell with corner (x, y).
  static const int table[16][4] = {{-1, -1, -1, -1}, {3, 0, -1, -1}, {0, 1, -1, -1}, {3, 1, -1, -1},
                                   {1, 2, -1, -1},   {3, 0, 1, 2},    {0, 2, -1, -1}, {3, 2, -1, -1},
                                   {2, 3, -1, -1},   {0, 2, -1, -1},  {0, 1, 2, 3},   {1, 2, -1, -1},
                                   {1, 3, -1, -1},   {0, 1, -1, -1},  {0, 3, -1, -1}, {-1, -1, -1, -1}};
  std::vector<std::pair<Key, Key>> segs;
  for (int y = -1; y < h; ++y)
    for (int x = -1; x < w; ++x) {
      const int c = (inside(x, y) ? 1 : 0) | (inside(x + 1, y) ? 2 : 0) | (inside(x + 1, y + 1) ? 4 : 0) |
                    (inside(x, y + 1) ? 8 : 0);
      auto key = [&](int e) -> Key {
        const int bx = 2 * x + 2, by = 2 * y + 2;
        switch (e) {
          case 0: return {bx + 1, by};
          case 1: return {bx + 2, by + 1};
          case 2: return {bx + 1, by + 2};
          default: return {bx, by + 1};
        }
      };
      for (int s = 0; s < 4 && table[c][s] >= 0; s += 2) segs.emplace_back(key(table[c][s]), key(table[c][s + 1]));
    }
  std::map<Key, std::vector<std::size_t>> at;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    at[segs[i].first].push_back(i);
    at[segs[i].second].push_back(i);
  }
  auto world = [&](const Key& k) -> std::array<double, 2> {
    return {g.origin[ax.u] + g.spacing[ax.u] * (k.first / 2.0 - 1.0),
            g.origin[ax.v] + g.spacing[ax.v] * (k.second / 2.0 - 1.0)};
  };
  std::vector<std::uint8_t> used(segs.size(), 0);
  std::vector<Polyline> out;
  for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
    if (used[s0]) continue;
    Polyline line;
    used[s0] = 1;
    const Key start = segs[s0].first;
    Key cur = segs[s0].second;
    line.points.push_back(world(start));
    line.points.push_back(world(cur));
    while (cur != start) {
      std::size_t next = segs.size();
      for (auto cand : at[cur])
        if (!used[cand]) {
          next = cand;
          break;
        }
      if (next == segs.size()) break;
      used[next] = 1;
      cur = segs[next].first == cur ? segs[next].second : segs[next].first;
      line.points.push_back(world(cur));
    }
    line.closed = cur == start;
    if (line.closed) line.points.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace mict
