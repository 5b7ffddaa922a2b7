#pragma once

// 2.5D digital surface models: ESRI ASCII grid I/O, bilinear sampling and
// fine-over-coarse merging.
//
// Heights live at cell centers. Row 0 is the northernmost row, so cell
// (col, row) has its center at
//   x = origin_x + (col + 0.5) * cell_size
//   y = origin_y + (nrows - row - 0.5) * cell_size
// in a local metric frame (x east, y north, z up).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "airvis/error.hpp"

namespace airvis {

/// Placement and resolution of a grid, without its values.
struct GridSpec {
  int ncols = 0;
  int nrows = 0;
  double origin_x = 0.0;  // lower-left corner
  double origin_y = 0.0;
  double cell_size = 1.0;

  [[nodiscard]] double max_x() const noexcept { return origin_x + ncols * cell_size; }
  [[nodiscard]] double max_y() const noexcept { return origin_y + nrows * cell_size; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct HeightGrid {
  int ncols = 0;
  int nrows = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 1.0;
  double nodata = -9999.0;
  std::vector<double> heights;  // row-major, row 0 = north

  HeightGrid() = default;
  HeightGrid(const GridSpec& spec, double fill, double nodata_value = -9999.0)
      : ncols(spec.ncols),
        nrows(spec.nrows),
        origin_x(spec.origin_x),
        origin_y(spec.origin_y),
        cell_size(spec.cell_size),
        nodata(nodata_value),
        heights(static_cast<std::size_t>(spec.ncols) * static_cast<std::size_t>(spec.nrows), fill) {
    validate();
  }

  [[nodiscard]] GridSpec spec() const noexcept {
    return GridSpec{ncols, nrows, origin_x, origin_y, cell_size};
  }

  [[nodiscard]] double& at(int col, int row) {
    return heights[static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols) +
                   static_cast<std::size_t>(col)];
  }
  [[nodiscard]] double at(int col, int row) const {
    return heights[static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols) +
                   static_cast<std::size_t>(col)];
  }

  [[nodiscard]] bool is_nodata(double h) const noexcept { return h == nodata; }
  [[nodiscard]] bool is_nodata(int col, int row) const { return is_nodata(at(col, row)); }

  [[nodiscard]] double center_x(int col) const noexcept { return origin_x + (col + 0.5) * cell_size; }
  [[nodiscard]] double center_y(int row) const noexcept {
    return origin_y + (nrows - row - 0.5) * cell_size;
  }

  [[nodiscard]] bool in_extent(double x, double y) const noexcept {
    return x >= origin_x && x <= origin_x + ncols * cell_size && y >= origin_y &&
           y <= origin_y + nrows * cell_size;
  }

  /// Largest valid height, or -inf when every cell is no-data.
  [[nodiscard]] double max_height() const noexcept {
    double best = -std::numeric_limits<double>::infinity();
    for (double h : heights) {
      if (!is_nodata(h)) best = std::max(best, h);
    }
    return best;
  }

  void validate() const {
    if (ncols < 2 || nrows < 2) throw InvalidArgument("height grid needs at least 2x2 cells");
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
      throw InvalidArgument("height grid cell size must be positive");
    }
    if (heights.size() != static_cast<std::size_t>(ncols) * static_cast<std::size_t>(nrows)) {
      throw InvalidArgument("height grid has " + std::to_string(heights.size()) +
                            " values, expected " + std::to_string(ncols * nrows));
    }
    for (double h : heights) {
      if (!is_nodata(h) && !std::isfinite(h)) throw InvalidArgument("non-finite height in grid");
    }
  }
};

namespace detail {

[[nodiscard]] inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

[[nodiscard]] inline std::optional<double> parse_double(std::string_view token) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return v;
}

[[nodiscard]] inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses an ESRI ASCII grid from a stream; `name` is used in messages.
[[nodiscard]] inline HeightGrid parse_grid(std::istream& in, const std::string& name = "<grid>") {
  std::map<std::string, double> header;
  std::string line;
  int line_no = 0;
  std::vector<double> cells;
  bool in_data = false;

  auto fail = [&](const std::string& what) -> ParseError {
    return ParseError(name + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string first;
    if (!(tokens >> first)) continue;

    if (!in_data && !detail::parse_double(first)) {
      const std::string key = detail::lower(first);
      static const char* const kKnown[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize",
                                           "nodata_value"};
      if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
        throw fail("unknown header key '" + first + "'");
      }
      if (header.count(key)) throw fail("duplicate header key '" + first + "'");
      std::string value_token;
      if (!(tokens >> value_token)) throw fail("header key '" + first + "' has no value");
      const auto value = detail::parse_double(value_token);
      if (!value) throw fail("header value '" + value_token + "' is not a number");
      header[key] = *value;
      continue;
    }

    in_data = true;
    std::string token = first;
    do {
      const auto value = detail::parse_double(token);
      if (!value) throw fail("cell value '" + token + "' is not a number");
      cells.push_back(*value);
    } while (tokens >> token);
  }

  for (const char* required : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"}) {
    if (!header.count(required)) {
      throw ParseError(name + ": missing header key '" + std::string(required) + "'");
    }
  }

  HeightGrid grid;
  const double ncols = header["ncols"];
  const double nrows = header["nrows"];
  if (ncols != std::floor(ncols) || nrows != std::floor(nrows) || ncols < 2 || nrows < 2) {
    throw ParseError(name + ": ncols and nrows must be integers >= 2");
  }
  grid.ncols = static_cast<int>(ncols);
  grid.nrows = static_cast<int>(nrows);
  grid.origin_x = header["xllcorner"];
  grid.origin_y = header["yllcorner"];
  grid.cell_size = header["cellsize"];
  if (header.count("nodata_value")) grid.nodata = header["nodata_value"];
  if (cells.size() != static_cast<std::size_t>(grid.ncols) * static_cast<std::size_t>(grid.nrows)) {
    throw ParseError(name + ": expected " + std::to_string(grid.ncols * grid.nrows) +
                     " cells, found " + std::to_string(cells.size()));
  }
  grid.heights = std::move(cells);
  try {
    grid.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(name + ": " + e.what());
  }
  return grid;
}

[[nodiscard]] inline HeightGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid '" + path + "'");
  return parse_grid(in, path);
}

inline void write_grid(std::ostream& out, const HeightGrid& grid) {
  out << "ncols " << grid.ncols << "\n"
      << "nrows " << grid.nrows << "\n"
      << "xllcorner " << detail::format_double(grid.origin_x) << "\n"
      << "yllcorner " << detail::format_double(grid.origin_y) << "\n"
      << "cellsize " << detail::format_double(grid.cell_size) << "\n"
      << "nodata_value " << detail::format_double(grid.nodata) << "\n";
  for (int row = 0; row < grid.nrows; ++row) {
    for (int col = 0; col < grid.ncols; ++col) {
      if (col) out << ' ';
      out << detail::format_double(grid.at(col, row));
    }
    out << '\n';
  }
}

inline void save_grid(const HeightGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write grid '" + path + "'");
  write_grid(out, grid);
  if (!out) throw IoError("failed writing grid '" + path + "'");
}

/// Bilinear height at (x, y) from the four surrounding cell centers.
///
/// Returns nullopt outside the grid extent or when a cell with non-zero
/// weight is no-data. Inside the outer half-cell border the lookup clamps to
/// the edge centers.
[[nodiscard]] inline std::optional<double> sample_height(const HeightGrid& grid, double x, double y) {
  if (!grid.in_extent(x, y)) return std::nullopt;

  const double fx = std::clamp((x - grid.origin_x) / grid.cell_size - 0.5, 0.0,
                               static_cast<double>(grid.ncols - 1));
  // Continuous row index measured from the north edge.
  const double fy = std::clamp((grid.origin_y + grid.nrows * grid.cell_size - y) / grid.cell_size - 0.5,
                               0.0, static_cast<double>(grid.nrows - 1));
  int c0 = static_cast<int>(std::floor(fx));
  int r0 = static_cast<int>(std::floor(fy));
  c0 = std::min(c0, grid.ncols - 2);
  r0 = std::min(r0, grid.nrows - 2);
  const double tx = fx - c0;
  const double ty = fy - r0;

  const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  const double h[4] = {grid.at(c0, r0), grid.at(c0 + 1, r0), grid.at(c0, r0 + 1),
                       grid.at(c0 + 1, r0 + 1)};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (w[i] == 0.0) continue;
    if (grid.is_nodata(h[i])) return std::nullopt;
    sum += w[i] * h[i];
  }
  return sum;
}

/// Resamples `fine` onto `target`, falling back to `coarse` wherever the fine
/// sample is no-data. Output nodata sentinel follows `coarse`.
[[nodiscard]] inline HeightGrid merge_grids(const HeightGrid& fine, const HeightGrid& coarse,
                                            const GridSpec& target) {
  auto overlaps = [](const HeightGrid& a, const HeightGrid& b) {
    return a.origin_x < b.origin_x + b.ncols * b.cell_size &&
           b.origin_x < a.origin_x + a.ncols * a.cell_size &&
           a.origin_y < b.origin_y + b.nrows * b.cell_size &&
           b.origin_y < a.origin_y + a.nrows * a.cell_size;
  };
  if (!overlaps(fine, coarse)) throw InvalidArgument("fine and coarse grids do not overlap");

  HeightGrid out(target, coarse.nodata, coarse.nodata);
  for (int row = 0; row < out.nrows; ++row) {
    const double y = out.center_y(row);
    for (int col = 0; col < out.ncols; ++col) {
      const double x = out.center_x(col);
      if (auto h = sample_height(fine, x, y)) {
        out.at(col, row) = *h;
      } else if (auto hc = sample_height(coarse, x, y)) {
        out.at(col, row) = *hc;
      }
    }
  }
  return out;
}

/// Default merge target: the coarse grid's extent at the fine grid's resolution.
[[nodiscard]] inline GridSpec default_merge_target(const HeightGrid& fine, const HeightGrid& coarse) {
  GridSpec spec;
  spec.origin_x = coarse.origin_x;
  spec.origin_y = coarse.origin_y;
  spec.cell_size = fine.cell_size;
  spec.ncols = std::max(2, static_cast<int>(std::ceil(coarse.ncols * coarse.cell_size / fine.cell_size - 1e-9)));
  spec.nrows = std::max(2, static_cast<int>(std::ceil(coarse.nrows * coarse.cell_size / fine.cell_size - 1e-9)));
  return spec;
}

[[nodiscard]] inline HeightGrid merge_grids(const HeightGrid& fine, const HeightGrid& coarse) {
  return merge_grids(fine, coarse, default_merge_target(fine, coarse));
}

}  // namespace airvis
