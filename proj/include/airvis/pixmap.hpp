#pragma once

// Pixel containers shared by every stage, plus PNG and PFM file I/O.
//
// Pixel (x, y) addresses column x and row y; row 0 is the top of the image.
// All intensities are normalized doubles in [0, 1]. Scalar maps mark invalid
// pixels with NaN.

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "airvis/error.hpp"

namespace airvis {

/// Dense row-major 2D array.
template <typename T>
class Plane {
 public:
  using value_type = T;

  Plane() = default;
  Plane(int width, int height, const T& fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw InvalidArgument("plane dimensions must be positive, got " +
                            std::to_string(width) + "x" + std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  [[nodiscard]] std::span<T> values() noexcept { return data_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return data_; }

  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  template <typename U>
  [[nodiscard]] bool same_shape(const Plane<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  [[nodiscard]] double operator[](int c) const noexcept { return c == 0 ? r : (c == 1 ? g : b); }
  double& operator[](int c) noexcept { return c == 0 ? r : (c == 1 ? g : b); }
  [[nodiscard]] double min_channel() const noexcept { return std::min({r, g, b}); }
  [[nodiscard]] double sum() const noexcept { return r + g + b; }

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

using RgbImage = Plane<Rgb>;
/// Real-valued map; NaN marks an invalid pixel.
using ScalarMap = Plane<double>;
using BitMask = Plane<std::uint8_t>;

inline constexpr double kInvalid = std::numeric_limits<double>::quiet_NaN();

[[nodiscard]] inline bool is_valid(double v) noexcept { return !std::isnan(v); }

template <typename T>
void require_same_shape(const Plane<T>& a, const char* what_a, const auto& b, const char* what_b) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << what_a << " is " << a.width() << "x" << a.height() << " but " << what_b << " is "
       << b.width() << "x" << b.height();
    throw InvalidArgument(os.str());
  }
}

[[nodiscard]] inline std::size_t count_true(const BitMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](auto v) { return v != 0; }));
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

struct PngErrorState {
  std::jmp_buf jump;
  char message[256] = {};
};

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof(state->message), "%s", msg ? msg : "unknown libpng error");
  std::longjmp(state->jump, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngRaw {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // row-major, big-endian samples for 16-bit
};

// Reads the raw samples of an 8/16-bit non-palette PNG. Every object with a
// destructor is constructed before setjmp, so a libpng longjmp skips none.
inline PngRaw read_png_raw(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image '" + path + "'");

  std::uint8_t signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError("'" + path + "' is not a PNG file");
  }

  PngErrorState state;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler,
                                           png_warning_handler);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }

  PngRaw raw;
  std::vector<png_bytep> rows;
  const char* volatile unsupported = nullptr;
  if (setjmp(state.jump)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG '" + path + "': " + state.message);
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    unsupported = "palette PNGs are not supported";
  } else if (raw.bit_depth != 8 && raw.bit_depth != 16) {
    unsupported = "only 8-bit and 16-bit PNGs are supported";
  }
  if (unsupported == nullptr) {
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    raw.channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.bytes.resize(row_bytes * static_cast<std::size_t>(raw.height));
    rows.resize(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) {
      rows[static_cast<std::size_t>(y)] = raw.bytes.data() + row_bytes * static_cast<std::size_t>(y);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (unsupported) throw IoError("'" + path + "': " + unsupported);
  return raw;
}

// Writes interleaved samples (1 or 3 channels, 8 or 16 bits). Samples are
// native integers; 16-bit samples are byte-swapped to big-endian here.
inline void write_png_raw(const std::string& path, int width, int height, int channels,
                          int bit_depth, std::span<const std::uint16_t> samples) {
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(channels) * bytes_per_sample;
  std::vector<std::uint8_t> buffer(row_bytes * static_cast<std::size_t>(height));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bit_depth == 16) {
      buffer[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xFF);
    } else {
      buffer[i] = static_cast<std::uint8_t>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = buffer.data() + row_bytes * static_cast<std::size_t>(y);
  }

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write '" + path + "'");

  PngErrorState state;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler,
                                            png_warning_handler);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(state.jump)) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG '" + path + "': " + state.message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("failed writing PNG '" + path + "'");
}

[[nodiscard]] inline std::uint16_t quantize(double v, double max_code) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(clamped * max_code));
}

}  // namespace detail

/// Loads an 8- or 16-bit RGB or grayscale PNG (alpha, if present, is dropped).
/// Samples are divided by the bit-depth maximum; gray is replicated to RGB.
[[nodiscard]] inline RgbImage load_image(const std::string& path) {
  const detail::PngRaw raw = detail::read_png_raw(path);
  const double max_code = raw.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bps = raw.bit_depth == 16 ? 2 : 1;
  auto sample = [&](std::size_t i) -> double {
    if (bps == 2) {
      return static_cast<double>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]) / max_code;
    }
    return static_cast<double>(raw.bytes[i]) / max_code;
  };

  RgbImage img(raw.width, raw.height);
  const bool color = raw.channels >= 3;
  for (std::size_t p = 0; p < img.size(); ++p) {
    const std::size_t base = p * static_cast<std::size_t>(raw.channels);
    if (color) {
      img[p] = Rgb{sample(base), sample(base + 1), sample(base + 2)};
    } else {
      const double v = sample(base);
      img[p] = Rgb{v, v, v};
    }
  }
  return img;
}

/// Saves an RGB image as an 8- or 16-bit PNG, rounding to the nearest code.
inline void save_image(const RgbImage& img, const std::string& path, int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("PNG bit depth must be 8 or 16");
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint16_t> samples(img.size() * 3);
  for (std::size_t p = 0; p < img.size(); ++p) {
    for (int c = 0; c < 3; ++c) samples[3 * p + static_cast<std::size_t>(c)] = detail::quantize(img[p][c], max_code);
  }
  detail::write_png_raw(path, img.width(), img.height(), 3, bit_depth, samples);
}

// ---------------------------------------------------------------------------
// PFM (single channel, little-endian, bottom row first)

/// Reads a single-channel PFM ("Pf"). Either endianness is accepted.
[[nodiscard]] inline ScalarMap load_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || magic != "Pf") throw IoError("'" + path + "' is not a single-channel PFM");
  if (width <= 0 || height <= 0 || scale == 0.0) throw IoError("'" + path + "': bad PFM header");
  in.get();  // the single whitespace byte after the scale

  std::vector<std::uint32_t> words(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (in.gcount() != static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t))) {
    throw IoError("'" + path + "': truncated PFM data");
  }
  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;

  ScalarMap map(width, height);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      std::uint32_t w = words[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                              static_cast<std::size_t>(x)];
      if (file_little != host_little) w = __builtin_bswap32(w);
      map(x, y) = static_cast<double>(std::bit_cast<float>(w));
    }
  }
  return map;
}

/// Writes a single-channel little-endian PFM. Values are stored as 32-bit
/// floats; `invalid_value` replaces NaN pixels.
inline void save_pfm(const ScalarMap& map, const std::string& path,
                     double invalid_value = kInvalid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "Pf\n" << map.width() << " " << map.height() << "\n-1.0\n";
  std::vector<std::uint32_t> words;
  words.reserve(map.size());
  for (int row = 0; row < map.height(); ++row) {
    const int y = map.height() - 1 - row;
    for (int x = 0; x < map.width(); ++x) {
      const double v = is_valid(map(x, y)) ? map(x, y) : invalid_value;
      std::uint32_t w = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
      words.push_back(w);
    }
  }
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw IoError("failed writing '" + path + "'");
}

enum class MapEncoding { kPfm, kPng16, kPng8 };

struct MapEncodingSpec {
  MapEncoding encoding = MapEncoding::kPfm;
  double min = 0.0;  // png encodings only
  double max = 1.0;
};

/// Persists a scalar map. PNG encodings clamp to [min, max] and map that range
/// affinely onto the full integer range; invalid pixels are written as 0.
/// PFM keeps raw floats and writes NaN for invalid pixels unless the caller
/// picks a sentinel via save_pfm directly.
inline void save_scalar_map(const ScalarMap& map, const std::string& path,
                            const MapEncodingSpec& spec = {}) {
  if (spec.encoding == MapEncoding::kPfm) {
    save_pfm(map, path);
    return;
  }
  if (!(spec.min < spec.max)) throw InvalidArgument("PNG map encoding requires min < max");
  const int bit_depth = spec.encoding == MapEncoding::kPng16 ? 16 : 8;
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint16_t> samples(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double v = map[i];
    samples[i] = is_valid(v) ? detail::quantize((v - spec.min) / (spec.max - spec.min), max_code) : 0;
  }
  detail::write_png_raw(path, map.width(), map.height(), 1, bit_depth, samples);
}

/// Reads a grayscale PNG's raw integer codes (no scaling). Mostly for tests and tools.
[[nodiscard]] inline Plane<std::uint16_t> load_png_codes(const std::string& path) {
  const detail::PngRaw raw = detail::read_png_raw(path);
  Plane<std::uint16_t> codes(raw.width, raw.height);
  for (std::size_t p = 0; p < codes.size(); ++p) {
    const std::size_t i = p * static_cast<std::size_t>(raw.channels);
    codes[p] = raw.bit_depth == 16
                   ? static_cast<std::uint16_t>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1])
                   : raw.bytes[i];
  }
  return codes;
}

}  // namespace airvis
