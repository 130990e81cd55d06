#include "rwnoise/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace rwnoise {

namespace {

// ---------------------------------------------------------------------------------------
// Netpbm

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : b_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string t;
    while (pos_ < b_.size() && !std::isspace(static_cast<unsigned char>(b_[pos_]))) t += b_[pos_++];
    if (t.empty()) throw FormatError("truncated header");
    return t;
  }

  long integer() {
    const std::string t = token();
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw FormatError("expected an integer in header, got '" + t + "'");
    return v;
  }

  double real() {
    const std::string t = token();
    try {
      return std::stod(t);
    } catch (const std::exception&) {
      throw FormatError("expected a number in header, got '" + t + "'");
    }
  }

  // Exactly one whitespace byte separates the header from binary data.
  std::size_t data_start() const { return pos_ + 1; }
  std::size_t pos() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view b_;
  std::size_t pos_ = 0;
};

void check_dims(long w, long h) {
  if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) throw FormatError("invalid image dimensions");
}

Image decode_pgm(std::string_view bytes) {
  HeaderReader r(bytes);
  const std::string magic = r.token();
  const long w = r.integer(), h = r.integer(), maxval = r.integer();
  check_dims(w, h);
  if (maxval <= 0 || maxval > 65535) throw FormatError("PGM maxval must lie in 1..65535");
  Image img(static_cast<int>(w), static_cast<int>(h));
  const std::size_t n = img.pixel_count();
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) img[i] = static_cast<double>(r.integer());
    return img;
  }
  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t start = r.data_start();
  if (bytes.size() < start + n * bps) throw FormatError("PGM pixel data is truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (std::size_t i = 0; i < n; ++i)
    img[i] = bps == 1 ? p[i] : static_cast<double>((p[2 * i] << 8) | p[2 * i + 1]);
  return img;
}

Image decode_pfm(std::string_view bytes) {
  HeaderReader r(bytes);
  const std::string magic = r.token();
  const int channels = magic == "PF" ? 3 : 1;
  const long w = r.integer(), h = r.integer();
  check_dims(w, h);
  const double scale = r.real();
  const bool little = scale < 0;
  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  const std::size_t count = img.pixel_count() * static_cast<std::size_t>(channels);
  const std::size_t start = r.data_start();
  if (bytes.size() < start + count * 4) throw FormatError("PFM pixel data is truncated");
  const bool host_little = std::endian::native == std::endian::little;
  for (long row = 0; row < h; ++row) {
    const long y = h - 1 - row;  // bottom-to-top
    for (long x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t k = (static_cast<std::size_t>(row) * w + x) * channels + c;
        unsigned char raw[4];
        std::memcpy(raw, bytes.data() + start + 4 * k, 4);
        if (little != host_little) std::reverse(raw, raw + 4);
        float v;
        std::memcpy(&v, raw, 4);
        img.at(static_cast<int>(x), static_cast<int>(y), c) = v;
      }
  }
  return img;
}

// ---------------------------------------------------------------------------------------
// PNG through libpng's memory callbacks

struct PngReadState {
  std::string_view bytes;
  std::size_t pos = 0;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + len > st->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, st->bytes.data() + st->pos, len);
  st->pos += len;
}

// libpng reports errors by longjmp; the message is parked in the error pointer and turned
// into an exception once control is back in the frame that called setjmp.
void png_error_cb(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}
void png_warning_cb(png_structp, png_const_charp) {}

struct DecodedPng {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  bool palette = false;
  std::vector<unsigned> samples;  // row-major, interleaved
};

// Palette images keep their indices when `keep_indices` is set.
DecodedPng decode_png_raw(std::string_view bytes, bool keep_indices) {
  std::string err;
  DecodedPng out;
  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  PngReadState st{bytes, 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw FormatError("PNG: cannot allocate decoder");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("PNG: cannot allocate decoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG: " + err);
  }
  png_set_read_fn(png, &st, png_read_cb);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  if (w == 0 || h == 0 || w > 1 << 16 || h > 1 << 16) png_error(png, "invalid image dimensions");
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  out.palette = color == PNG_COLOR_TYPE_PALETTE;
  if (out.palette && !keep_indices) png_set_palette_to_rgb(png);
  if (out.palette && keep_indices && depth < 8) png_set_packing(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.channels = png_get_channels(png, info);
  out.bit_depth = depth;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t per_row = static_cast<std::size_t>(w) * out.channels;
  out.samples.resize(per_row * h);
  for (png_uint_32 y = 0; y < h; ++y)
    for (std::size_t k = 0; k < per_row; ++k) {
      const unsigned char* row = rows[y];
      out.samples[y * per_row + k] = depth == 16 ? (unsigned(row[2 * k]) << 8) | row[2 * k + 1] : row[k];
    }
  return out;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}
void png_flush_cb(png_structp) {}

std::string encode_png(int width, int height, int color_type, const std::vector<unsigned char>& pixels,
                       const std::vector<png_color>& palette = {}) {
  std::string err;
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw FormatError("PNG: cannot allocate encoder");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("PNG: cannot allocate encoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG: " + err);
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (!palette.empty()) png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * (color_type == PNG_COLOR_TYPE_RGB ? 3 : 1);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

bool starts_with(std::string_view b, std::string_view p) { return b.substr(0, p.size()) == p; }
bool is_png(std::string_view b) { return starts_with(b, "\x89PNG\r\n\x1a\n"); }

constexpr std::array<std::array<unsigned char, 3>, 10> kPalette{{{31, 119, 180},
                                                                 {255, 127, 14},
                                                                 {44, 160, 44},
                                                                 {214, 39, 40},
                                                                 {148, 103, 189},
                                                                 {140, 86, 75},
                                                                 {227, 119, 194},
                                                                 {127, 127, 127},
                                                                 {188, 189, 34},
                                                                 {23, 190, 207}}};

}  // namespace

std::array<unsigned char, 3> palette_color(int label) {
  return kPalette[static_cast<std::size_t>(((label % 10) + 10) % 10)];
}

Image decode_image(std::string_view bytes) {
  if (is_png(bytes)) {
    const DecodedPng d = decode_png_raw(bytes, false);
    Image img(d.width, d.height, d.channels);
    for (std::size_t i = 0; i < d.samples.size(); ++i) img.storage()[i] = d.samples[i];
    return img;
  }
  if (starts_with(bytes, "P5") || starts_with(bytes, "P2")) return decode_pgm(bytes);
  if (starts_with(bytes, "Pf") || starts_with(bytes, "PF")) return decode_pfm(bytes);
  throw FormatError("unrecognized image format (expected PGM, PNG or PFM)");
}

Image read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

Image stack_channels(const std::vector<Image>& planes) {
  if (planes.empty()) throw PreconditionError("no image planes given");
  const int w = planes[0].width(), h = planes[0].height();
  for (const auto& p : planes)
    if (p.width() != w || p.height() != h || p.channels() != 1)
      throw PreconditionError("stacked planes must be single-channel images of equal size");
  Image out(w, h, static_cast<int>(planes.size()));
  for (std::size_t i = 0; i < out.pixel_count(); ++i)
    for (std::size_t c = 0; c < planes.size(); ++c) out.storage()[i * planes.size() + c] = planes[c][i];
  return out;
}

LabelMap decode_label_map(std::string_view bytes) {
  Image img;
  if (is_png(bytes)) {
    const DecodedPng d = decode_png_raw(bytes, true);
    if (d.channels != 1) throw FormatError("label PNG must be a palette or grayscale image");
    LabelMap out(d.width, d.height);
    for (std::size_t i = 0; i < d.samples.size(); ++i) out[i] = static_cast<int>(d.samples[i]);
    return out;
  }
  img = decode_image(bytes);
  if (img.channels() != 1) throw FormatError("label map must have a single channel");
  LabelMap out(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double v = img[i];
    if (v < 0 || v != std::floor(v)) throw FormatError("label map values must be nonnegative integers");
    out[i] = static_cast<int>(v);
  }
  return out;
}

LabelMap read_label_map(const std::filesystem::path& path) { return decode_label_map(read_file(path)); }

std::string encode_label_png(const LabelMap& labels) {
  int max_label = 0;
  for (int l : labels.data()) {
    if (l < 0 || l > 255) throw PreconditionError("palette PNG labels must lie in 0..255");
    max_label = std::max(max_label, l);
  }
  std::vector<png_color> palette;
  for (int l = 0; l <= max_label; ++l) {
    const auto c = palette_color(l);
    palette.push_back({c[0], c[1], c[2]});
  }
  std::vector<unsigned char> px(labels.data().begin(), labels.data().end());
  return encode_png(labels.width(), labels.height(), PNG_COLOR_TYPE_PALETTE, px, palette);
}

std::string encode_overlay_png(const Image& image, const LabelMap& labels, double alpha) {
  if (image.width() != labels.width() || image.height() != labels.height())
    throw PreconditionError("overlay: image and labels differ in size");
  alpha = std::clamp(alpha, 0.0, 1.0);
  const std::size_t n = image.pixel_count();
  std::vector<double> gray(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = image.pixel(image.pixel_at(i).x, image.pixel_at(i).y);
    if (p.size() == 1) {
      gray[i] = p[0];
    } else {
      double s = 0.0;
      for (double v : p) s += v * v;
      gray[i] = std::sqrt(s);
    }
  }
  const auto [lo, hi] = std::minmax_element(gray.begin(), gray.end());
  const double lo_v = *lo, span = *hi - *lo;
  std::vector<unsigned char> px(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = span > 0 ? 255.0 * (gray[i] - lo_v) / span : 128.0;
    const auto c = palette_color(labels[i]);
    for (int k = 0; k < 3; ++k) px[3 * i + k] = static_cast<unsigned char>(std::lround((1.0 - alpha) * g + alpha * c[k]));
  }
  return encode_png(image.width(), image.height(), PNG_COLOR_TYPE_RGB, px);
}

std::string encode_pfm(int width, int height, const std::vector<double>& values) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw PreconditionError("PFM: size mismatch");
  std::string out = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + values.size() * 4);
  std::size_t k = 0;
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x, ++k) {
      const float v = static_cast<float>(values[static_cast<std::size_t>(y) * width + x]);
      unsigned char raw[4];
      std::memcpy(raw, &v, 4);
      if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + 4);
      std::memcpy(out.data() + header + 4 * k, raw, 4);
    }
  }
  return out;
}

std::string encode_pgm(const Image& image) {
  if (image.channels() != 1) throw PreconditionError("PGM holds a single channel");
  std::vector<unsigned> v(image.pixel_count());
  unsigned maxv = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<unsigned>(std::clamp(std::lround(image[i]), 0L, 65535L));
    maxv = std::max(maxv, v[i]);
  }
  const unsigned maxval = maxv < 256 ? 255 : 65535;
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n" +
                    std::to_string(maxval) + "\n";
  for (unsigned x : v) {
    if (maxval == 255) {
      out.push_back(static_cast<char>(x));
    } else {
      out.push_back(static_cast<char>(x >> 8));
      out.push_back(static_cast<char>(x & 0xff));
    }
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::random_device rd;
  std::filesystem::path tmp = path;
  tmp += ".tmp-" + std::to_string(rd());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    if (!f) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SeedMap parse_seeds(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("seeds: invalid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("seeds")) j = j["seeds"];
  if (!j.is_array()) throw FormatError("seeds: expected a JSON array of {x, y, label}");
  SeedMap seeds;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("x") || !e.contains("y") || !e.contains("label"))
      throw FormatError("seeds: every entry needs x, y and label");
    for (const char* k : {"x", "y", "label"})
      if (!e[k].is_number_integer()) throw FormatError(std::string("seeds: '") + k + "' must be an integer");
    const Seed s{e["x"].get<int>(), e["y"].get<int>(), e["label"].get<int>()};
    if (s.label < 0) throw FormatError("seeds: labels must be nonnegative");
    seeds.push_back(s);
  }
  return seeds;
}

std::string seeds_to_json(const SeedMap& seeds) {
  nlohmann::json j = nlohmann::json::array();
  for (const Seed& s : seeds) j.push_back({{"x", s.x}, {"y", s.y}, {"label", s.label}});
  return j.dump();
}

}  // namespace rwnoise
