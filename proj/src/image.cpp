#include "coreuda/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "coreuda/errors.hpp"

namespace coreuda {

Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

namespace {

struct Tap {
  int i0, i1;
  float w0, w1;
};

// Pixel-center sampling: source coord = (j + 0.5) * scale - 0.5, clamped.
std::vector<Tap> make_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int j = 0; j < out; ++j) {
    double x = (j + 0.5) * scale - 0.5;
    if (x < 0.0) x = 0.0;
    if (x > in - 1) x = in - 1;
    int i0 = static_cast<int>(std::floor(x));
    int i1 = std::min(i0 + 1, in - 1);
    float w1 = static_cast<float>(x - i0);
    taps[static_cast<size_t>(j)] = {i0, i1, 1.0f - w1, w1};
  }
  return taps;
}

// Horizontal taps get their right half mirrored from the left half so that
// flip(resize(x)) == resize(flip(x)) exactly, including rounding.
std::vector<Tap> make_symmetric_taps(int in, int out) {
  std::vector<Tap> taps = make_taps(in, out);
  for (int j = 0; j < out / 2; ++j) {
    const Tap& t = taps[static_cast<size_t>(j)];
    taps[static_cast<size_t>(out - 1 - j)] = {in - 1 - t.i1, in - 1 - t.i0, t.w1, t.w0};
  }
  if (out % 2 == 1) {
    // middle column must be self-mirrored
    int j = out / 2;
    Tap& t = taps[static_cast<size_t>(j)];
    if (t.i0 + t.i1 == in - 1) {
      // symmetric pair: force equal weights so products mirror exactly
      if (t.w0 != t.w1) {
        t.w0 = 0.5f;
        t.w1 = 0.5f;
      }
    } else {
      // collapse to the nearer single pixel
      int c = t.w1 > 0.5f ? t.i1 : t.i0;
      t = {c, in - 1 - c, 1.0f, 0.0f};
      if (t.i0 == t.i1) t = {c, c, 1.0f, 0.0f};
      // if i0 and mirror differ the weight on the mirror is zero, which is
      // still exactly flip-symmetric
    }
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (img.height == out_h && img.width == out_w) return img;
  const auto ty = make_taps(img.height, out_h);
  const auto tx = make_symmetric_taps(img.width, out_w);
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    const Tap& a = ty[static_cast<size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const Tap& b = tx[static_cast<size_t>(x)];
      for (int c = 0; c < 3; ++c) {
        float top = img.at(a.i0, b.i0, c) * b.w0 + img.at(a.i0, b.i1, c) * b.w1;
        float bot = img.at(a.i1, b.i0, c) * b.w0 + img.at(a.i1, b.i1, c) * b.w1;
        out.at(y, x, c) = top * a.w0 + bot * a.w1;
      }
    }
  }
  return out;
}

Image edge_pad(const Image& img, int pad) {
  if (pad == 0) return img;
  Image out(img.height + 2 * pad, img.width + 2 * pad);
  for (int y = 0; y < out.height; ++y) {
    int sy = std::clamp(y - pad, 0, img.height - 1);
    for (int x = 0; x < out.width; ++x) {
      int sx = std::clamp(x - pad, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
    throw BadShape("crop: region outside image");
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorruptFile("write_ppm: cannot open " + path.string());
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    float v = img.data[i];
    int q = static_cast<int>(std::lround(v * 255.0f));
    buf[i] = static_cast<unsigned char>(std::clamp(q, 0, 255));
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptFile("read_ppm: cannot open " + path.string());
  std::string magic;
  f >> magic;
  if (magic != "P6") throw CorruptFile("read_ppm: not a P6 file: " + path.string());
  int w = 0, h = 0, maxval = 0;
  f >> w >> h >> maxval;
  if (w <= 0 || h <= 0 || maxval != 255) throw CorruptFile("read_ppm: bad header in " + path.string());
  f.get();  // single whitespace after header
  Image img(h, w);
  std::vector<unsigned char> buf(img.size());
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw CorruptFile("read_ppm: truncated pixel data in " + path.string());
  for (size_t i = 0; i < buf.size(); ++i) img.data[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

}  // namespace coreuda
