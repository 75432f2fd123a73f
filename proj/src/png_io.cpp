#include "signbench/png_io.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>

namespace signbench {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_chunk(std::vector<std::uint8_t>& out, const char tag[4],
               const std::uint8_t* data, std::size_t n) {
  put_u32(out, static_cast<std::uint32_t>(n));
  const std::size_t start = out.size();
  out.insert(out.end(), tag, tag + 4);
  if (n > 0) out.insert(out.end(), data, data + n);
  const auto crc = crc32(0, out.data() + start, static_cast<uInt>(4 + n));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data, std::size_t n) {
  uLongf cap = compressBound(static_cast<uLong>(n));
  std::vector<std::uint8_t> out(cap);
  if (compress2(out.data(), &cap, data, static_cast<uLong>(n), 6) != Z_OK)
    throw PngError("deflate failed");
  out.resize(cap);
  return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t n,
                                       std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf len = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &len, data, static_cast<uLong>(n));
  if (rc != Z_OK || len != expected) throw PngError("inflate failed");
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

constexpr std::uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  const int c = img.channels();
  if (c != 3 && c != 4) throw PngError("encode_png: expected RGB or RGBA");
  const auto pixels = to_bytes(img);
  const std::size_t stride = static_cast<std::size_t>(img.width) * c;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + y * stride, pixels.begin() + (y + 1) * stride);
  }
  const auto idat = zlib_deflate(raw.data(), raw.size());

  std::vector<std::uint8_t> out(kSig, kSig + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;                                   // bit depth
  ihdr[9] = (c == 3) ? 2 : 6;                    // color type
  ihdr[10] = ihdr[11] = ihdr[12] = 0;            // deflate, adaptive, no interlace
  put_chunk(out, "IHDR", ihdr, 13);
  put_chunk(out, "IDAT", idat.data(), idat.size());
  put_chunk(out, "IEND", nullptr, 0);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PngError("cannot open for write: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw PngError("short write: " + path.string());
}

Image decode_png(const std::uint8_t* data, std::size_t size) {
  if (size < 8 || std::memcmp(data, kSig, 8) != 0) throw PngError("not a PNG");
  std::size_t pos = 8;
  int width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> idat;
  bool seen_ihdr = false;
  while (pos + 8 <= size) {
    const std::uint32_t len = get_u32(data + pos);
    if (pos + 12 + len > size) throw PngError("truncated chunk");
    const char* tag = reinterpret_cast<const char*>(data + pos + 4);
    const std::uint8_t* body = data + pos + 8;
    if (std::memcmp(tag, "IHDR", 4) == 0) {
      if (len != 13) throw PngError("bad IHDR");
      width = static_cast<int>(get_u32(body));
      height = static_cast<int>(get_u32(body + 4));
      const int depth = body[8], color = body[9], interlace = body[12];
      if (depth != 8 || interlace != 0) throw PngError("unsupported PNG variant");
      switch (color) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 6: channels = 4; break;
        default: throw PngError("unsupported color type");
      }
      seen_ihdr = true;
    } else if (std::memcmp(tag, "IDAT", 4) == 0) {
      idat.insert(idat.end(), body, body + len);
    } else if (std::memcmp(tag, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || width <= 0 || height <= 0) throw PngError("missing IHDR");

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  auto raw = zlib_inflate(idat.data(), idat.size(), (stride + 1) * height);

  std::vector<std::uint8_t> pix(stride * height);
  const int bpp = channels;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* dst = pix.data() + y * stride;
    const std::uint8_t* up = (y > 0) ? pix.data() + (y - 1) * stride : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = (x >= static_cast<std::size_t>(bpp)) ? dst[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int cc = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, cc); break;
        default: throw PngError("bad filter type");
      }
      dst[x] = static_cast<std::uint8_t>(v);
    }
  }
  return from_bytes(pix.data(), width, height, channels);
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PngError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes.data(), bytes.size());
}

}  // namespace signbench
