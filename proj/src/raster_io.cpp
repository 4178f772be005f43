#include "rboxgeo/raster_io.hpp"

#include <png.h>

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace rboxgeo {

std::vector<std::uint32_t> encode_rle(const BinaryMask& m) {
  std::vector<std::uint32_t> counts;
  bool current = false;
  std::uint32_t run = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const bool v = m(i, j) != 0;
      if (v != current) {
        counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  counts.push_back(run);
  return counts;
}

BinaryMask decode_rle(int h, int w, const std::vector<std::uint32_t>& counts) {
  if (h < 0 || w < 0) throw std::invalid_argument("decode_rle: negative shape");
  BinaryMask m = BinaryMask::Zero(h, w);
  const std::uint64_t total = static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w);
  std::uint64_t pos = 0;
  bool value = false;
  for (std::uint32_t run : counts) {
    if (pos + run > total) throw std::invalid_argument("decode_rle: runs exceed mask size");
    if (value) {
      for (std::uint64_t p = pos; p < pos + run; ++p)
        m(static_cast<Eigen::Index>(p % static_cast<std::uint64_t>(h)),
          static_cast<Eigen::Index>(p / static_cast<std::uint64_t>(h))) = 1;
    }
    pos += run;
    value = !value;
  }
  if (pos != total) throw std::invalid_argument("decode_rle: runs do not cover the mask");
  return m;
}

nlohmann::ordered_json rle_to_json(const BinaryMask& m) {
  nlohmann::ordered_json j;
  j["h"] = m.rows();
  j["w"] = m.cols();
  j["counts"] = encode_rle(m);
  return j;
}

BinaryMask rle_from_json(const nlohmann::json& j) {
  return decode_rle(j.at("h").get<int>(), j.at("w").get<int>(),
                    j.at("counts").get<std::vector<std::uint32_t>>());
}

BinaryMask read_png_mask(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw std::runtime_error("cannot read PNG '" + path.string() + "': " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  BinaryMask m(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) m(i, j) = buffer[static_cast<std::size_t>(i) * w + j] != 0 ? 1 : 0;
  return m;
}

void write_png_mask(const std::filesystem::path& path, const BinaryMask& m) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(m.cols());
  image.height = static_cast<png_uint_32>(m.rows());
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      buffer[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j) ? 255 : 0;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr))
    throw std::runtime_error("cannot write PNG '" + path.string() + "': " + image.message);
}

std::map<std::string, BinaryMask> read_mask_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mask list '" + path.string() + "'");
  std::map<std::string, BinaryMask> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("id").get<std::string>();
      if (j.contains("png"))
        out[id] = read_png_mask(path.parent_path() / j.at("png").get<std::string>());
      else
        out[id] = rle_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_pfm(std::ostream& out, const Eigen::MatrixXd& grid) {
  out << "Pf\n" << grid.cols() << ' ' << grid.rows() << "\n-1.0\n";
  for (Eigen::Index i = grid.rows() - 1; i >= 0; --i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const float v = static_cast<float>(grid(i, j));
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      const std::array<char, 4> b{static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                                  static_cast<char>((bits >> 16) & 0xff),
                                  static_cast<char>((bits >> 24) & 0xff)};
      out.write(b.data(), 4);
    }
  }
  if (!out) throw std::runtime_error("failed writing PFM");
}

Eigen::MatrixXd read_pfm(std::istream& in) {
  std::string magic;
  long w = 0;
  long h = 0;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (!in || magic != "Pf" || w < 1 || h < 1) throw std::runtime_error("not a single-channel PFM");
  if (scale >= 0) throw std::runtime_error("big-endian PFM is not supported");
  Eigen::MatrixXd grid(h, w);
  for (long i = h - 1; i >= 0; --i) {
    for (long j = 0; j < w; ++j) {
      std::array<unsigned char, 4> b{};
      in.read(reinterpret_cast<char*>(b.data()), 4);
      if (!in) throw std::runtime_error("PFM truncated");
      const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                                 (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
      float v;
      std::memcpy(&v, &bits, 4);
      grid(i, j) = v;
    }
  }
  return grid;
}

}  // namespace rboxgeo
