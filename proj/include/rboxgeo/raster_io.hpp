// Raster file formats: binary masks (run-length JSON, 8-bit PNG) and float
// grids (PFM).
#ifndef RBOXGEO_RASTER_IO_HPP
#define RBOXGEO_RASTER_IO_HPP

#include "rboxgeo/eval.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace rboxgeo {

/// Column-major run lengths, starting with a (possibly empty) run of zeros.
std::vector<std::uint32_t> encode_rle(const BinaryMask& m);
BinaryMask decode_rle(int h, int w, const std::vector<std::uint32_t>& counts);

/// {"h": .., "w": .., "counts": [..]}
nlohmann::ordered_json rle_to_json(const BinaryMask& m);
BinaryMask rle_from_json(const nlohmann::json& j);

/// 8-bit single-channel PNG; any non-zero pixel is foreground.
BinaryMask read_png_mask(const std::filesystem::path& path);
void write_png_mask(const std::filesystem::path& path, const BinaryMask& m);

/// Mask list file: one JSON object per line with "id" and either inline RLE
/// fields or "png": path (relative to the list file).
std::map<std::string, BinaryMask> read_mask_list(const std::filesystem::path& path);

/// Portable float map, single channel, little-endian, rows stored bottom-up.
void write_pfm(std::ostream& out, const Eigen::MatrixXd& grid);
Eigen::MatrixXd read_pfm(std::istream& in);

}  // namespace rboxgeo

#endif  // RBOXGEO_RASTER_IO_HPP
