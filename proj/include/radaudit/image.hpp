#pragma once

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace radaudit {

// Gray-scale image with values in [0, dynamic_range].
struct ImageGrid {
  Eigen::MatrixXd pixels;  // height x width
  double dynamic_range = 1.0;

  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index width() const { return pixels.cols(); }
};

struct MsSsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  std::vector<double> weights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
};

struct MsSsimDetail {
  int scales_used = 0;            // fewer than requested for small images
  std::vector<double> contrast;   // mean contrast-structure term per scale
  double coarsest_ssim = 0.0;     // luminance x cs at the coarsest scale
};

// Multi-scale SSIM with a Gaussian window, 2x2 mean-pool downsampling and
// the luminance term at the coarsest scale only. Per-scale terms are clamped
// at 0 before exponentiation, so the result lies in [0, 1]. When the image is
// smaller than window * 2^(S-1) the scale count is reduced (recorded in
// `detail`) and the leading weights renormalized.
double ms_ssim(const ImageGrid& a, const ImageGrid& b,
               const MsSsimOptions& options = {}, MsSsimDetail* detail = nullptr);

// Reads a binary (P5) or ASCII (P2) PGM file, scaled to [0, 1].
ImageGrid read_pgm(const std::filesystem::path& path);
ImageGrid parse_pgm(std::string_view bytes, std::string_view origin);
std::string encode_pgm(const ImageGrid& image);  // 16-bit P5

}  // namespace radaudit
