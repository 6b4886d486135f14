#include "radaudit/image.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "radaudit/csv.hpp"
#include "radaudit/error.hpp"
#include "radaudit/numeric.hpp"

namespace radaudit {

namespace {

Eigen::VectorXd gaussian_kernel(int size, double sigma) {
  Eigen::VectorXd k(size);
  const double center = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - center;
    k[i] = std::exp(-(x * x) / (2.0 * sigma * sigma));
  }
  return k / k.sum();
}

// Separable "valid" correlation: output is (h - w + 1) x (w - w + 1).
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& k) {
  const Eigen::Index w = k.size();
  const Eigen::Index rows = img.rows() - w + 1;
  const Eigen::Index cols = img.cols() - w + 1;
  Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(rows, img.cols());
  for (Eigen::Index t = 0; t < w; ++t) tmp += k[t] * img.middleRows(t, rows);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index t = 0; t < w; ++t) out += k[t] * tmp.middleCols(t, cols);
  return out;
}

Eigen::MatrixXd downsample(const Eigen::MatrixXd& img) {
  const Eigen::Index rows = img.rows() / 2;
  const Eigen::Index cols = img.cols() / 2;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      out(r, c) = 0.25 * (img(2 * r, 2 * c) + img(2 * r + 1, 2 * c) +
                          img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

double map_mean(const Eigen::MatrixXd& m) {
  return pairwise_sum(std::span<const double>(m.data(), static_cast<std::size_t>(m.size()))) /
         static_cast<double>(m.size());
}

struct ScaleTerms {
  double ssim = 0.0;
  double cs = 0.0;
};

// Written so that swapping a and b yields bit-identical results and a == b
// yields exactly 1.
ScaleTerms scale_terms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const Eigen::VectorXd& kernel, double c1, double c2) {
  const Eigen::ArrayXXd mu_a = filter_valid(a, kernel).array();
  const Eigen::ArrayXXd mu_b = filter_valid(b, kernel).array();
  const Eigen::ArrayXXd aa = filter_valid(a.cwiseProduct(a), kernel).array();
  const Eigen::ArrayXXd bb = filter_valid(b.cwiseProduct(b), kernel).array();
  const Eigen::ArrayXXd ab = filter_valid(a.cwiseProduct(b), kernel).array();
  const Eigen::ArrayXXd var_a = aa - mu_a * mu_a;
  const Eigen::ArrayXXd var_b = bb - mu_b * mu_b;
  const Eigen::ArrayXXd cov = ab - mu_a * mu_b;
  const Eigen::ArrayXXd luminance =
      (2.0 * (mu_a * mu_b) + c1) / ((mu_a * mu_a + mu_b * mu_b) + c1);
  const Eigen::ArrayXXd cs = (2.0 * cov + c2) / ((var_a + var_b) + c2);
  ScaleTerms t;
  t.cs = map_mean(cs.matrix());
  t.ssim = map_mean((luminance * cs).matrix());
  return t;
}

}  // namespace

double ms_ssim(const ImageGrid& a, const ImageGrid& b, const MsSsimOptions& options,
               MsSsimDetail* detail) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InputError("MS-SSIM inputs differ in shape");
  }
  if (a.height() == 0 || a.width() == 0) throw InputError("MS-SSIM of an empty image");
  if (!a.pixels.allFinite() || !b.pixels.allFinite()) {
    throw InputError("MS-SSIM input has non-finite pixels");
  }
  if (!(a.dynamic_range > 0.0) || a.dynamic_range != b.dynamic_range) {
    throw InputError("MS-SSIM inputs need the same positive dynamic range");
  }
  const Eigen::Index min_side = std::min(a.height(), a.width());
  int scales = static_cast<int>(options.weights.size());
  while (scales > 0 && min_side < options.window * (Eigen::Index{1} << (scales - 1))) {
    --scales;
  }
  if (scales == 0) {
    throw InputError("image smaller than the " + std::to_string(options.window) +
                     "-pixel SSIM window");
  }
  // Leading weights are renormalized only when scales had to be dropped.
  double weight_total = 1.0;
  if (scales < static_cast<int>(options.weights.size())) {
    weight_total = 0.0;
    for (int s = 0; s < scales; ++s) weight_total += options.weights[static_cast<std::size_t>(s)];
  }

  const double c1 = std::pow(options.k1 * a.dynamic_range, 2);
  const double c2 = std::pow(options.k2 * a.dynamic_range, 2);
  const Eigen::VectorXd kernel = gaussian_kernel(options.window, options.sigma);

  MsSsimDetail d;
  d.scales_used = scales;
  Eigen::MatrixXd x = a.pixels;
  Eigen::MatrixXd y = b.pixels;
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const ScaleTerms t = scale_terms(x, y, kernel, c1, c2);
    const double w = options.weights[static_cast<std::size_t>(s)] / weight_total;
    d.contrast.push_back(t.cs);
    if (s + 1 < scales) {
      result *= std::pow(std::max(t.cs, 0.0), w);
      x = downsample(x);
      y = downsample(y);
    } else {
      d.coarsest_ssim = t.ssim;
      result *= std::pow(std::max(t.ssim, 0.0), w);
    }
  }
  if (detail) *detail = std::move(d);
  return result;
}

// ---------------------------------------------------------------------------

ImageGrid parse_pgm(std::string_view bytes, std::string_view origin) {
  const std::string o(origin);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P2") throw InputError(o + ": not a PGM (P2/P5) file");
  long long w = 0, h = 0, maxval = 0;
  if (!parse_int(next_token(), w) || !parse_int(next_token(), h) ||
      !parse_int(next_token(), maxval) || w <= 0 || h <= 0 || maxval <= 0 ||
      maxval > 65535) {
    throw InputError(o + ": invalid PGM header");
  }
  ImageGrid img;
  img.pixels.resize(h, w);
  img.dynamic_range = 1.0;
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P5") {
    ++pos;  // single whitespace after maxval
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes.size() < pos + static_cast<std::size_t>(w * h) * bpp) {
      throw InputError(o + ": truncated PGM payload");
    }
    for (long long r = 0; r < h; ++r) {
      for (long long c = 0; c < w; ++c) {
        const std::size_t i = pos + static_cast<std::size_t>(r * w + c) * bpp;
        unsigned v = static_cast<unsigned char>(bytes[i]);
        if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[i + 1]);
        img.pixels(r, c) = v * scale;
      }
    }
  } else {
    for (long long r = 0; r < h; ++r) {
      for (long long c = 0; c < w; ++c) {
        long long v = 0;
        if (!parse_int(next_token(), v) || v < 0 || v > maxval) {
          throw InputError(o + ": invalid PGM sample");
        }
        img.pixels(r, c) = static_cast<double>(v) * scale;
      }
    }
  }
  return img;
}

ImageGrid read_pgm(const std::filesystem::path& path) {
  return parse_pgm(read_file(path), path.string());
}

std::string encode_pgm(const ImageGrid& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n65535\n";
  for (Eigen::Index r = 0; r < image.height(); ++r) {
    for (Eigen::Index c = 0; c < image.width(); ++c) {
      const double v = std::clamp(image.pixels(r, c) / image.dynamic_range, 0.0, 1.0);
      const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
      out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    }
  }
  return out;
}

}  // namespace radaudit
