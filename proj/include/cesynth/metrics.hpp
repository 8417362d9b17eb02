#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesynth/tensor.hpp"

namespace cesynth {

/// Stabilising constants; defaults are (0.01 L)^2 and (0.03 L)^2 for L = 1.
struct SsimConstants {
  double c1 = 1e-4;
  double c2 = 9e-4;
  static SsimConstants for_range(double dynamic_range) {
    return {(0.01 * dynamic_range) * (0.01 * dynamic_range), (0.03 * dynamic_range) * (0.03 * dynamic_range)};
  }
};

/// SSIM from global image statistics (means, population variances and
/// covariance over every voxel, or over mask voxels when a mask is given).
double ssim(const Volume& y, const Volume& g, const Volume* mask = nullptr, SsimConstants c = {});

/// Mean SSIM over square sliding windows (side `window`, valid positions
/// only). When masked, only windows centred on mask voxels are averaged.
double windowed_ssim(const Volume& y, const Volume& g, const Volume* mask = nullptr, std::size_t window = 7,
                     SsimConstants c = {});

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) with the peak taken over both images; returns
/// kPsnrIdentical when the MSE is zero.
double psnr(const Volume& y, const Volume& g, const Volume* mask = nullptr);

/// ||y - g||^2 / ||y||^2. Throws UsageError for an all-zero reference.
double nmse(const Volume& y, const Volume& g, const Volume* mask = nullptr);

/// max(ce - t1, 0)
Volume difference_image(const Volume& t1, const Volume& ce);

/// Dice overlap of two binary masks (values > 0.5). Two empty masks give 1.
double dice(const Volume& a, const Volume& b);

struct MetricsReport {
  std::string case_id;
  double ssim = 0.0;
  double psnr = 0.0;
  double nmse = 0.0;
  bool masked = false;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport evaluate_images(const std::string& case_id, const Volume& truth, const Volume& generated,
                              const Volume* mask);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for fewer than two values
};

struct MetricsSummary {
  std::size_t count = 0;
  MeanStd ssim, psnr, nmse;
};

MeanStd mean_std(std::span<const double> values);
MetricsSummary summarize(std::span<const MetricsReport> reports);

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsReport> reports);
nlohmann::json to_json(const MetricsSummary& summary);

}  // namespace cesynth
