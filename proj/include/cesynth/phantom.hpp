#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cesynth/tensor.hpp"

namespace cesynth {

/// Diffusion weightings (s/mm^2) of the four DWI volumes, in storage order.
inline constexpr std::array<double, 4> kBValues{0.0, 150.0, 800.0, 1500.0};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct PhantomSpec {
  std::size_t image_size = 64;
  std::size_t min_lesions = 0;
  std::size_t max_lesions = 3;
  Range lesion_radius{3.0, 6.0};            // pixels
  Range tissue_adc{0.0012, 0.0022};         // mm^2/s
  Range lesion_adc{0.0006, 0.0011};         // mm^2/s
  Range enhancement_gain{0.3, 0.8};
  double noise_sigma = 0.01;                // Rician scale, before normalisation
  std::uint64_t seed = 0;

  /// Throws UsageError naming the violated constraint.
  void validate() const;
};

struct CaseSample {
  std::string case_id;
  std::array<Volume, 4> dwi;  // indexed like kBValues
  Volume t1;
  Volume ce;
  Volume mask;         // breast region, {0,1}
  Volume adc_truth;    // mm^2/s; zero outside the body
  Volume lesion_mask;  // enhancing lesions, {0,1}
  std::size_t n_lesions = 0;

  const Shape& shape() const { return t1.shape(); }
  /// Throws DataError when the volumes do not share one 2-D shape.
  void validate() const;
  friend bool operator==(const CaseSample&, const CaseSample&) = default;
};

/// Mono-exponential diffusion decay s0 * exp(-b * adc).
inline double dwi_signal(double s0, double adc, double b) { return s0 * std::exp(-b * adc); }

/// Draws one synthetic case. Pure: the result depends only on (spec, seed).
CaseSample generate_case(const PhantomSpec& spec, std::uint64_t seed, std::string case_id = "case");

/// `count` cases named case_0000, case_0001, ... with seeds derived from spec.seed.
std::vector<CaseSample> generate_cases(const PhantomSpec& spec, std::size_t count);

}  // namespace cesynth
