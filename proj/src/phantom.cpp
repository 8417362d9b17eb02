#include "cesynth/phantom.hpp"

#include <algorithm>
#include <cstdio>
#include <numbers>

#include "cesynth/rng.hpp"

namespace cesynth {
namespace {

constexpr double kChestBandStart = 0.85;  // fraction of rows; chest wall below, outside the mask

struct Blob {
  double x, y, sigma, amplitude;
};

struct Lesion {
  double x, y, rx, ry, adc, gain;
};

double rician(double signal, double sigma, Rng& rng) {
  if (sigma <= 0.0) return signal;
  const double re = signal + sigma * rng.normal();
  const double im = sigma * rng.normal();
  return std::sqrt(re * re + im * im);
}

void check_range(const Range& r, const char* name, bool allow_zero = true) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo < 0.0 || (!allow_zero && r.lo <= 0.0)) {
    throw UsageError(std::string("phantom spec: ") + name + " range must be finite, non-negative and nonempty");
  }
}

}  // namespace

void PhantomSpec::validate() const {
  if (image_size < 16) throw UsageError("phantom spec: image_size must be at least 16");
  if (min_lesions > max_lesions) throw UsageError("phantom spec: min_lesions exceeds max_lesions");
  check_range(lesion_radius, "lesion_radius", false);
  check_range(tissue_adc, "tissue_adc");
  check_range(lesion_adc, "lesion_adc");
  check_range(enhancement_gain, "enhancement_gain");
  if (!(lesion_adc.hi < tissue_adc.lo)) {
    throw UsageError("phantom spec: lesion_adc upper bound must be below tissue_adc lower bound");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw UsageError("phantom spec: noise_sigma must be finite and non-negative");
  }
  if (lesion_radius.hi * 4.0 > static_cast<double>(image_size)) {
    throw UsageError("phantom spec: lesion_radius too large for image_size");
  }
}

void CaseSample::validate() const {
  const Shape& s = t1.shape();
  if (s.size() != 2) throw DataError("case " + case_id + ": t1 is not a 2-D volume");
  auto check = [&](const Volume& v, const std::string& name) {
    if (v.shape() != s) {
      throw DataError("case " + case_id + ": " + name + " shape " + shape_str(v.shape()) + " differs from t1 shape " +
                      shape_str(s));
    }
  };
  for (std::size_t i = 0; i < dwi.size(); ++i) check(dwi[i], "dwi_b" + std::to_string(static_cast<int>(kBValues[i])));
  check(ce, "ce");
  check(mask, "mask");
  check(adc_truth, "adc_truth");
  check(lesion_mask, "lesion_mask");
}

CaseSample generate_case(const PhantomSpec& spec, std::uint64_t seed, std::string case_id) {
  spec.validate();
  Rng rng(seed);
  const std::size_t n = spec.image_size;
  const double size = static_cast<double>(n);

  // Breast outline: an ellipse with a low-order radial wobble.
  const double cx = size * (0.5 + rng.uniform(-0.04, 0.04));
  const double cy = size * (0.45 + rng.uniform(-0.03, 0.03));
  const double ax = size * rng.uniform(0.30, 0.40);
  const double ay = size * rng.uniform(0.26, 0.33);
  const double wobble2 = rng.uniform(0.0, 0.06), phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double wobble3 = rng.uniform(0.0, 0.04), phase3 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  auto in_breast = [&](double x, double y) {
    const double dx = (x - cx) / ax, dy = (y - cy) / ay;
    const double theta = std::atan2(dy, dx);
    const double r = 1.0 + wobble2 * std::sin(2.0 * theta + phase2) + wobble3 * std::sin(3.0 * theta + phase3);
    return dx * dx + dy * dy <= r * r && y < size * kChestBandStart;
  };

  // Fibroglandular texture: a few smooth blobs raising S0 and ADC.
  const double base_s0 = rng.uniform(0.50, 0.65);
  std::vector<Blob> blobs(static_cast<std::size_t>(rng.uniform_int(3, 6)));
  for (auto& b : blobs) {
    b.x = cx + ax * rng.uniform(-0.7, 0.7);
    b.y = cy + ay * rng.uniform(-0.7, 0.7);
    b.sigma = size * rng.uniform(0.06, 0.14);
    b.amplitude = rng.uniform(0.10, 0.25);
  }
  const double adc_offset = rng.uniform(0.0, 0.2);

  Volume mask({n, n}), s0({n, n}), adc({n, n}), lesions({n, n}), gain({n, n});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      if (in_breast(px, py)) {
        double density = 0.0;
        for (const auto& b : blobs) {
          const double d2 = (px - b.x) * (px - b.x) + (py - b.y) * (py - b.y);
          density += b.amplitude * std::exp(-0.5 * d2 / (b.sigma * b.sigma));
        }
        const double frac = std::clamp(adc_offset + 2.0 * density, 0.0, 1.0);
        mask.at(y, x) = 1.0f;
        s0.at(y, x) = static_cast<float>(std::min(0.95, base_s0 + density));
        adc.at(y, x) = static_cast<float>(spec.tissue_adc.lo + frac * (spec.tissue_adc.hi - spec.tissue_adc.lo));
      } else if (py >= size * kChestBandStart) {
        s0.at(y, x) = 0.45f;
        adc.at(y, x) = static_cast<float>(0.5 * (spec.tissue_adc.lo + spec.tissue_adc.hi));
      }
    }
  }

  // Lesions: diffusion-restricted ellipses placed wholly inside the mask with a
  // one-pixel margin. Placement is rejection sampled; a lesion that cannot be
  // placed is dropped.
  const auto wanted = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(spec.min_lesions), static_cast<std::int64_t>(spec.max_lesions)));
  std::vector<Lesion> placed;
  for (std::size_t l = 0; l < wanted; ++l) {
    Lesion les{};
    les.rx = rng.uniform(spec.lesion_radius.lo, spec.lesion_radius.hi);
    les.ry = les.rx * rng.uniform(0.7, 1.0);
    les.adc = rng.uniform(spec.lesion_adc.lo, spec.lesion_adc.hi);
    les.gain = rng.uniform(spec.enhancement_gain.lo, spec.enhancement_gain.hi);
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      les.x = cx + ax * rng.uniform(-0.8, 0.8);
      les.y = cy + ay * rng.uniform(-0.8, 0.8);
      ok = true;
      for (int k = 0; k < 32 && ok; ++k) {
        const double t = 2.0 * std::numbers::pi * k / 32.0;
        ok = in_breast(les.x + (les.rx + 1.5) * std::cos(t), les.y + (les.ry + 1.5) * std::sin(t));
      }
      for (const auto& other : placed) {
        const double d = std::hypot(les.x - other.x, les.y - other.y);
        if (d < les.rx + other.rx + 2.0) ok = false;
      }
    }
    if (ok) placed.push_back(les);
  }
  for (const auto& les : placed) {
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - les.x) / les.rx;
        const double dy = (static_cast<double>(y) + 0.5 - les.y) / les.ry;
        if (dx * dx + dy * dy <= 1.0 && mask.at(y, x) > 0.0f) {
          lesions.at(y, x) = 1.0f;
          adc.at(y, x) = static_cast<float>(les.adc);
          gain.at(y, x) = static_cast<float>(les.gain);
        }
      }
    }
  }

  CaseSample c;
  c.case_id = std::move(case_id);
  c.n_lesions = placed.size();
  c.mask = mask;
  c.adc_truth = adc;
  c.lesion_mask = lesions;

  // DWI stack, then one shared scale so the stack stays in [0, 1]. A common
  // factor leaves every signal ratio, and therefore the ADC, unchanged.
  double stack_max = 0.0;
  for (std::size_t b = 0; b < kBValues.size(); ++b) {
    Volume v({n, n});
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double clean = dwi_signal(s0[i], adc[i], kBValues[b]);
      v[i] = static_cast<float>(rician(clean, spec.noise_sigma, rng));
      stack_max = std::max(stack_max, static_cast<double>(v[i]));
    }
    c.dwi[b] = std::move(v);
  }
  if (stack_max > 1.0) {
    const float inv = static_cast<float>(1.0 / stack_max);
    for (auto& v : c.dwi)
      for (auto& x : v.values()) x *= inv;
  }

  // Pre-contrast T1 from the S0 field (body only), then CE = T1 + lesion gain.
  c.t1 = Volume({n, n});
  c.ce = Volume({n, n});
  for (std::size_t i = 0; i < c.t1.size(); ++i) {
    const double clean = s0[i] > 0.0f ? 0.15 + 0.7 * s0[i] : 0.0;
    const double t1 = std::clamp(rician(clean, spec.noise_sigma, rng), 0.0, 1.0);
    c.t1[i] = static_cast<float>(t1);
    c.ce[i] = static_cast<float>(std::clamp(t1 + static_cast<double>(gain[i]), 0.0, 1.0));
  }
  return c;
}

std::vector<CaseSample> generate_cases(const PhantomSpec& spec, std::size_t count) {
  spec.validate();
  std::vector<CaseSample> cases;
  cases.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "case_%04zu", i);
    cases.push_back(generate_case(spec, mix_seed(spec.seed, i), id));
  }
  return cases;
}

}  // namespace cesynth
