#include "cesynth/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace cesynth {
namespace {

void check_inputs(const Volume& y, const Volume& g, const Volume* mask, const char* what) {
  require_same_shape(y.shape(), g.shape(), what);
  if (mask) require_same_shape(y.shape(), mask->shape(), what);
}

bool in_scope(const Volume* mask, std::size_t i) { return !mask || (*mask)[i] > 0.5f; }

std::size_t scope_count(const Volume& y, const Volume* mask, const char* what) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) n += in_scope(mask, i) ? 1 : 0;
  if (n == 0) throw UsageError(std::string(what) + ": mask selects no voxels");
  return n;
}

double ssim_from_moments(double mu_y, double mu_g, double var_y, double var_g, double cov, SsimConstants c) {
  return ((2 * mu_y * mu_g + c.c1) * (2 * cov + c.c2)) /
         ((mu_y * mu_y + mu_g * mu_g + c.c1) * (var_y + var_g + c.c2));
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt_double(v);
}

}  // namespace

double ssim(const Volume& y, const Volume& g, const Volume* mask, SsimConstants c) {
  check_inputs(y, g, mask, "ssim");
  if (!(c.c1 > 0.0) || !(c.c2 > 0.0)) throw UsageError("ssim: c1 and c2 must be positive");
  const double n = static_cast<double>(scope_count(y, mask, "ssim"));
  double sy = 0, sg = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!in_scope(mask, i)) continue;
    sy += y[i];
    sg += g[i];
  }
  const double mu_y = sy / n, mu_g = sg / n;
  double vy = 0, vg = 0, cov = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!in_scope(mask, i)) continue;
    const double dy = y[i] - mu_y, dg = g[i] - mu_g;
    vy += dy * dy;
    vg += dg * dg;
    cov += dy * dg;
  }
  return ssim_from_moments(mu_y, mu_g, vy / n, vg / n, cov / n, c);
}

double windowed_ssim(const Volume& y, const Volume& g, const Volume* mask, std::size_t window, SsimConstants c) {
  check_inputs(y, g, mask, "windowed_ssim");
  if (y.rank() != 2) throw UsageError("windowed_ssim: expected a 2-D image");
  const std::size_t h = y.dim(0), w = y.dim(1);
  if (window == 0 || window > h || window > w) throw UsageError("windowed_ssim: window larger than image");
  const double n = static_cast<double>(window * window);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + window <= h; ++y0) {
    for (std::size_t x0 = 0; x0 + window <= w; ++x0) {
      if (mask && mask->at(y0 + window / 2, x0 + window / 2) <= 0.5f) continue;
      double sy = 0, sg = 0, syy = 0, sgg = 0, syg = 0;
      for (std::size_t dy = 0; dy < window; ++dy) {
        for (std::size_t dx = 0; dx < window; ++dx) {
          const double a = y.at(y0 + dy, x0 + dx), b = g.at(y0 + dy, x0 + dx);
          sy += a;
          sg += b;
          syy += a * a;
          sgg += b * b;
          syg += a * b;
        }
      }
      const double mu_y = sy / n, mu_g = sg / n;
      total += ssim_from_moments(mu_y, mu_g, syy / n - mu_y * mu_y, sgg / n - mu_g * mu_g, syg / n - mu_y * mu_g, c);
      ++count;
    }
  }
  if (count == 0) throw UsageError("windowed_ssim: mask selects no windows");
  return total / static_cast<double>(count);
}

double psnr(const Volume& y, const Volume& g, const Volume* mask) {
  check_inputs(y, g, mask, "psnr");
  const double n = static_cast<double>(scope_count(y, mask, "psnr"));
  double peak = -std::numeric_limits<double>::infinity();
  double sse = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!in_scope(mask, i)) continue;
    peak = std::max({peak, static_cast<double>(y[i]), static_cast<double>(g[i])});
    const double d = static_cast<double>(y[i]) - g[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / (sse / n));
}

double nmse(const Volume& y, const Volume& g, const Volume* mask) {
  check_inputs(y, g, mask, "nmse");
  scope_count(y, mask, "nmse");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!in_scope(mask, i)) continue;
    const double d = static_cast<double>(y[i]) - g[i];
    num += d * d;
    den += static_cast<double>(y[i]) * y[i];
  }
  if (den == 0.0) throw UsageError("nmse: reference image is all zero");
  return num / den;
}

Volume difference_image(const Volume& t1, const Volume& ce) {
  require_same_shape(t1.shape(), ce.shape(), "difference_image");
  Volume out(t1.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(ce[i] - t1[i], 0.0f);
  return out;
}

double dice(const Volume& a, const Volume& b) {
  require_same_shape(a.shape(), b.shape(), "dice");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] > 0.5f, pb = b[i] > 0.5f;
    na += pa;
    nb += pb;
    inter += pa && pb;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

MetricsReport evaluate_images(const std::string& case_id, const Volume& truth, const Volume& generated,
                              const Volume* mask) {
  MetricsReport r;
  r.case_id = case_id;
  r.ssim = ssim(truth, generated, mask);
  r.psnr = psnr(truth, generated, mask);
  r.nmse = nmse(truth, generated, mask);
  r.masked = mask != nullptr;
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double s = 0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

MetricsSummary summarize(std::span<const MetricsReport> reports) {
  std::vector<double> s, p, n;
  for (const auto& r : reports) {
    s.push_back(r.ssim);
    p.push_back(r.psnr);
    n.push_back(r.nmse);
  }
  return {reports.size(), mean_std(s), mean_std(p), mean_std(n)};
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsReport> reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write metrics report '" + path.string() + "'");
  out << "case_id,ssim,psnr,nmse,masked\n";
  for (const auto& r : reports) {
    out << r.case_id << ',' << fmt_double(r.ssim) << ',' << fmt_double(r.psnr) << ',' << fmt_double(r.nmse) << ','
        << (r.masked ? 1 : 0) << '\n';
  }
}

nlohmann::json to_json(const MetricsSummary& s) {
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", json_number(m.mean)}, {"std", json_number(m.stddev)}}; };
  return {{"count", s.count}, {"ssim", ms(s.ssim)}, {"psnr", ms(s.psnr)}, {"nmse", ms(s.nmse)}};
}

}  // namespace cesynth
