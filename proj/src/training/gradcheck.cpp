#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphaclip/training/train.hpp"

namespace alphaclip {

GradCheckReport grad_check(EncoderParams params, const std::function<double(const EncoderParams&)>& loss,
                           const EncoderParams& analytic, std::span<const std::string> tensors,
                           const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw InputError("finite-difference step must be positive");
  auto p = named_tensors(params);
  const auto a = named_tensors(analytic);
  Rng rng = Rng::stream(options.seed, "gradcheck");

  GradCheckReport report;
  for (const auto& name : tensors) {
    std::size_t t = 0;
    while (t < p.size() && p[t].first != name) ++t;
    if (t == p.size()) throw InputError("grad_check: no tensor named " + name);
    Mat& w = *p[t].second;
    const Mat& g = *a[t].second;
    if (g.rows() != w.rows() || g.cols() != w.cols()) throw ShapeError("analytic gradient shape differs for " + name);

    std::vector<Eigen::Index> coords;
    const bool full = std::find(options.full_tensors.begin(), options.full_tensors.end(), name) != options.full_tensors.end();
    if (full || w.size() <= options.samples_per_tensor) {
      coords.resize(static_cast<std::size_t>(w.size()));
      std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    } else {
      for (int i = 0; i < options.samples_per_tensor; ++i)
        coords.push_back(static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(w.size())));
    }

    GradCheckEntry entry;
    entry.tensor = name;
    for (const Eigen::Index j : coords) {
      double& x = w.data()[j];
      const double orig = x;
      x = orig + options.eps;
      const double fp = loss(params);
      x = orig - options.eps;
      const double fm = loss(params);
      x = orig;
      const double num = (fp - fm) / (2.0 * options.eps);
      const double ana = g.data()[j];
      const double denom = std::max({std::abs(ana), std::abs(num), options.abs_floor});
      const double rel = std::abs(ana - num) / denom;
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(ana));
      entry.max_abs_numeric = std::max(entry.max_abs_numeric, std::abs(num));
      ++entry.checked;
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_tensor = name;
    }
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

}  // namespace alphaclip
