#include "sdmtl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sdmtl/rng.hpp"

namespace sdmtl {
namespace {

double eval_loss(const LossBuilder& build) {
  Tape tape;
  Binder binder(tape);
  Value loss = build(tape, binder);
  const float v = tape.value(loss).scalar_value();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss value");
  return static_cast<double>(v);
}

std::vector<std::int64_t> pick_coords(std::int64_t count, int max_coords, std::uint64_t seed,
                                      const std::string& name) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (max_coords <= 0 || count <= max_coords) return idx;
  SeededStream s(seed, name);
  for (int i = 0; i < max_coords; ++i) {
    const auto j = i + static_cast<std::int64_t>(s.next_below(static_cast<std::uint64_t>(count - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(max_coords));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(std::span<const ParamRef> params, const LossBuilder& build, double eps,
                           std::uint64_t seed, int max_coords_per_param) {
  if (!(eps >= 1e-4 && eps <= 1e-2)) {
    throw ConfigError("grad_check: eps must lie in [1e-4, 1e-2]");
  }

  // Analytic pass.
  std::map<std::string, Tensor> analytic;
  {
    Tape tape;
    Binder binder(tape);
    Value loss = build(tape, binder);
    tape.backward(loss);
    for (const ParamRef& p : params) analytic.emplace(p.name, binder.grad_of(*p.tensor));
  }

  constexpr double kTol = 1e-3;
  const double f_base = eval_loss(build);

  GradCheckReport report;
  for (const ParamRef& p : params) {
    Tensor& t = *p.tensor;
    const Tensor& g = analytic.at(p.name);
    for (std::int64_t i : pick_coords(t.size(), max_coords_per_param, seed, p.name)) {
      const float orig = t[i];
      const float plus = static_cast<float>(static_cast<double>(orig) + eps);
      const float minus = static_cast<float>(static_cast<double>(orig) - eps);
      t[i] = plus;
      const double f_plus = eval_loss(build);
      t[i] = minus;
      const double f_minus = eval_loss(build);
      t[i] = orig;
      const double h = static_cast<double>(plus) - static_cast<double>(minus);
      const double numeric = (f_plus - f_minus) / h;
      const double a = static_cast<double>(g[i]);
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      if (!std::isfinite(rel)) throw NumericError("grad_check: non-finite error at " + p.name);

      // Failures attributable to an activation kink inside the perturbation
      // interval are skipped: across a kink the one-sided estimates split by
      // exactly twice the central-difference contamination, while a wrong
      // analytic gradient leaves them in agreement and still fails here.
      if (rel > kTol) {
        const double fwd = (f_plus - f_base) / (static_cast<double>(plus) - orig);
        const double bwd = (f_base - f_minus) / (static_cast<double>(orig) - minus);
        if (std::abs(a - numeric) <= std::abs(fwd - bwd)) {
          ++report.coords_skipped;
          continue;
        }
      }

      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_coord = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  if (report.coords_skipped > std::max(3, (report.coords_checked + report.coords_skipped) / 20)) {
    throw NumericError("grad_check: " + std::to_string(report.coords_skipped) +
                       " of " + std::to_string(report.coords_checked + report.coords_skipped) +
                       " coordinates sit on activation kinks at eps=" + std::to_string(eps));
  }
  return report;
}

}  // namespace sdmtl
