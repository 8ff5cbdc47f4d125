#include "composer/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "composer/errors.hpp"

namespace composer {

GradReport finite_diff_gradcheck(const GradCheckTarget& target, std::vector<Tensor> params,
                                 float eps, float tol, const std::vector<std::string>& names,
                                 int max_probes_per_param) {
  if (eps <= 0.0f) throw ParameterError("gradcheck: eps must be positive");
  if (max_probes_per_param < 1) throw ParameterError("gradcheck: max_probes_per_param must be >= 1");

  const std::vector<Tensor> analytic = target.gradient(params);
  if (analytic.size() != params.size()) {
    throw DimensionError("gradcheck: gradient count " + std::to_string(analytic.size()) +
                         " != param count " + std::to_string(params.size()));
  }

  GradReport report;
  report.tolerance = tol;
  for (size_t p = 0; p < params.size(); ++p) {
    if (!analytic[p].same_shape(params[p])) {
      throw DimensionError("gradcheck: gradient shape " + shape_str(analytic[p].shape()) +
                           " != param shape " + shape_str(params[p].shape()));
    }
    ParamCheck check;
    check.name = p < names.size() ? names[p] : "param" + std::to_string(p);

    const std::int64_t n = params[p].numel();
    const std::int64_t probes = std::min<std::int64_t>(n, max_probes_per_param);
    for (std::int64_t k = 0; k < probes; ++k) {
      const std::int64_t idx = probes == n ? k : k * n / probes;
      const float saved = params[p].data()[idx];

      // The stored f32 coordinate rounds x +- eps; divide by the step that
      // was actually realized.
      const float x_plus = saved + eps;
      const float x_minus = saved - eps;
      params[p].data()[idx] = x_plus;
      const double f_plus = target.value(params);
      params[p].data()[idx] = x_minus;
      const double f_minus = target.value(params);
      params[p].data()[idx] = saved;

      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("gradcheck: objective evaluated non-finite at " + check.name +
                           "[" + std::to_string(idx) + "]");
      }
      const double step = static_cast<double>(x_plus) - static_cast<double>(x_minus);
      if (step == 0.0) {
        throw ParameterError("gradcheck: eps too small to move " + check.name + "[" +
                             std::to_string(idx) + "]");
      }
      const double numeric = (f_plus - f_minus) / step;
      const double a = analytic[p].data()[idx];
      const double rel =
          std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      check.max_rel_err = std::max(check.max_rel_err, static_cast<float>(rel));
      ++check.probes;
    }
    report.max_rel_err = std::max(report.max_rel_err, check.max_rel_err);
    report.probe_count += check.probes;
    report.params.push_back(std::move(check));
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

std::string format_grad_report(const GradReport& report) {
  std::ostringstream os;
  size_t width = 5;
  for (const auto& p : report.params) width = std::max(width, p.name.size());
  for (const auto& p : report.params) {
    os << (p.max_rel_err < report.tolerance ? "  ok   " : "  FAIL ");
    os << p.name;
    os << std::string(width - p.name.size() + 2, ' ');
    os << "probes=" << p.probes << "  max_rel_err=" << p.max_rel_err << "\n";
  }
  os << (report.pass ? "PASS" : "FAIL") << " (" << report.params.size() << " params, "
     << report.probe_count << " probes, tol=" << report.tolerance << ")\n";
  return os.str();
}

}  // namespace composer
