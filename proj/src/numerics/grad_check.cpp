#include "roar/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roar {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& theta) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(theta.size());
  for (const Tensor& t : theta) vars.push_back(tape.constant(t));
  const double v = f(tape, vars).value().item();
  if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> theta, double h, double floor) {
  if (!(h >= 1e-6 && h <= 1e-4)) throw std::invalid_argument("grad_check: step h must lie in [1e-6, 1e-4]");
  GradCheckReport report;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : theta) vars.push_back(tape.leaf(t));
    Var out = f(tape, vars);
    if (!std::isfinite(out.value().item())) throw std::domain_error("grad_check: non-finite function value");
    tape.backward(out);
    for (std::size_t p = 0; p < theta.size(); ++p) {
      // Parameters the function ignores get no gradient node: zero.
      report.analytic.push_back(tape.has_grad(vars[p]) ? tape.grad(vars[p]) : Tensor(theta[p].shape()));
    }
  }
  for (std::size_t p = 0; p < theta.size(); ++p) {
    Tensor numeric(theta[p].shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < theta[p].size(); ++i) {
      const double orig = theta[p][i];
      theta[p][i] = orig + h;
      const double fp = evaluate(f, theta);
      theta[p][i] = orig - h;
      const double fm = evaluate(f, theta);
      theta[p][i] = orig;
      numeric[i] = (fp - fm) / (2.0 * h);
      worst = std::max(worst, relative_error(report.analytic[p][i], numeric[i], floor));
    }
    report.numeric.push_back(std::move(numeric));
    report.max_rel_error.push_back(worst);
  }
  return report;
}

}  // namespace roar
