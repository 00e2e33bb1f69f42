#pragma once

#include <functional>
#include <span>
#include <vector>

#include "roar/numerics/tape.hpp"

namespace roar {

struct GradCheckReport {
  // Worst relative error per parameter tensor, in the order given.
  std::vector<double> max_rel_error;
  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;

  double worst() const;
  bool passed(double rtol) const { return worst() <= rtol; }
};

// Scalar-valued function of the parameter tensors, evaluated on a fresh tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

// Compares tape gradients of f at theta with central finite differences.
// Relative error is |a - n| / max(|a|, |n|, floor); `floor` keeps entries whose
// true gradient is ~0 from dividing rounding noise by itself.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> theta, double h = 1e-5, double floor = 1e-5);

double relative_error(double analytic, double numeric, double floor);

}  // namespace roar
