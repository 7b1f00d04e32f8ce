#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pldp/rng.hpp"
#include "pldp/tensor.hpp"

namespace pldp {

// Builds one scalar output from `x` inside the supplied graph. The same
// closure is evaluated via graph replay at perturbed inputs.
using ScalarFn = std::function<Tensor(Graph&, const Tensor&)>;

// Max relative error between backward() gradients and central finite
// differences, elementwise over x. Denominator max(|analytic|,|numeric|,1e-8).
double finite_difference_check(const ScalarFn& f, const Tensor& x, double eps);

// One named gradient check; run() reports the max relative error across its
// internal random trials.
struct GradCheckCase {
  std::string name;
  std::function<double()> run;
};

// Every differentiable op plus each training loss, each exercised over
// `trials` random instances. Used by the CLI `gradcheck` command and the
// acceptance suite.
std::vector<GradCheckCase> build_gradcheck_suite(int trials, uint64_t seed);

}  // namespace pldp
