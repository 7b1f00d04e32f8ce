#include <algorithm>
#include <cmath>

#include "pldp/gradcheck.hpp"

namespace pldp {

double finite_difference_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0) || eps > 1e-2)
    throw ConfigError("finite_difference_check: eps must be in (0, 1e-2], got " +
                      std::to_string(eps));
  Graph g;
  Tensor y = f(g, x);
  if (!y.defined() || y.size() != 1)
    throw RankError("finite_difference_check: function output must be scalar");

  x.zero_grad();
  g.backward(y);
  const std::vector<double> analytic = x.node()->grad;

  auto& xv = x.node()->value;
  double max_rel = 0.0;
  for (size_t i = 0; i < xv.size(); ++i) {
    const double saved = xv[i];
    xv[i] = saved + eps;
    g.replay_forward();
    const double fp = y.values()[0];
    xv[i] = saved - eps;
    g.replay_forward();
    const double fm = y.values()[0];
    xv[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-8});
    max_rel = std::max(max_rel, std::fabs(numeric - analytic[i]) / denom);
  }
  g.replay_forward();  // leave graph values consistent with unperturbed x
  return max_rel;
}

}  // namespace pldp
