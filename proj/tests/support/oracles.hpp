#pragma once

// Test-side oracles kept independent of the library's computation paths:
// finite differences for gradients, straight-line formula re-evaluations,
// and exact enumeration on the tabular environment.

#include "mifq/envs.hpp"
#include "mifq/expert.hpp"
#include "mifq/nets.hpp"

#include <cmath>
#include <functional>

namespace oracle {

using mifq::Matrix;
using mifq::Vector;

inline double central_diff(const std::function<double()>& eval, double* coord,
                           double h = 1e-5) {
  const double saved = *coord;
  *coord = saved + h;
  const double up = eval();
  *coord = saved - h;
  const double dn = eval();
  *coord = saved;
  return (up - dn) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

// independent scalar re-evaluation of the two-layer mixer
inline double mix_reference(const Vector& x, const mifq::MixingWeights& w) {
  double out = w.b2;
  for (Eigen::Index u = 0; u < w.b1.size(); ++u) {
    double pre = w.b1(u);
    for (Eigen::Index i = 0; i < x.size(); ++i) pre += x(i) * std::abs(w.w1(i, u));
    const double act = pre >= 0.0 ? pre : std::exp(pre) - 1.0;
    out += act * std::abs(w.w2(u));
  }
  return out;
}

// exact undiscounted 2-step return of a joint policy on the tabular model;
// joint_probs(s) gives the per-state joint-action distribution
inline double exact_two_step_return(const mifq::TabularModel& model,
                                    const std::function<Vector(int)>& joint_probs) {
  const int A = model.joint_action_count();
  double total = 0.0;
  for (int s0 = 0; s0 < model.num_states; ++s0) {
    if (model.initial(s0) == 0.0) continue;
    Vector p0 = joint_probs(s0);
    double e0 = 0.0;
    for (int a0 = 0; a0 < A; ++a0) {
      double second = 0.0;
      for (int s1 = 0; s1 < model.num_states; ++s1) {
        const double pt = model.trans(s0 * A + a0, s1);
        if (pt == 0.0) continue;
        Vector p1 = joint_probs(s1);
        double e1 = 0.0;
        for (int a1 = 0; a1 < A; ++a1) e1 += p1(a1) * model.reward(s1, a1);
        second += pt * e1;
      }
      e0 += p0(a0) * (model.reward(s0, a0) + second);
    }
    total += model.initial(s0) * e0;
  }
  return total;
}

// exact return of the factored policy induced by per-agent action
// distributions (rows: state -> probs for that agent)
inline double exact_factored_return(const mifq::TabularModel& model,
                                    const std::function<Vector(int, int)>& agent_probs) {
  return exact_two_step_return(model, [&](int s) {
    const int A = model.joint_action_count();
    Vector joint(A);
    for (int ja = 0; ja < A; ++ja) {
      std::vector<int> acts = model.decode_joint(ja);
      double p = 1.0;
      for (size_t i = 0; i < acts.size(); ++i)
        p *= agent_probs(static_cast<int>(i), s)(acts[i]);
      joint(ja) = p;
    }
    return joint;
  });
}

}  // namespace oracle
