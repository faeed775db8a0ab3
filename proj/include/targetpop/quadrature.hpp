#pragma once

#include <cstddef>
#include <vector>

namespace targetpop {

// Nodes and weights for E[f(Z)] with Z ~ N(0,1): sum_k w[k] * f(z[k]).
// Weights sum to 1.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Golub-Welsch on the probabilists' Hermite recurrence.
GaussHermiteRule gauss_hermite(std::size_t n);

// E[expit(mean + sd * Z)], Z ~ N(0,1), via a cached 128-node rule.
double expected_expit(double mean, double sd);

}  // namespace targetpop
