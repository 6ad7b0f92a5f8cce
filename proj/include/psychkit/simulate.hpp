#pragma once

#include <random>
#include <string>
#include <vector>

#include "psychkit/dataset.hpp"
#include "psychkit/linalg.hpp"

namespace psychkit::sim {

using Rng = std::mt19937_64;

Vector normal_draws(Index n, double mean, double sd, Rng& rng);
Vector uniform_draws(Index n, double lo, double hi, Rng& rng);

/// Bernoulli draws from the 2PL: students x items.
Matrix simulate_2pl(const Vector& a, const Vector& b, const Vector& theta, Rng& rng);

std::vector<std::string> item_labels(Index n_items, const std::string& prefix = "Q");

/// Wraps a 0/1 matrix as a ResponseMatrix; `groups` (optional) fills the
/// gender column, grade is set to `grade`.
ResponseMatrix to_response_matrix(const Matrix& responses, const std::vector<std::string>& groups = {},
                                  int grade = 0);

}  // namespace psychkit::sim
