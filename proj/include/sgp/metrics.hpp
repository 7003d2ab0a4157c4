#pragma once

#include <span>

namespace sgp {

// sqrt(mean squared error) of predictive means against truths.
double rmse(std::span<const double> means, std::span<const double> truths);

// Closed-form CRPS of a Gaussian predictive distribution N(mu, sigma^2)
// against observation y. sigma = 0 degenerates to |mu - y|.
double crps_gaussian(double mu, double sigma, double y);

// Mean CRPS over a prediction set.
double crps_gaussian(std::span<const double> means,
                     std::span<const double> sigmas,
                     std::span<const double> truths);

// Mean squared error between predicted probabilities and binary outcomes.
double brier(std::span<const double> probabilities,
             std::span<const int> outcomes);

}  // namespace sgp
