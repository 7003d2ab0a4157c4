#include "sgp/metrics.hpp"

#include <cmath>

#include "sgp/errors.hpp"

namespace sgp {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kInvSqrtPi = 0.5641895835477563;

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
}  // namespace

double rmse(std::span<const double> means, std::span<const double> truths) {
  if (means.empty()) throw InputError("rmse: empty input");
  if (means.size() != truths.size())
    throw InputError("rmse: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    const double d = means[i] - truths[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(means.size()));
}

double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma >= 0.0))
    throw InputError("crps: standard deviation must be nonnegative");
  if (sigma == 0.0) return std::abs(mu - y);
  const double z = (y - mu) / sigma;
  return sigma *
         (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z) - kInvSqrtPi);
}

double crps_gaussian(std::span<const double> means,
                     std::span<const double> sigmas,
                     std::span<const double> truths) {
  if (means.empty()) throw InputError("crps: empty input");
  if (means.size() != sigmas.size() || means.size() != truths.size())
    throw InputError("crps: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i)
    acc += crps_gaussian(means[i], sigmas[i], truths[i]);
  return acc / static_cast<double>(means.size());
}

double brier(std::span<const double> probabilities,
             std::span<const int> outcomes) {
  if (probabilities.empty()) throw InputError("brier: empty input");
  if (probabilities.size() != outcomes.size())
    throw InputError("brier: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw InputError("brier: probability outside [0, 1]");
    if (outcomes[i] != 0 && outcomes[i] != 1)
      throw InputError("brier: outcomes must be 0 or 1");
    const double d = p - static_cast<double>(outcomes[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(probabilities.size());
}

}  // namespace sgp
