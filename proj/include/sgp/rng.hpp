#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "sgp/errors.hpp"

namespace sgp {

// Deterministic random stream. One instance owns the whole stream for a
// chain; state round-trips through serialize()/deserialize() so a run can be
// resumed bit-exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double gaussian() { return normal_(engine_); }

  std::uint64_t integer() { return engine_(); }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_ << '\n' << normal_;
    return os.str();
  }

  static Rng deserialize(const std::string& state) {
    Rng r(0);
    std::istringstream is(state);
    is >> r.engine_ >> r.normal_;
    if (!is) throw InputError("Rng::deserialize: malformed state string");
    return r;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace sgp
