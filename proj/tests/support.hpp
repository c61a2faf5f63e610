#ifndef DVFP_TESTS_SUPPORT_HPP
#define DVFP_TESTS_SUPPORT_HPP

#include <cstdint>
#include <vector>

#include "dvfp/rng.hpp"

namespace dvfp::support {

/// Small deterministic generator for property tests.
class Gen {
  public:
    explicit Gen(std::uint64_t seed) : rng_(seed, 4242) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(k_++, 0); }
    double normal() { return rng_.normal(k_++, 0); }
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform(0.0, static_cast<double>(n))) % n;
    }
    std::vector<double> normals(std::size_t n, double scale = 1.0) {
        std::vector<double> v(n);
        for (double& x : v) x = scale * normal();
        return v;
    }

  private:
    CounterNormal rng_;
    std::uint64_t k_ = 0;
};

}  // namespace dvfp::support

#endif
