// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "riskit/types.hpp"

namespace riskit {

// Mixes (base, stream, index) into an independent 64-bit seed (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return uni_(eng_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uni_(eng_); }
    double normal() { return norm_(eng_); }
    // Circularly-symmetric complex Gaussian, unit variance.
    cd cnormal();
    cd unit_phase() { return std::polar(1.0, uniform(-kPi, kPi)); }
    std::size_t index(std::size_t n);

    CVec cnormal_vec(Eigen::Index n);
    CMat cnormal_mat(Eigen::Index rows, Eigen::Index cols);
    CVec phase_vec(Eigen::Index n);

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

} // namespace riskit
