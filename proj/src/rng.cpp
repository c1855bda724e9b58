// SPDX-License-Identifier: Apache-2.0
#include "riskit/rng.hpp"

#include <cmath>

namespace riskit {

namespace {
std::uint64_t splitmix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index)
{
    return splitmix(splitmix(splitmix(base) ^ stream) + index);
}

cd Rng::cnormal()
{
    const double re = norm_(eng_);
    const double im = norm_(eng_);
    return {re * M_SQRT1_2, im * M_SQRT1_2};
}

std::size_t Rng::index(std::size_t n)
{
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(eng_);
}

CVec Rng::cnormal_vec(Eigen::Index n)
{
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = cnormal();
    return v;
}

CMat Rng::cnormal_mat(Eigen::Index rows, Eigen::Index cols)
{
    CMat m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
            m(r, c) = cnormal();
    return m;
}

CVec Rng::phase_vec(Eigen::Index n)
{
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = unit_phase();
    return v;
}

} // namespace riskit
