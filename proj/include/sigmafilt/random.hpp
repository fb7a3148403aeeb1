#pragma once

#include <cstdint>
#include <random>

#include "sigmafilt/gaussian.hpp"

namespace sigmafilt {

/// SplitMix64 step; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic per-stream seed from a master seed and a stream id.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id);

/// Standard-normal stream. The algorithm is pinned so that runs are
/// reproducible across platforms: uniforms come from mt19937_64 (bit-exact by
/// the standard) mapped to (0,1) via ((x >> 11) + 0.5) * 2^-53, and normals
/// via the Box-Muller transform with the second deviate cached.
/// std::normal_distribution is implementation-defined and deliberately avoided.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next();
    Vector next_vector(Eigen::Index n);

    /// Draw from N(mean, cov) using the safeguarded Cholesky factor of cov.
    Vector next_multivariate(const Vector& mean, const Matrix& cov);

private:
    double next_uniform();

    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sigmafilt
