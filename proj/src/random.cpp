#include "sigmafilt/random.hpp"

#include <cmath>
#include <numbers>

namespace sigmafilt {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
    return splitmix64(master ^ splitmix64(stream_id));
}

double GaussianStream::next_uniform() {
    // 53-bit mantissa, shifted into the open interval (0, 1).
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianStream::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

Vector GaussianStream::next_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = next();
    return v;
}

Vector GaussianStream::next_multivariate(const Vector& mean, const Matrix& cov) {
    if (cov.size() == 0 || cov.cwiseAbs().maxCoeff() == 0.0) return mean;
    const Matrix lower = cholesky_psd(cov).lower;
    return mean + lower * next_vector(mean.size());
}

}  // namespace sigmafilt
