#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace adaptive {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Context vector handed to every bandit policy.
using ContextVector = Eigen::VectorXd;

/// Random stream used everywhere. Seeded explicitly; never from wall clock.
using Rng = std::mt19937_64;

/// Base error for every failure raised by the library. `kind()` is a short
/// machine-readable token ("config", "checkpoint", "dimension", ...).
class Error : public std::runtime_error {
    public:
        Error(std::string kind, const std::string & message)
            : std::runtime_error(message), kind_(std::move(kind)) {}

        const std::string & kind() const noexcept { return kind_; }

    private:
        std::string kind_;
};

/// Independent sub-stream `stream` derived from `seed`. Distinct streams never
/// share state, so consumers do not perturb each other's draws.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

void require_finite(const Vector & v, const char * what);
void require_finite(double v, const char * what);

/// Index of the largest entry, lowest index on ties.
std::size_t argmax_lowest(const Vector & values);

/// Draw from N(mean, L L^T) given the lower Cholesky factor.
Vector sample_gaussian(const Vector & mean, const Matrix & lower, Rng & rng);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

} // namespace adaptive

namespace adaptive {

/// Lower factor L with L L^T = m for a symmetric positive semidefinite m.
/// Falls back to an eigendecomposition when Cholesky fails (singular m).
Matrix psd_sqrt(const Matrix & m);

} // namespace adaptive
