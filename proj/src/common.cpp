#include <adaptive/common.hpp>

#include <array>
#include <charconv>
#include <cmath>

namespace adaptive {

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

void require_finite(const Vector & v, const char * what) {
    if (!v.allFinite())
        throw Error("input", std::string("non-finite ") + what);
}

void require_finite(double v, const char * what) {
    if (!std::isfinite(v))
        throw Error("input", std::string("non-finite ") + what);
}

std::size_t argmax_lowest(const Vector & values) {
    std::size_t best = 0;
    for (Eigen::Index k = 1; k < values.size(); ++k)
        if (values[k] > values[static_cast<Eigen::Index>(best)])
            best = static_cast<std::size_t>(k);
    return best;
}

Vector sample_gaussian(const Vector & mean, const Matrix & lower, Rng & rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = normal(rng);
    return mean + lower * z;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc())
        throw Error("internal", "cannot format number");
    return std::string(buf.data(), end);
}

} // namespace adaptive

namespace adaptive {

Matrix psd_sqrt(const Matrix & m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success)
        return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal();
}

} // namespace adaptive
