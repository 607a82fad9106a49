#include "clumo/tensor.hpp"

#include <cmath>
#include <cstring>

#include "clumo/errors.hpp"

namespace clumo {

bool Tensor2D::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool operator==(const Tensor2D& a, const Tensor2D& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

std::uint64_t checksum(const Tensor2D& t) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    mix(t.rows);
    mix(t.cols);
    for (double d : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        mix(bits);
    }
    return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return splitmix64(state_);
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double Rng::gaussian() {
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw ValueError("Rng::index: n must be >= 1");
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Rng Rng::fork(std::uint64_t salt) const {
    return Rng(splitmix64(seed_ ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull)));
}

Tensor2D random_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    Tensor2D t(rows, cols);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor2D random_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev) {
    Tensor2D t(rows, cols);
    for (double& v : t.data) v = mean + stddev * rng.gaussian();
    return t;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = rng.index(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace clumo
