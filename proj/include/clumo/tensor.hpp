#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace clumo {

// Dense row-major matrix of doubles; the only numeric carrier in the library.
struct Tensor2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // size rows * cols

    Tensor2D() = default;
    Tensor2D(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
};

// Exact value equality (bitwise on every element).
bool operator==(const Tensor2D& a, const Tensor2D& b);
inline bool operator!=(const Tensor2D& a, const Tensor2D& b) { return !(a == b); }

// FNV-1a over shape and the raw bit patterns of the elements. Used by the
// freeze/isolation tests to detect any mutation of tensors that must not move.
std::uint64_t checksum(const Tensor2D& t);

// Counter-based generator (splitmix64 over an incrementing state). The draw
// stream is a pure function of the seed, so identical seeds reproduce
// identical tensors across runs and platforms. No global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64();
    double next_double();                       // [0, 1)
    double uniform(double lo, double hi);
    double gaussian();                          // standard normal (Box-Muller)
    std::size_t index(std::size_t n);           // uniform in [0, n), n >= 1

    // Independent substream derived from the construction seed and a caller
    // salt only; draws already taken from this generator do not affect it.
    Rng fork(std::uint64_t salt) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

Tensor2D random_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);
Tensor2D random_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev);

// Fisher-Yates shuffle driven by the given generator.
void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng);

}  // namespace clumo
