#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "axb/matrix.hpp"

namespace axb {

/// Deterministic seedable random stream (xoshiro256** state, splitmix64
/// seeding). Identical (algorithm, seed) replays the same sequence on any
/// platform; streams are single-owner, substreams cover concurrent use.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : seed_(seed) {
        uint64_t x = seed;
        for (auto& s : state_) s = mix(x);
        if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0)
            state_[0] = 1;
    }

    static constexpr const char* algorithm() { return "xoshiro256**"; }
    uint64_t seed() const { return seed_; }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal draw (Box-Muller on uniform pairs, spare cached).
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Draws index i with probability weights[i] / sum(weights) by inverse
    /// transform on the cumulative sum. Consumes exactly one uniform.
    size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0 || !std::isfinite(w))
                throw DomainError("categorical: weights must be finite and nonnegative");
            total += w;
        }
        if (total <= 0.0) throw DomainError("categorical: no positive weight");
        double target = next_unit() * total;
        double cum = 0.0;
        size_t last_positive = weights.size();
        for (size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            cum += weights[i];
            last_positive = i;
            if (target < cum) return i;
        }
        return last_positive;  // target == total after roundoff
    }

    /// Same draw against a precomputed inclusive cumulative sum.
    size_t categorical_cdf(std::span<const double> cumsum) {
        double total = cumsum.back();
        if (!(total > 0.0)) throw DomainError("categorical: no positive weight");
        double target = next_unit() * total;
        size_t lo = 0, hi = cumsum.size() - 1;
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (cumsum[mid] <= target)
                lo = mid + 1;
            else
                hi = mid;
        }
        // target can round up to the total; never land on a zero-weight slot
        while (lo > 0 && cumsum[lo] == cumsum[lo - 1]) --lo;
        return lo;
    }

    /// Independent stream for trial t: seed ⊕ hash(t), re-expanded.
    RngStream substream(uint64_t t) const {
        return RngStream(seed_ ^ mix_pure(0x5851f42d4c957f2dULL + t));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t mix(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        return mix_pure(x);
    }
    static uint64_t mix_pure(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<uint64_t, 4> state_{};
    uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// randn-style dense matrix.
inline DenseMatrix dense_gaussian(RngStream& stream, size_t rows, size_t cols) {
    DenseMatrix m(rows, cols);
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) m(i, j) = stream.gauss();
    return m;
}

/// sprandn-style CSR matrix: each entry present independently with
/// probability `density`, values scale·N(0,1). Exact zeros are redrawn so the
/// stored-nonzero invariant holds.
inline SparseMatrix sparse_gaussian(RngStream& stream, size_t rows, size_t cols,
                                    double density, double scale = 1.0) {
    if (!(density > 0.0) || density > 1.0)
        throw DomainError("sparse_gaussian: density must be in (0, 1]");
    std::vector<size_t> rp(rows + 1, 0), ci;
    std::vector<double> vals;
    for (size_t i = 0; i < rows; ++i) {
        for (size_t j = 0; j < cols; ++j) {
            if (density < 1.0 && stream.next_unit() >= density) continue;
            double v = scale * stream.gauss();
            while (v == 0.0) v = scale * stream.gauss();
            ci.push_back(j);
            vals.push_back(v);
        }
        rp[i + 1] = ci.size();
    }
    return SparseMatrix(rows, cols, std::move(rp), std::move(ci), std::move(vals));
}

}  // namespace axb
