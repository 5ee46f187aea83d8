#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace grouplift {

// Deterministic random source. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard), but every distribution is hand-rolled
// here because the std:: distributions are implementation-defined and would
// break byte-identical reports across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform on [0, bound). Rejection sampling keeps it unbiased.
    std::size_t uniform_index(std::size_t bound) {
        const std::uint64_t b = static_cast<std::uint64_t>(bound);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % b);
    }

    // Standard normal via Box-Muller; the paired value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 =
            static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    // Fisher-Yates, back to front.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace grouplift
