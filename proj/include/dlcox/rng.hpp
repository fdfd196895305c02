#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dlcox {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// A generator is identified by (seed, stream); `split` derives an
/// independent stream without advancing this one.
class Philox {
public:
    using result_type = std::uint64_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox(std::uint64_t seed, std::uint64_t stream = 0);

    static Block bijection(Block counter, Key key);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t uniform_below(std::uint64_t bound);
    double normal();
    double exponential(double rate);

    Philox split(std::uint64_t stream) const { return Philox(seed_, stream); }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    Block buffer_{};
    int used_ = 4;
};

}  // namespace dlcox
