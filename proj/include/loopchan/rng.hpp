#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace loopchan {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * xoshiro256** (Blackman & Vigna). 32 bytes of state, so one generator per
 * particle is affordable. Stream (seed, index) is seeded by running
 * SplitMix64 from a state that mixes both values; streams for different
 * indices are therefore unrelated and independent of evaluation order.
 */
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    using State = std::array<std::uint64_t, 4>;

    Xoshiro256() : Xoshiro256(0, 0) {}
    explicit Xoshiro256(const State& state) noexcept : s_(state) {}
    Xoshiro256(std::uint64_t seed, std::uint64_t stream) noexcept {
        std::uint64_t sm = seed;
        const std::uint64_t mixed = splitmix64(sm) ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
        sm = mixed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(s_[0], s_[1], s_[2], s_[3]); }

    /// The generator step on loose state words, for interleaving several streams.
    static std::uint64_t next(std::uint64_t& s0, std::uint64_t& s1, std::uint64_t& s2, std::uint64_t& s3) noexcept {
        const std::uint64_t result = rotl(s1 * 5, 7) * 9;
        const std::uint64_t t = s1 << 17;
        s2 ^= s0;
        s3 ^= s1;
        s1 ^= s2;
        s0 ^= s3;
        s2 ^= t;
        s3 = rotl(s3, 45);
        return result;
    }

    const State& state() const noexcept { return s_; }

    friend bool operator==(const Xoshiro256&, const Xoshiro256&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    State s_{};
};

}  // namespace loopchan

#include <cmath>
#include <cstdint>

namespace loopchan {

/**
 * Standard normal sampler, Marsaglia-Tsang ziggurat with 128 layers.
 *
 * One 64-bit engine output per sample on the fast path (~99%): the low 7
 * bits select the layer and the top 53 bits, read as a signed integer,
 * give the abscissa. The wedge and tail fall back to exact rejection.
 * Stateless, so a single instance can be shared by every particle stream.
 */
class ZigguratNormal {
public:
    ZigguratNormal() : t_(tables()) {}

    template <class Engine>
    double operator()(Engine& eng) const {
        const std::uint64_t bits = eng();
        double z = 0.0;
        return try_fast(bits, z) ? z : finish(bits, eng);
    }

    /// Fast path for one engine output; false means finish() must take over.
    bool try_fast(std::uint64_t bits, double& z) const noexcept {
        const auto layer = static_cast<unsigned>(bits & 0x7f);
        const std::int64_t j = static_cast<std::int64_t>(bits) >> 11;
        z = static_cast<double>(j) * t_.w[layer];
        return (j < 0 ? -j : j) < t_.k[layer];
    }

    /// Wedge/tail handling for an output rejected by try_fast, drawing more from eng as needed.
    template <class Engine>
    double finish(std::uint64_t bits, Engine& eng) const {
        for (;;) {
            const auto layer = static_cast<unsigned>(bits & 0x7f);
            const std::int64_t j = static_cast<std::int64_t>(bits) >> 11;
            if ((j < 0 ? -j : j) < t_.k[layer]) return static_cast<double>(j) * t_.w[layer];

            const double x = static_cast<double>(j) * t_.w[layer];
            if (layer == 0) {
                double tx = 0.0;
                double ty = 0.0;
                do {
                    tx = -std::log(open_uniform(eng)) / kTailStart;
                    ty = -std::log(open_uniform(eng));
                } while (ty + ty < tx * tx);
                return j > 0 ? kTailStart + tx : -kTailStart - tx;
            }
            const double u = open_uniform(eng);
            if (t_.f[layer] + u * (t_.f[layer - 1] - t_.f[layer]) < std::exp(-0.5 * x * x)) return x;
            bits = eng();
        }
    }

    const std::int64_t* layer_bounds() const noexcept { return t_.k; }
    const double* layer_widths() const noexcept { return t_.w; }

private:
    static constexpr double kTailStart = 3.442619855899;
    static constexpr double kLayerArea = 9.91256303526217e-3;
    static constexpr double kScale = 4503599627370496.0;  // 2^52

    struct Tables {
        std::int64_t k[128];
        double w[128];
        double f[128];
    };

    static const Tables& tables() {
        static const Tables t = [] {
            Tables tb{};
            double dn = kTailStart;
            double tn = dn;
            const double q = kLayerArea / std::exp(-0.5 * dn * dn);
            tb.k[0] = static_cast<std::int64_t>((dn / q) * kScale);
            tb.k[1] = 0;
            tb.w[0] = q / kScale;
            tb.w[127] = dn / kScale;
            tb.f[0] = 1.0;
            tb.f[127] = std::exp(-0.5 * dn * dn);
            for (int i = 126; i >= 1; --i) {
                dn = std::sqrt(-2.0 * std::log(kLayerArea / dn + std::exp(-0.5 * dn * dn)));
                tb.k[i + 1] = static_cast<std::int64_t>((dn / tn) * kScale);
                tn = dn;
                tb.f[i] = std::exp(-0.5 * dn * dn);
                tb.w[i] = dn / kScale;
            }
            return tb;
        }();
        return t;
    }

    // Uniform on (0, 1].
    template <class Engine>
    static double open_uniform(Engine& eng) {
        return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
    }

    const Tables& t_;
};

}  // namespace loopchan
