#include "loopchan/pbs.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <string>
#include <thread>

#if defined(__x86_64__) && defined(__GNUC__)
#include <immintrin.h>
#define LOOPCHAN_HAVE_AVX512_KERNEL 1
#endif

#include "loopchan/error.hpp"

namespace loopchan {

namespace {

constexpr std::size_t kMaxFrames = 600;
std::atomic<bool> g_simd_kernel{true};

struct Increment {
    double drift;
    double amplitude;
};

Increment increment_for(const ChannelParams& p, double dt) {
    return {p.v_eff * dt, std::sqrt(2.0 * p.d_eff * dt)};
}

constexpr std::size_t kLanes = 8;

struct Stepper {
    Increment inc;
    double l_eff;
    bool small_steps;  // every increment is shorter than the loop, one correction wraps it
    ZigguratNormal normal;

    Stepper(Increment i, double l) : inc(i), l_eff(l) {
        // The ziggurat never returns more than ~15 sigma.
        small_steps = std::abs(inc.drift) + 16.0 * inc.amplitude < l_eff;
    }

    double move(double x, double z) const {
        double y = x + inc.drift + inc.amplitude * z;
        if (!small_steps) return wrap_position(y, l_eff);
        y -= y >= l_eff ? l_eff : 0.0;
        y += y < 0.0 ? l_eff : 0.0;
        return y;
    }
};

void advance_one(double& x, Xoshiro256& eng, std::size_t n_steps, const Stepper& st) {
    double pos = x;
    for (std::size_t s = 0; s < n_steps; ++s) pos = st.move(pos, st.normal(eng));
    x = pos;
}

// kLanes particles in lockstep; same random stream consumption as advance_one.
void advance_block(double* x, Xoshiro256* eng, std::size_t n_steps, const Stepper& st) {
    std::uint64_t s0[kLanes], s1[kLanes], s2[kLanes], s3[kLanes];
    double pos[kLanes];
    for (std::size_t k = 0; k < kLanes; ++k) {
        const auto& state = eng[k].state();
        s0[k] = state[0];
        s1[k] = state[1];
        s2[k] = state[2];
        s3[k] = state[3];
        pos[k] = x[k];
    }
    for (std::size_t s = 0; s < n_steps; ++s) {
        std::uint64_t bits[kLanes];
        double z[kLanes];
        bool rejected = false;
        for (std::size_t k = 0; k < kLanes; ++k) bits[k] = Xoshiro256::next(s0[k], s1[k], s2[k], s3[k]);
        for (std::size_t k = 0; k < kLanes; ++k) rejected |= !st.normal.try_fast(bits[k], z[k]);
        if (rejected) {
            for (std::size_t k = 0; k < kLanes; ++k) {
                double dummy = 0.0;
                if (st.normal.try_fast(bits[k], dummy)) continue;
                Xoshiro256 lane({s0[k], s1[k], s2[k], s3[k]});
                z[k] = st.normal.finish(bits[k], lane);
                const auto& state = lane.state();
                s0[k] = state[0];
                s1[k] = state[1];
                s2[k] = state[2];
                s3[k] = state[3];
            }
        }
        for (std::size_t k = 0; k < kLanes; ++k) pos[k] = st.move(pos[k], z[k]);
    }
    for (std::size_t k = 0; k < kLanes; ++k) {
        eng[k] = Xoshiro256({s0[k], s1[k], s2[k], s3[k]});
        x[k] = pos[k];
    }
}

#ifdef LOOPCHAN_HAVE_AVX512_KERNEL
constexpr std::size_t kSimdGroups = 2;
constexpr std::size_t kSimdWidth = kLanes * kSimdGroups;

// kSimdWidth particles as kSimdGroups registers of eight lanes. Bit-identical to
// advance_block/advance_one: no fused multiply-add, same operation order, same
// stream consumption. Two independent groups hide the position-update latency.
__attribute__((target("avx512f,avx512dq"))) void advance_block_avx512(double* x, Xoshiro256* eng,
                                                                       std::size_t n_steps, const Stepper& st) {
    constexpr std::size_t G = kSimdGroups;
    alignas(64) std::uint64_t lanes[G][4][kLanes];
    __m512i s0[G], s1[G], s2[G], s3[G];
    __m512d pos[G];
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t k = 0; k < kLanes; ++k) {
            for (std::size_t w = 0; w < 4; ++w) lanes[g][w][k] = eng[g * kLanes + k].state()[w];
        }
        s0[g] = _mm512_load_si512(lanes[g][0]);
        s1[g] = _mm512_load_si512(lanes[g][1]);
        s2[g] = _mm512_load_si512(lanes[g][2]);
        s3[g] = _mm512_load_si512(lanes[g][3]);
        pos[g] = _mm512_loadu_pd(x + g * kLanes);
    }

    const __m512i five = _mm512_set1_epi64(5);
    const __m512i nine = _mm512_set1_epi64(9);
    const __m512i layer_mask = _mm512_set1_epi64(0x7f);
    const __m512d drift = _mm512_set1_pd(st.inc.drift);
    const __m512d amplitude = _mm512_set1_pd(st.inc.amplitude);
    const __m512d loop = _mm512_set1_pd(st.l_eff);
    const __m512d zero = _mm512_setzero_pd();
    const auto* k_table = st.normal.layer_bounds();
    const auto* w_table = st.normal.layer_widths();

    for (std::size_t s = 0; s < n_steps; ++s) {
        for (std::size_t g = 0; g < G; ++g) {
            const __m512i bits = _mm512_mullo_epi64(_mm512_rol_epi64(_mm512_mullo_epi64(s1[g], five), 7), nine);
            const __m512i t = _mm512_slli_epi64(s1[g], 17);
            s2[g] = _mm512_xor_si512(s2[g], s0[g]);
            s3[g] = _mm512_xor_si512(s3[g], s1[g]);
            s1[g] = _mm512_xor_si512(s1[g], s2[g]);
            s0[g] = _mm512_xor_si512(s0[g], s3[g]);
            s2[g] = _mm512_xor_si512(s2[g], t);
            s3[g] = _mm512_rol_epi64(s3[g], 45);

            const __m512i layer = _mm512_and_si512(bits, layer_mask);
            const __m512i j = _mm512_srai_epi64(bits, 11);
            const __m512i bound = _mm512_i64gather_epi64(layer, k_table, 8);
            const __m512d width = _mm512_i64gather_pd(layer, w_table, 8);
            const __mmask8 fast = _mm512_cmplt_epi64_mask(_mm512_abs_epi64(j), bound);
            __m512d z = _mm512_mul_pd(_mm512_cvtepi64_pd(j), width);

            if (fast != 0xff) {
                alignas(64) std::uint64_t b[kLanes];
                alignas(64) double zs[kLanes];
                auto& ln = lanes[g];
                _mm512_store_si512(b, bits);
                _mm512_store_pd(zs, z);
                _mm512_store_si512(ln[0], s0[g]);
                _mm512_store_si512(ln[1], s1[g]);
                _mm512_store_si512(ln[2], s2[g]);
                _mm512_store_si512(ln[3], s3[g]);
                for (std::size_t k = 0; k < kLanes; ++k) {
                    if (fast & (1u << k)) continue;
                    Xoshiro256 lane({ln[0][k], ln[1][k], ln[2][k], ln[3][k]});
                    zs[k] = st.normal.finish(b[k], lane);
                    for (std::size_t w = 0; w < 4; ++w) ln[w][k] = lane.state()[w];
                }
                s0[g] = _mm512_load_si512(ln[0]);
                s1[g] = _mm512_load_si512(ln[1]);
                s2[g] = _mm512_load_si512(ln[2]);
                s3[g] = _mm512_load_si512(ln[3]);
                z = _mm512_load_pd(zs);
            }

            __m512d y = _mm512_add_pd(_mm512_add_pd(pos[g], drift), _mm512_mul_pd(amplitude, z));
            y = _mm512_mask_sub_pd(y, _mm512_cmp_pd_mask(y, loop, _CMP_GE_OQ), y, loop);
            y = _mm512_mask_add_pd(y, _mm512_cmp_pd_mask(y, zero, _CMP_LT_OQ), y, loop);
            pos[g] = y;
        }
    }

    for (std::size_t g = 0; g < G; ++g) {
        _mm512_store_si512(lanes[g][0], s0[g]);
        _mm512_store_si512(lanes[g][1], s1[g]);
        _mm512_store_si512(lanes[g][2], s2[g]);
        _mm512_store_si512(lanes[g][3], s3[g]);
        for (std::size_t k = 0; k < kLanes; ++k) {
            eng[g * kLanes + k] = Xoshiro256({lanes[g][0][k], lanes[g][1][k], lanes[g][2][k], lanes[g][3][k]});
        }
        _mm512_storeu_pd(x + g * kLanes, pos[g]);
    }
}

bool avx512_available() {
    static const bool ok = __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq");
    return ok;
}
#endif

// Advances particles [first, last) by n_steps exact steps.
void advance_range(std::vector<double>& pos, std::vector<Xoshiro256>& streams, std::size_t first,
                   std::size_t last, std::size_t n_steps, Increment inc, double l_eff) {
    const Stepper st(inc, l_eff);
    std::size_t i = first;
#ifdef LOOPCHAN_HAVE_AVX512_KERNEL
    if (st.small_steps && use_simd_kernel() && avx512_available()) {
        for (; i + kSimdWidth <= last; i += kSimdWidth) advance_block_avx512(&pos[i], &streams[i], n_steps, st);
    }
#endif
    for (; i + kLanes <= last; i += kLanes) advance_block(&pos[i], &streams[i], n_steps, st);
    for (; i < last; ++i) advance_one(pos[i], streams[i], n_steps, st);
}

void advance(ParticleEnsemble& e, std::size_t n_steps, Increment inc, double l_eff, unsigned threads) {
    const std::size_t n = e.size();
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
    if (workers == 1) {
        advance_range(e.positions, e.streams, 0, n, n_steps, inc, l_eff);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t first = n * w / workers;
        const std::size_t last = n * (w + 1) / workers;
        pool.emplace_back([&e, first, last, n_steps, inc, l_eff] {
            advance_range(e.positions, e.streams, first, last, n_steps, inc, l_eff);
        });
    }
}

}  // namespace

ParticleEnsemble ParticleEnsemble::released_at(std::size_t n, double x, double l_eff, std::uint64_t seed) {
    if (n == 0) throw ParameterError("ensemble needs at least one particle");
    if (!(l_eff > 0.0) || !(x >= 0.0 && x < l_eff)) throw ParameterError("release position must lie in [0, l_eff)");
    ParticleEnsemble e;
    e.positions.assign(n, x);
    e.rng_seed = seed;
    e.streams.reserve(n);
    for (std::size_t i = 0; i < n; ++i) e.streams.emplace_back(seed, i);
    return e;
}

void SimConfig::validate() const {
    if (n_particles == 0) throw ParameterError("n_particles must be at least 1");
    if (!(std::isfinite(dt) && dt > 0.0)) throw ParameterError("dt must be positive");
    if (!(std::isfinite(t_end) && t_end >= dt)) throw ParameterError("t_end must be at least dt");
    if (n_bins < 2) throw ParameterError("n_bins must be at least 2");
    if (threads == 0) throw ParameterError("threads must be at least 1");
}

std::size_t SimConfig::n_steps() const {
    return static_cast<std::size_t>(std::llround(t_end / dt));
}

std::size_t SimConfig::frame_stride() const {
    if (record_every > 0) return record_every;
    return std::max<std::size_t>(1, (n_steps() + kMaxFrames - 1) / kMaxFrames);
}

void set_simd_kernel(bool enabled) { g_simd_kernel = enabled; }
bool use_simd_kernel() { return g_simd_kernel; }

void validate_transport(const ChannelParams& p) {
    if (!(std::isfinite(p.d_eff) && p.d_eff >= 0.0)) throw ParameterError("d_eff must be non-negative");
    if (!(std::isfinite(p.v_eff) && p.v_eff >= 0.0)) throw ParameterError("v_eff must be non-negative");
    if (!(std::isfinite(p.l_eff) && p.l_eff > 0.0)) throw ParameterError("l_eff must be positive");
}

double wrap_position(double x, double l_eff) {
    if (x >= l_eff) {
        x -= l_eff;
        if (x >= l_eff) x = std::fmod(x, l_eff);
    } else if (x < 0.0) {
        x += l_eff;
        if (x < 0.0) x = std::fmod(x, l_eff) + l_eff;
        if (x >= l_eff) x = 0.0;  // -tiny + l_eff rounds up to l_eff
    }
    return x;
}

ParticleEnsemble step(ParticleEnsemble e, const ChannelParams& p, double dt) {
    validate_transport(p);
    if (!(std::isfinite(dt) && dt > 0.0)) throw ParameterError("dt must be positive");
    if (e.streams.size() != e.positions.size()) throw ParameterError("ensemble streams and positions differ in size");
    advance(e, 1, increment_for(p, dt), p.l_eff, 1);
    e.t += dt;
    return e;
}

std::vector<double> histogram_density(const ParticleEnsemble& e, double l_eff, std::size_t n_bins) {
    if (n_bins < 2) throw ParameterError("n_bins must be at least 2");
    std::vector<std::size_t> counts(n_bins, 0);
    const double inv_width = static_cast<double>(n_bins) / l_eff;
    for (double x : e.positions) {
        const auto bin = static_cast<std::size_t>(x * inv_width);
        ++counts[std::min(bin, n_bins - 1)];
    }
    std::vector<double> density(n_bins);
    const double norm = inv_width / static_cast<double>(e.size());
    for (std::size_t i = 0; i < n_bins; ++i) density[i] = static_cast<double>(counts[i]) * norm;
    return density;
}

SimulationResult simulate(const SimConfig& cfg, const ChannelParams& p, double release_x) {
    cfg.validate();
    validate_transport(p);
    if (!(release_x >= 0.0 && release_x < p.l_eff)) throw ParameterError("release_x must lie in [0, l_eff)");

    ParticleEnsemble e = ParticleEnsemble::released_at(cfg.n_particles, release_x, p.l_eff, cfg.seed);
    const Increment inc = increment_for(p, cfg.dt);
    const std::size_t total = cfg.n_steps();
    const std::size_t stride = cfg.frame_stride();

    SimulationResult out{p.l_eff, cfg.n_bins, {}};
    out.frames.reserve(total / stride + 1);
    out.frames.push_back({0.0, histogram_density(e, p.l_eff, cfg.n_bins)});
    for (std::size_t done = 0; done + stride <= total; done += stride) {
        advance(e, stride, inc, p.l_eff, cfg.threads);
        e.t = static_cast<double>(done + stride) * cfg.dt;
        out.frames.push_back({e.t, histogram_density(e, p.l_eff, cfg.n_bins)});
    }
    return out;
}

Trace receiver_trace(const SimulationResult& sim, double x_rx, double window) {
    if (sim.frames.size() < 2) throw ParameterError("receiver trace needs at least two frames");
    const double bw = sim.bin_width();
    if (!(window < sim.l_eff)) throw ParameterError("receiver window must be shorter than the loop");
    if (!(window >= bw * (1.0 - 1e-12))) throw ParameterError("receiver window must cover at least one bin");

    // Bins whose interior overlaps the window; boundaries touching at a point do not count.
    const double eps = 1e-9 * bw;
    const long first = static_cast<long>(std::floor((x_rx - 0.5 * window + eps) / bw));
    const long last = static_cast<long>(std::ceil((x_rx + 0.5 * window - eps) / bw)) - 1;
    const long nb = static_cast<long>(sim.n_bins);
    std::vector<std::size_t> bins;
    for (long b = first; b <= last && static_cast<long>(bins.size()) < nb; ++b) {
        bins.push_back(static_cast<std::size_t>(((b % nb) + nb) % nb));
    }

    std::vector<double> t(sim.frames.size());
    std::vector<double> y(sim.frames.size());
    for (std::size_t f = 0; f < sim.frames.size(); ++f) {
        double sum = 0.0;
        for (std::size_t b : bins) sum += sim.frames[f].density[b];
        t[f] = sim.frames[f].t;
        y[f] = sum / static_cast<double>(bins.size());
    }
    Trace out{std::move(t), std::move(y), "1/m"};
    out.validate();
    return out;
}

double total_variation(const std::vector<double>& density_a, const std::vector<double>& density_b,
                       double bin_width) {
    if (density_a.size() != density_b.size()) throw ParameterError("densities differ in bin count");
    double sum = 0.0;
    for (std::size_t i = 0; i < density_a.size(); ++i) sum += std::abs(density_a[i] - density_b[i]);
    return 0.5 * sum * bin_width;
}

std::vector<double> bin_averaged_wrapped(const ChannelParams& p, double t, std::size_t n_bins,
                                         double release_x, std::size_t sub) {
    if (sub < 2 || sub % 2 != 0) throw ParameterError("Simpson panels per bin must be even");
    const double bw = p.l_eff / static_cast<double>(n_bins);
    const double h = bw / static_cast<double>(sub);
    std::vector<double> out(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        const double x0 = static_cast<double>(b) * bw;
        double acc = 0.0;
        for (std::size_t j = 0; j <= sub; ++j) {
            const double w = (j == 0 || j == sub) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            const double x = wrap_position(x0 + static_cast<double>(j) * h - release_x, p.l_eff);
            acc += w * wrapped_response(p, x, t);
        }
        out[b] = acc * h / 3.0 / bw;
    }
    return out;
}

}  // namespace loopchan
