#pragma once

/**
 * @file pbs.hpp
 * @brief Particle-based simulation of drift-diffusion on a ring.
 *
 * Each particle performs x <- (x + v dt + sqrt(2 D dt) xi) mod l_eff with
 * xi ~ N(0, 1). For constant coefficients the Gaussian increment is exact,
 * so the histogram converges to the wrapped normal density for any dt.
 *
 * Every particle owns its own generator seeded from (seed, particle index),
 * which makes results independent of how particles are split across threads.
 */

#include <cstddef>
#include <cstdint>
#include <vector>

#include "loopchan/channel.hpp"
#include "loopchan/rng.hpp"
#include "loopchan/trace.hpp"

namespace loopchan {

struct ParticleEnsemble {
    std::vector<double> positions;   ///< [m], each in [0, l_eff)
    double t = 0.0;                  ///< [s]
    std::uint64_t rng_seed = 0;
    std::vector<Xoshiro256> streams;  ///< one generator per particle

    /// n particles at `x`, streams seeded from `seed`.
    static ParticleEnsemble released_at(std::size_t n, double x, double l_eff, std::uint64_t seed);

    std::size_t size() const { return positions.size(); }
};

struct SimConfig {
    std::size_t n_particles = 100000;
    double dt = 1e-3;                ///< [s]
    double t_end = 60.0;             ///< [s]
    std::size_t n_bins = 100;
    std::size_t record_every = 0;    ///< steps between frames; 0 picks <= 600 frames
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const;
    std::size_t n_steps() const;
    std::size_t frame_stride() const;
};

struct Frame {
    double t = 0.0;
    std::vector<double> density;  ///< [1/m] per bin
};

struct SimulationResult {
    double l_eff = 0.0;
    std::size_t n_bins = 0;
    std::vector<Frame> frames;

    double bin_width() const { return l_eff / static_cast<double>(n_bins); }
    double bin_center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * bin_width(); }
};

/// Ring transport parameters; unlike ChannelParams::validate this admits d_eff == 0.
void validate_transport(const ChannelParams& p);

/// Enables or disables the vectorized stepping kernel (on by default where the CPU supports it).
/// Both kernels produce bit-identical results.
void set_simd_kernel(bool enabled);
bool use_simd_kernel();

/// Maps x onto [0, l_eff).
double wrap_position(double x, double l_eff);

/// One exact drift-diffusion step for every particle.
ParticleEnsemble step(ParticleEnsemble e, const ChannelParams& p, double dt);

/// Histogram counts / (N bin_width) over n_bins equal bins of [0, l_eff).
std::vector<double> histogram_density(const ParticleEnsemble& e, double l_eff, std::size_t n_bins);

/**
 * Releases cfg.n_particles at release_x at t = 0 and records the density
 * histogram every frame_stride() steps, starting with t = 0.
 * Throws ParameterError on an invalid configuration.
 */
SimulationResult simulate(const SimConfig& cfg, const ChannelParams& p, double release_x);

/**
 * Mean density over the bins that intersect [x_rx - window/2, x_rx + window/2]
 * (wrapped around the ring), one sample per frame.
 */
Trace receiver_trace(const SimulationResult& sim, double x_rx, double window);

/// Total-variation distance between a histogram and bin-averaged reference densities.
double total_variation(const std::vector<double>& density_a, const std::vector<double>& density_b,
                       double bin_width);

/// wrapped_response for a release at release_x, averaged over each bin (Simpson, `sub` panels per bin).
std::vector<double> bin_averaged_wrapped(const ChannelParams& p, double t, std::size_t n_bins,
                                         double release_x = 0.0, std::size_t sub = 8);

}  // namespace loopchan
