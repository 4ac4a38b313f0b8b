#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sptm/rng.hpp"
#include "sptm/transform.hpp"

namespace sptm {

/// Geometric multipath scenario for the synthetic CSI generator.
/// Uniform linear array with half-wavelength spacing; per-sample total
/// power drawn log-uniform across path_loss_spread_db.
struct ChannelScenarioConfig {
    int n_antennas = 32;          // N_b
    int n_subcarriers = 1024;     // N_f
    double bandwidth_hz = 20e6;
    int n_paths_min = 4;
    int n_paths_max = 16;
    double delay_spread_max_s = 1.0e-6;
    double angle_range_rad = 1.3;  // angles drawn from [-range, range]
    double path_loss_spread_db = 40.0;
    int r_delay = 32;             // R_d used when building datasets
    std::uint64_t rng_seed = 1;

    void validate() const;
};

enum class Provenance : std::uint8_t { Measured = 0, Augmented = 1 };

/// Ordered collection of truncated angular-delay CSI samples. Values are
/// held at storage precision (exactly representable in float32) so that
/// file roundtrips are bit-identical.
struct Dataset {
    int r_delay = 0;
    int n_antennas = 0;
    std::uint64_t seed = 0;
    std::vector<Eigen::MatrixXcd> samples;
    std::vector<Provenance> provenance;

    std::size_t size() const { return samples.size(); }
    void validate() const;
};

/// Round every entry to the nearest float32 (the dataset storage grid).
Eigen::MatrixXcd quantize_storage(const Eigen::MatrixXcd& m);

/// One spatial-frequency CSI draw:
///   H(m,b) = g * sum_p a_p e^{-j 2 pi f_m tau_p} e^{-j pi b sin(phi_p)}
/// with f_m = m * bandwidth / N_f, complex Gaussian path gains, and g
/// scaling the sample to a log-uniform power across the configured dB
/// spread. Deterministic given the rng state.
CsiMatrix generate_sample(const ChannelScenarioConfig& cfg, Rng& rng);

/// Generate, transform to angular-delay, truncate to R_d rows, quantize.
/// Per-sample sub-seeds are derived from cfg.rng_seed, so the result is
/// independent of evaluation order.
Dataset generate_dataset(const ChannelScenarioConfig& cfg, std::int64_t n_samples);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace sptm
