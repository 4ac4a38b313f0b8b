#pragma once

#include "sptm/channel.hpp"

namespace sptm {

/// Magnitude/phase augmentation policy. Shift bounds follow the
/// |i| <= floor(R_d/2), |j| <= floor(N_b/2) limits; defaults use the
/// narrower delay +/-3 and angular +/-15 ranges.
struct AugmentPolicy {
    int delay_shift_min = -3;
    int delay_shift_max = 3;
    int angular_shift_min = -15;
    int angular_shift_max = 15;
    bool use_ads = true;
    bool use_pr = true;
    std::int64_t target_size = 0;
    std::uint64_t rng_seed = 1;

    void validate(int r_delay, int n_antennas) const;
};

struct MagPhase {
    Eigen::MatrixXd magnitude;  // nonnegative
    Eigen::MatrixXd phase;      // in [0, 2*pi); 0 where magnitude is 0
};

MagPhase split_mag_phase(const Eigen::MatrixXcd& h);

/// Entry (m,n) of the output is entry (m+i, (n+j) mod N_b) of the input
/// when m+i stays inside [0, R_d); rows shifted past the delay edge are
/// zero-filled, the angular axis wraps. (The 1-based rule of the source
/// model, written 0-based.)
Eigen::MatrixXd ads_shift(const Eigen::MatrixXd& mag, int delay_shift, int angular_shift);

/// I.i.d. uniform phases on [0, 2*pi).
Eigen::MatrixXd random_phase(int rows, int cols, Rng& rng);

Eigen::MatrixXcd compose(const Eigen::MatrixXd& mag, const Eigen::MatrixXd& phase);

/// Expand a measured dataset to policy.target_size. All measured samples
/// are kept; the remainder is produced by ADS and/or PR, or by plain
/// cyclic repetition when both are off. Deterministic given the policy
/// seed, independent of evaluation order.
Dataset build_augmented_dataset(const Dataset& measured, const AugmentPolicy& policy);

}  // namespace sptm
