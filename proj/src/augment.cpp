#include "sptm/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace sptm {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

void check_shift(int shift, int extent, const char* axis) {
    if (std::abs(shift) > extent / 2) {
        throw std::invalid_argument(std::string("ads_shift: ") + axis + " shift out of bounds");
    }
}

}  // namespace

void AugmentPolicy::validate(int r_delay, int n_antennas) const {
    if (delay_shift_min > delay_shift_max || angular_shift_min > angular_shift_max) {
        throw std::invalid_argument("augment policy: empty shift range");
    }
    check_shift(delay_shift_min, r_delay, "delay");
    check_shift(delay_shift_max, r_delay, "delay");
    check_shift(angular_shift_min, n_antennas, "angular");
    check_shift(angular_shift_max, n_antennas, "angular");
}

MagPhase split_mag_phase(const Eigen::MatrixXcd& h) {
    MagPhase out;
    out.magnitude.resize(h.rows(), h.cols());
    out.phase.resize(h.rows(), h.cols());
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
            double mag = std::abs(h(r, c));
            out.magnitude(r, c) = mag;
            if (mag == 0.0) {
                out.phase(r, c) = 0.0;  // phase of zero is undefined; fix it at 0
            } else {
                double a = std::atan2(h(r, c).imag(), h(r, c).real());
                if (a < 0.0) a += kTwoPi;
                if (a >= kTwoPi) a = 0.0;
                out.phase(r, c) = a;
            }
        }
    }
    return out;
}

Eigen::MatrixXd ads_shift(const Eigen::MatrixXd& mag, int delay_shift, int angular_shift) {
    int rd = static_cast<int>(mag.rows());
    int nb = static_cast<int>(mag.cols());
    check_shift(delay_shift, rd, "delay");
    check_shift(angular_shift, nb, "angular");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rd, nb);
    for (int m = 0; m < rd; ++m) {
        int src_m = m + delay_shift;
        if (src_m < 0 || src_m >= rd) continue;
        for (int n = 0; n < nb; ++n) {
            int src_n = ((n + angular_shift) % nb + nb) % nb;
            out(m, n) = mag(src_m, src_n);
        }
    }
    return out;
}

Eigen::MatrixXd random_phase(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) out(r, c) = rng.uniform(0.0, kTwoPi);
    }
    return out;
}

Eigen::MatrixXcd compose(const Eigen::MatrixXd& mag, const Eigen::MatrixXd& phase) {
    if (mag.rows() != phase.rows() || mag.cols() != phase.cols()) {
        throw std::invalid_argument("compose: magnitude/phase dimension mismatch");
    }
    Eigen::MatrixXcd out(mag.rows(), mag.cols());
    for (Eigen::Index r = 0; r < mag.rows(); ++r) {
        for (Eigen::Index c = 0; c < mag.cols(); ++c) {
            out(r, c) = std::polar(mag(r, c), phase(r, c));
        }
    }
    return out;
}

Dataset build_augmented_dataset(const Dataset& measured, const AugmentPolicy& policy) {
    measured.validate();
    if (measured.size() == 0) throw std::invalid_argument("augment: measured dataset is empty");
    if (policy.target_size < static_cast<std::int64_t>(measured.size())) {
        throw std::invalid_argument("augment: target_size smaller than measured dataset");
    }
    policy.validate(measured.r_delay, measured.n_antennas);

    std::int64_t di_count = policy.delay_shift_max - policy.delay_shift_min + 1;
    std::int64_t dj_count = policy.angular_shift_max - policy.angular_shift_min + 1;
    bool grid_has_identity = policy.delay_shift_min <= 0 && 0 <= policy.delay_shift_max &&
                             policy.angular_shift_min <= 0 && 0 <= policy.angular_shift_max;
    std::int64_t grid_size = di_count * dj_count - (grid_has_identity ? 1 : 0);
    if (policy.use_ads && grid_size < 1) {
        throw std::invalid_argument("augment: ADS enabled but no nonzero shifts available");
    }

    Dataset out;
    out.r_delay = measured.r_delay;
    out.n_antennas = measured.n_antennas;
    out.seed = policy.rng_seed;
    out.samples = measured.samples;
    out.provenance = measured.provenance;
    out.samples.reserve(static_cast<std::size_t>(policy.target_size));

    std::int64_t n = static_cast<std::int64_t>(measured.size());
    for (std::int64_t t = n; t < policy.target_size; ++t) {
        if (!policy.use_ads && !policy.use_pr) {
            out.samples.push_back(measured.samples[static_cast<std::size_t>((t - n) % n)]);
            out.provenance.push_back(Provenance::Augmented);
            continue;
        }
        Rng rng(Rng::derive(policy.rng_seed, static_cast<std::uint64_t>(t)));
        Eigen::MatrixXcd sample;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const auto& src = measured.samples[rng.uniform_index(static_cast<std::uint64_t>(n))];
            MagPhase mp = split_mag_phase(src);
            if (policy.use_ads) {
                std::int64_t k = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(grid_size)));
                // walk the (i, j) grid skipping the identity shift
                std::int64_t flat = k;
                if (grid_has_identity) {
                    std::int64_t identity_flat = (0 - policy.delay_shift_min) * dj_count +
                                                 (0 - policy.angular_shift_min);
                    if (flat >= identity_flat) ++flat;
                }
                int i = policy.delay_shift_min + static_cast<int>(flat / dj_count);
                int j = policy.angular_shift_min + static_cast<int>(flat % dj_count);
                mp.magnitude = ads_shift(mp.magnitude, i, j);
                mp.phase = ads_shift(mp.phase, i, j);
            }
            if (policy.use_pr) {
                mp.phase = random_phase(measured.r_delay, measured.n_antennas, rng);
            }
            sample = compose(mp.magnitude, mp.phase);
            if (sample.norm() > 0.0) break;  // a shift may have pushed all energy out
        }
        if (sample.norm() == 0.0) {
            throw std::runtime_error("augment: could not draw a nonzero augmented sample");
        }
        out.samples.push_back(std::move(sample));
        out.provenance.push_back(Provenance::Augmented);
    }
    out.validate();
    return out;
}

}  // namespace sptm
