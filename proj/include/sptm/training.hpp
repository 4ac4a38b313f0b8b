#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sptm/channel.hpp"
#include "sptm/codec.hpp"

namespace sptm {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double gamma = 0.01;  // constraint weight
    std::uint64_t seed = 1;

    // codec dims; r_delay/n_antennas come from the dataset
    double cr = 0.25;
    int n_iter = 9;
    int channels = 32;
    bool spherical = true;
    MeasurementMode phi_mode = MeasurementMode::Trainable;

    double val_fraction = 0.1;  // used when no validation set is supplied
    int checkpoint_every = 0;   // epochs; 0 disables
    std::string checkpoint_path;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double loss_mse = 0.0;
    double loss_constraint = 0.0;
    double val_nmse_db = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    UnfoldingParams params;
    std::vector<EpochStats> history;
};

/// L_MSE = 1/(N_T * N) * sum_i ||xhat_i - x_i||^2 over rows of [N_T, N].
double loss_mse(const Tensor& targets, const Tensor& outputs);

/// L_constraint = 1/(N_T * N) * sum_i sum_k ||Ht(H(M(r_i^k))) - M(r_i^k)||^2.
/// Both vectors hold per-iteration batched tensors.
double loss_constraint(const std::vector<Tensor>& m_r, const std::vector<Tensor>& hh_m_r,
                       std::int64_t batch, std::int64_t n_vec);

/// Adam over L_total = L_MSE + gamma * L_constraint on shuffled
/// mini-batches. theta clamped nonnegative after each step.
/// Seed-deterministic. Aborts with a diagnostic when the loss goes
/// non-finite. Optionally continues from `resume_from` instead of a
/// fresh init.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg, std::ostream* log = nullptr,
                  const UnfoldingParams* resume_from = nullptr);

}  // namespace sptm
