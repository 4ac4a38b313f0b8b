#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sptm/graph.hpp"
#include "sptm/transform.hpp"

namespace sptm {

enum class MeasurementMode : std::uint8_t { Trainable = 0, FixedRandomGaussian = 1 };

/// Real measurement matrix. In spherical mode it has (M-1) x N entries
/// (one feedback slot is reserved for the power scalar), otherwise M x N.
/// Fixed mode carries orthonormalized Gaussian rows.
struct MeasurementMatrix {
    Tensor phi;  // rows x N
    MeasurementMode mode = MeasurementMode::Trainable;
    std::uint64_t seed = 0;
};

/// Per-iteration trainable parameters. All convolutions are 3x3 and
/// bias-free; theta is clamped nonnegative after every optimizer step.
struct IterationParams {
    Tensor rho;        // scalar step size
    Tensor theta;      // scalar soft threshold, >= 0
    Tensor m_kernel;   // [C,1,3,3]
    Tensor h1_kernel;  // [C,C,3,3]
    Tensor h2_kernel;  // [C,C,3,3]
    Tensor ht1_kernel; // [C,C,3,3]
    Tensor ht2_kernel; // [C,C,3,3]
    Tensor b_kernel;   // [1,C,3,3]
};

/// All trainable parameters plus the dimensions they were built for.
struct UnfoldingParams {
    int r_delay = 0;
    int n_antennas = 0;
    int n_vec = 0;      // N = 2 * R_d * N_b
    int m_total = 0;    // feedback budget M (power slot included in spherical mode)
    int n_iter = 0;
    int channels = 0;
    bool spherical = true;
    MeasurementMatrix phi;
    std::vector<IterationParams> iters;

    int phi_rows() const { return spherical ? m_total - 1 : m_total; }
    void validate() const;
};

/// p plus the compressed measurements. p is 1 in non-spherical mode.
struct FeedbackVector {
    double power = 1.0;
    Tensor y;
};

struct CodecConfig {
    int r_delay = 32;
    int n_antennas = 32;
    double cr = 0.25;     // M = floor(N * cr)
    int n_iter = 9;
    int channels = 32;
    bool spherical = true;
    MeasurementMode phi_mode = MeasurementMode::Trainable;
    std::uint64_t seed = 1;
};

/// rho = 0.5, theta = 0.01, variance-scaled Gaussian conv weights,
/// Phi Gaussian scaled 1/sqrt(N) (rows orthonormalized in fixed mode).
UnfoldingParams init_params(const CodecConfig& cfg);

FeedbackVector encode(const CsiMatrix& h, const UnfoldingParams& params);

/// Graph-side handles for the decoder, used by training.
struct DecoderVars {
    Var phi;
    struct Iter {
        Var rho, theta, m_kernel, h1, h2, ht1, ht2, b_kernel;
    };
    std::vector<Iter> iters;

    Var x_final;            // [B, N]
    std::vector<Var> r;     // r^(k), [B, N]
    std::vector<Var> m_r;   // M^(k)(r^(k))
    std::vector<Var> hh;    // Ht^(k)(H^(k)(M^(k)(r^(k)))), only when with_constraint

    /// Every trainable leaf in optimizer order (excludes phi in fixed mode).
    std::vector<Var> trainable;
};

/// Register parameter leaves on a graph. trainable=false records them as
/// constants (inference).
DecoderVars register_params(Graph& g, const UnfoldingParams& params, bool trainable);

/// Append the unfolded decoder to the graph: x^(0) = Phi^T y, then n_iter
/// (r-step, x-step) pairs. y is a [B, phi_rows] node. with_constraint
/// additionally records the Ht(H(M(r))) branch for the constraint loss.
void build_decoder(Graph& g, Var y, DecoderVars& vars, const UnfoldingParams& params,
                   bool with_constraint);

/// One gradient step of Eq-style r-step: r = x - rho * Phi^T (Phi x - y).
/// Plain (non-graph) single-vector form.
Tensor r_step(const Tensor& x_prev, const Tensor& y, const Tensor& phi, double rho);

struct DecodeResult {
    CsiMatrix h_hat;
    std::vector<Tensor> r;    // r^(k) per iteration, length-N vectors
    std::vector<Tensor> m_r;  // M^(k)(r^(k))
};

DecodeResult decode(const FeedbackVector& fb, const UnfoldingParams& params);

/// Batched inference: rows of y_batch [B, phi_rows] -> rows of x [B, N]
/// (unscaled; multiply by per-sample power outside).
Tensor decode_batch(const Tensor& y_batch, const UnfoldingParams& params);

void save_params(const UnfoldingParams& params, const std::string& path);
UnfoldingParams load_params(const std::string& path);

}  // namespace sptm
