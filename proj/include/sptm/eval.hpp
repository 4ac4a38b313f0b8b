#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sptm/augment.hpp"
#include "sptm/codec.hpp"

namespace sptm {

/// Mean over samples of ||H - Hhat||_F^2 / ||H||_F^2.
double nmse(const std::vector<Eigen::MatrixXcd>& targets,
            const std::vector<Eigen::MatrixXcd>& recovered);

/// 10*log10(linear), floored at -100 dB to keep reports finite.
double nmse_db(double linear);

/// Encode + decode the whole dataset with the given parameters; linear NMSE.
double evaluate_params(const UnfoldingParams& params, const Dataset& dataset);

/// Standard ISTA with fixed identity sparse transform:
///   r = x - step * Phi^T (Phi x - y); x = soft(r, step * lambda).
/// Convergence requires step <= 1 / ||Phi^T Phi||_2. `objective`, when
/// given, receives 0.5*||Phi x - y||^2 + lambda*||x||_1 per iteration.
Tensor classical_ista(const Tensor& y, const Tensor& phi, double lambda, int n_iter, double step,
                      std::vector<double>* objective = nullptr);

/// Rows of y_batch solved independently (same iteration count).
Tensor classical_ista_batch(const Tensor& y_batch, const Tensor& phi, double lambda, int n_iter,
                            double step);

/// Encoder cost at the UE. Convention: one multiply + one add = 2 FLOPs;
/// the norm costs 2N+1 (square, sum, root). Spherical mode uses M-1
/// measurement rows plus the power extraction.
std::int64_t encoder_flops(double cr, int n_vec, bool spherical);

/// FLOPs rounded to 0.1 million for reporting.
double flops_millions(std::int64_t flops);

struct ReportCell {
    std::string label;
    std::vector<std::pair<std::string, std::string>> fields;

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    const std::string* find(const std::string& key) const;
    double get_double(const std::string& key) const;
};

/// Per-cell key-value results with the config fingerprint they came from.
struct EvalReport {
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::vector<ReportCell> cells;

    std::string table() const;
    /// Machine-readable: one "cell <label> k=v k=v ..." record per line.
    void write_kv(const std::string& path) const;
    /// Two-column x/y export for external plotting.
    void write_plot_data(const std::string& path, const std::string& x_key,
                         const std::string& y_key) const;
};

/// Trains (or loads) a model for a dataset at a given CR.
using ModelFactory = std::function<UnfoldingParams(const Dataset& train, double cr)>;

EvalReport run_cr_sweep(const ModelFactory& factory, const Dataset& train, const Dataset& test,
                        const std::vector<double>& crs);

enum class AugStrategy { None, Ads, Pr, AdsPr };

std::string to_string(AugStrategy s);

/// For each (measured size, strategy): expand the first `size` samples of
/// the measured pool to `target_size`, train via the factory, report test
/// NMSE. Cells are self-seeded from the policy seed.
EvalReport run_augmentation_study(const ModelFactory& factory, const Dataset& measured_pool,
                                  const Dataset& test, const std::vector<int>& measured_sizes,
                                  const std::vector<AugStrategy>& strategies,
                                  const AugmentPolicy& base_policy, std::int64_t target_size,
                                  double cr);

}  // namespace sptm
