#include "sptm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sptm {

namespace {

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> map2d(const Tensor& t) {
    return Eigen::Map<const RowMat>(t.data(), t.dim(0), t.dim(1));
}

}  // namespace

double nmse(const std::vector<Eigen::MatrixXcd>& targets,
            const std::vector<Eigen::MatrixXcd>& recovered) {
    if (targets.size() != recovered.size() || targets.empty()) {
        throw std::invalid_argument("nmse: sample counts differ or are zero");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        double denom = targets[i].squaredNorm();
        if (denom <= 0.0) throw std::domain_error("nmse: zero-norm target sample");
        acc += (targets[i] - recovered[i]).squaredNorm() / denom;
    }
    return acc / static_cast<double>(targets.size());
}

double nmse_db(double linear) {
    if (linear < 0.0) throw std::invalid_argument("nmse_db: negative NMSE");
    double db = 10.0 * std::log10(linear);
    return std::max(db, -100.0);
}

double evaluate_params(const UnfoldingParams& params, const Dataset& dataset) {
    params.validate();
    dataset.validate();
    if (dataset.size() == 0) throw std::invalid_argument("evaluate_params: empty dataset");
    if (dataset.r_delay != params.r_delay || dataset.n_antennas != params.n_antennas) {
        throw std::invalid_argument("evaluate_params: dataset dims do not match params");
    }
    const int n_vec = params.n_vec;
    const int rows = params.phi_rows();
    const std::size_t chunk = 256;

    double acc = 0.0;
    for (std::size_t start = 0; start < dataset.size(); start += chunk) {
        std::size_t bsz = std::min(chunk, dataset.size() - start);
        Tensor xt({static_cast<int>(bsz), n_vec});
        std::vector<double> powers(bsz, 1.0);
        for (std::size_t b = 0; b < bsz; ++b) {
            CsiMatrix m;
            m.data = dataset.samples[start + b];
            m.domain = Domain::AngularDelayTruncated;
            Tensor x = vectorize(m);
            if (params.spherical) {
                double norm = 0.0;
                for (int i = 0; i < n_vec; ++i) norm += x[i] * x[i];
                norm = std::sqrt(norm);
                if (norm <= 0.0) throw std::domain_error("evaluate_params: zero-norm sample");
                for (int i = 0; i < n_vec; ++i) x[i] /= norm;
                powers[b] = norm;
            }
            std::copy(x.data(), x.data() + n_vec, xt.data() + static_cast<std::int64_t>(b) * n_vec);
        }
        Tensor yb({static_cast<int>(bsz), rows});
        Eigen::Map<RowMat>(yb.data(), yb.dim(0), yb.dim(1)).noalias() =
            map2d(xt) * map2d(params.phi.phi).transpose();
        Tensor xhat = decode_batch(yb, params);
        for (std::size_t b = 0; b < bsz; ++b) {
            const double* t = xt.data() + static_cast<std::int64_t>(b) * n_vec;
            const double* h = xhat.data() + static_cast<std::int64_t>(b) * n_vec;
            double err = 0.0, denom = 0.0;
            // powers cancel in the ratio; compare in the normalized frame
            for (int i = 0; i < n_vec; ++i) {
                double d = h[i] - t[i];
                err += d * d;
                denom += t[i] * t[i];
            }
            if (denom <= 0.0) throw std::domain_error("evaluate_params: zero-norm sample");
            acc += err / denom;
        }
    }
    return acc / static_cast<double>(dataset.size());
}

Tensor classical_ista(const Tensor& y, const Tensor& phi, double lambda, int n_iter, double step,
                      std::vector<double>* objective) {
    Tensor yb({1, phi.dim(0)});
    std::copy(y.data(), y.data() + y.size(), yb.data());
    int n = phi.dim(1);

    // batched path does the work; recompute the objective here if asked
    if (!objective) {
        Tensor xb = classical_ista_batch(yb, phi, lambda, n_iter, step);
        Tensor x({n});
        std::copy(xb.data(), xb.data() + n, x.data());
        return x;
    }

    Tensor x({n});
    auto P = map2d(phi);
    Eigen::VectorXd xv = Eigen::VectorXd::Zero(n);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), y.size());
    for (int it = 0; it < n_iter; ++it) {
        Eigen::VectorXd resid = P * xv - yv;
        Eigen::VectorXd r = xv - step * (P.transpose() * resid);
        double th = step * lambda;
        for (int i = 0; i < n; ++i) {
            double a = std::abs(r[i]) - th;
            xv[i] = a > 0.0 ? (r[i] > 0.0 ? a : -a) : 0.0;
        }
        double obj = 0.5 * (P * xv - yv).squaredNorm() + lambda * xv.lpNorm<1>();
        objective->push_back(obj);
    }
    std::copy(xv.data(), xv.data() + n, x.data());
    return x;
}

Tensor classical_ista_batch(const Tensor& y_batch, const Tensor& phi, double lambda, int n_iter,
                            double step) {
    if (phi.rank() != 2 || y_batch.rank() != 2 || y_batch.dim(1) != phi.dim(0)) {
        throw std::invalid_argument("classical_ista: shape mismatch");
    }
    int b = y_batch.dim(0);
    int n = phi.dim(1);
    Tensor x({b, n});
    auto P = map2d(phi);
    auto Y = map2d(y_batch);
    Eigen::Map<RowMat> X(x.data(), b, n);
    RowMat resid(b, phi.dim(0)), r(b, n);
    double th = step * lambda;
    for (int it = 0; it < n_iter; ++it) {
        resid.noalias() = X * P.transpose();
        resid -= Y;
        r = X;
        r.noalias() -= step * (resid * P);
        for (std::int64_t i = 0; i < r.size(); ++i) {
            double v = r.data()[i];
            double a = std::abs(v) - th;
            X.data()[i] = a > 0.0 ? (v > 0.0 ? a : -a) : 0.0;
        }
    }
    return x;
}

std::int64_t encoder_flops(double cr, int n_vec, bool spherical) {
    std::int64_t m = static_cast<std::int64_t>(std::floor(n_vec * cr));
    if (m < 2) throw std::invalid_argument("encoder_flops: N*CR must be >= 2");
    std::int64_t n = n_vec;
    if (spherical) return 2 * (m - 1) * n + (2 * n + 1);
    return 2 * m * n;
}

double flops_millions(std::int64_t flops) {
    return std::round(static_cast<double>(flops) / 1e5) / 10.0;
}

void ReportCell::set(const std::string& key, const std::string& value) {
    fields.emplace_back(key, value);
}

void ReportCell::set(const std::string& key, double value) { set(key, fmt_full(value)); }

const std::string* ReportCell::find(const std::string& key) const {
    for (const auto& [k, v] : fields) {
        if (k == key) return &v;
    }
    return nullptr;
}

double ReportCell::get_double(const std::string& key) const {
    const std::string* s = find(key);
    if (!s) throw std::out_of_range("report cell has no field " + key);
    return std::stod(*s);
}

std::string EvalReport::table() const {
    std::ostringstream os;
    os << "# fingerprint " << fingerprint << " seed " << seed << "\n";
    for (const auto& cell : cells) {
        os << cell.label << ":";
        for (const auto& [k, v] : cell.fields) os << "  " << k << "=" << v;
        os << "\n";
    }
    return os.str();
}

void EvalReport::write_kv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("report: cannot open " + path);
    os << "fingerprint " << fingerprint << "\n";
    os << "seed " << seed << "\n";
    for (const auto& cell : cells) {
        os << "cell " << cell.label;
        for (const auto& [k, v] : cell.fields) os << " " << k << "=" << v;
        os << "\n";
    }
    if (!os) throw std::runtime_error("report: write failed for " + path);
}

void EvalReport::write_plot_data(const std::string& path, const std::string& x_key,
                                 const std::string& y_key) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("report: cannot open " + path);
    os << "# " << x_key << " " << y_key << "\n";
    for (const auto& cell : cells) {
        const std::string* x = cell.find(x_key);
        const std::string* y = cell.find(y_key);
        if (x && y) os << *x << " " << *y << "\n";
    }
}

EvalReport run_cr_sweep(const ModelFactory& factory, const Dataset& train, const Dataset& test,
                        const std::vector<double>& crs) {
    EvalReport report;
    for (double cr : crs) {
        UnfoldingParams params = factory(train, cr);
        double lin = evaluate_params(params, test);
        ReportCell cell;
        std::ostringstream label;
        label << "cr_" << cr;
        cell.label = label.str();
        cell.set("cr", cr);
        cell.set("nmse", lin);
        cell.set("nmse_db", nmse_db(lin));
        cell.set("encoder_flops",
                 static_cast<double>(encoder_flops(cr, params.n_vec, params.spherical)));
        cell.set("encoder_mflops", flops_millions(encoder_flops(cr, params.n_vec, params.spherical)));
        report.cells.push_back(std::move(cell));
    }
    return report;
}

std::string to_string(AugStrategy s) {
    switch (s) {
        case AugStrategy::None: return "none";
        case AugStrategy::Ads: return "ads";
        case AugStrategy::Pr: return "pr";
        case AugStrategy::AdsPr: return "ads_pr";
    }
    return "?";
}

EvalReport run_augmentation_study(const ModelFactory& factory, const Dataset& measured_pool,
                                  const Dataset& test, const std::vector<int>& measured_sizes,
                                  const std::vector<AugStrategy>& strategies,
                                  const AugmentPolicy& base_policy, std::int64_t target_size,
                                  double cr) {
    EvalReport report;
    for (int size : measured_sizes) {
        if (size < 1 || static_cast<std::size_t>(size) > measured_pool.size()) {
            throw std::invalid_argument("augmentation study: measured size exceeds pool");
        }
        Dataset measured;
        measured.r_delay = measured_pool.r_delay;
        measured.n_antennas = measured_pool.n_antennas;
        measured.seed = measured_pool.seed;
        measured.samples.assign(measured_pool.samples.begin(), measured_pool.samples.begin() + size);
        measured.provenance.assign(measured_pool.provenance.begin(),
                                   measured_pool.provenance.begin() + size);
        for (AugStrategy strat : strategies) {
            AugmentPolicy policy = base_policy;
            policy.use_ads = strat == AugStrategy::Ads || strat == AugStrategy::AdsPr;
            policy.use_pr = strat == AugStrategy::Pr || strat == AugStrategy::AdsPr;
            policy.target_size = target_size;
            policy.rng_seed = Rng::derive(base_policy.rng_seed,
                                          static_cast<std::uint64_t>(size) * 17 +
                                              static_cast<std::uint64_t>(strat));
            Dataset train = build_augmented_dataset(measured, policy);
            UnfoldingParams params = factory(train, cr);
            double lin = evaluate_params(params, test);
            ReportCell cell;
            cell.label = "n" + std::to_string(size) + "_" + to_string(strat);
            cell.set("measured", static_cast<double>(size));
            cell.set("strategy", to_string(strat));
            cell.set("nmse", lin);
            cell.set("nmse_db", nmse_db(lin));
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

}  // namespace sptm
