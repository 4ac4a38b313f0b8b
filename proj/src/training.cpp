#include "sptm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "sptm/eval.hpp"
#include "sptm/rng.hpp"

namespace sptm {

namespace {

struct AdamState {
    std::vector<Tensor> m, v;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init(const std::vector<Tensor*>& params) {
        for (const Tensor* p : params) {
            m.push_back(Tensor::zeros(p->shape()));
            v.push_back(Tensor::zeros(p->shape()));
        }
    }

    void update(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
        ++step;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& x = *params[i];
            const Tensor& g = grads[i];
            Tensor& mi = m[i];
            Tensor& vi = v[i];
            for (std::int64_t q = 0; q < x.size(); ++q) {
                mi[q] = beta1 * mi[q] + (1.0 - beta1) * g[q];
                vi[q] = beta2 * vi[q] + (1.0 - beta2) * g[q] * g[q];
                x[q] -= lr * (mi[q] / c1) / (std::sqrt(vi[q] / c2) + eps);
            }
        }
    }
};

/// Pointers to every trainable tensor in the same order register_params
/// hands them to the graph.
std::vector<Tensor*> trainable_tensors(UnfoldingParams& p) {
    std::vector<Tensor*> out;
    if (p.phi.mode == MeasurementMode::Trainable) out.push_back(&p.phi.phi);
    for (auto& it : p.iters) {
        out.push_back(&it.rho);
        out.push_back(&it.theta);
        out.push_back(&it.m_kernel);
        out.push_back(&it.h1_kernel);
        out.push_back(&it.h2_kernel);
        out.push_back(&it.ht1_kernel);
        out.push_back(&it.ht2_kernel);
        out.push_back(&it.b_kernel);
    }
    return out;
}

Tensor sample_vector(const Eigen::MatrixXcd& h, bool spherical, double* power) {
    CsiMatrix m;
    m.data = h;
    m.domain = Domain::AngularDelayTruncated;
    Tensor x = vectorize(m);
    double p = 1.0;
    if (spherical) {
        double norm = 0.0;
        for (std::int64_t i = 0; i < x.size(); ++i) norm += x[i] * x[i];
        norm = std::sqrt(norm);
        if (norm <= 0.0) throw std::domain_error("train: zero-power sample");
        for (std::int64_t i = 0; i < x.size(); ++i) x[i] /= norm;
        p = norm;
    }
    if (power) *power = p;
    return x;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = rng.uniform_index(i);
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("train config: epochs and batch_size must be >= 1");
    if (gamma < 0.0) throw std::invalid_argument("train config: gamma must be >= 0");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw std::invalid_argument("train config: bad val_fraction");
}

double loss_mse(const Tensor& targets, const Tensor& outputs) {
    if (!targets.same_shape(outputs)) throw std::invalid_argument("loss_mse: shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < targets.size(); ++i) {
        double d = outputs[i] - targets[i];
        acc += d * d;
    }
    return acc / (static_cast<double>(targets.dim(0)) * targets.dim(1));
}

double loss_constraint(const std::vector<Tensor>& m_r, const std::vector<Tensor>& hh_m_r,
                       std::int64_t batch, std::int64_t n_vec) {
    if (m_r.size() != hh_m_r.size()) throw std::invalid_argument("loss_constraint: missing intermediates");
    double acc = 0.0;
    for (std::size_t k = 0; k < m_r.size(); ++k) {
        if (!m_r[k].same_shape(hh_m_r[k])) throw std::invalid_argument("loss_constraint: shape mismatch");
        for (std::int64_t i = 0; i < m_r[k].size(); ++i) {
            double d = hh_m_r[k][i] - m_r[k][i];
            acc += d * d;
        }
    }
    return acc / (static_cast<double>(batch) * static_cast<double>(n_vec));
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, std::ostream* log,
                  const UnfoldingParams* resume_from) {
    cfg.validate();
    dataset.validate();
    if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");

    UnfoldingParams params;
    if (resume_from) {
        params = *resume_from;
        params.validate();
    } else {
        CodecConfig cc;
        cc.r_delay = dataset.r_delay;
        cc.n_antennas = dataset.n_antennas;
        cc.cr = cfg.cr;
        cc.n_iter = cfg.n_iter;
        cc.channels = cfg.channels;
        cc.spherical = cfg.spherical;
        cc.phi_mode = cfg.phi_mode;
        cc.seed = cfg.seed;
        params = init_params(cc);
    }
    const int n_vec = params.n_vec;

    // validation split: deterministic shuffle, last fraction held out
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(Rng::derive(cfg.seed, 0xfeedULL));
    shuffle_indices(order, split_rng);
    std::size_t val_n = static_cast<std::size_t>(static_cast<double>(dataset.size()) * cfg.val_fraction);
    if (val_n >= dataset.size()) val_n = dataset.size() - 1;
    std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(val_n));
    std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(val_n), order.end());

    Dataset val_set;
    val_set.r_delay = dataset.r_delay;
    val_set.n_antennas = dataset.n_antennas;
    val_set.seed = dataset.seed;
    for (std::size_t i : val_idx) {
        val_set.samples.push_back(dataset.samples[i]);
        val_set.provenance.push_back(dataset.provenance[i]);
    }

    std::vector<Tensor*> ptensors = trainable_tensors(params);
    AdamState adam;
    adam.init(ptensors);

    TrainResult result;
    bool with_constraint = cfg.gamma > 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        Rng epoch_rng(Rng::derive(cfg.seed, 0x5357ULL + static_cast<std::uint64_t>(epoch)));
        shuffle_indices(train_idx, epoch_rng);

        double mse_sum = 0.0, constraint_sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size), train_idx.size() - start);
            Tensor xt({static_cast<int>(bsz), n_vec});
            for (std::size_t b = 0; b < bsz; ++b) {
                Tensor x = sample_vector(dataset.samples[train_idx[start + b]], params.spherical, nullptr);
                std::copy(x.data(), x.data() + n_vec, xt.data() + static_cast<std::int64_t>(b) * n_vec);
            }

            Graph g;
            DecoderVars vars = register_params(g, params, true);
            Var target = g.input(xt);
            Var y = g.matmul(target, vars.phi, false, true);
            build_decoder(g, y, vars, params, with_constraint);

            double inv_bn = 1.0 / (static_cast<double>(bsz) * n_vec);
            Var mse = g.mul_const(g.sum_squares(g.sub(vars.x_final, target)), inv_bn);
            Var total = mse;
            double lc_value = 0.0;
            if (with_constraint) {
                Var lc = g.sum_squares(g.sub(vars.hh[0], vars.m_r[0]));
                for (int k = 1; k < params.n_iter; ++k) {
                    lc = g.add(lc, g.sum_squares(g.sub(vars.hh[static_cast<std::size_t>(k)],
                                                       vars.m_r[static_cast<std::size_t>(k)])));
                }
                lc_value = g.value(lc)[0] * inv_bn;
                total = g.add(mse, g.mul_const(lc, cfg.gamma * inv_bn));
            }

            double mse_value = g.value(mse)[0];
            if (!std::isfinite(g.value(total)[0])) {
                throw std::runtime_error("train: loss went non-finite at epoch " + std::to_string(epoch) +
                                         " (diverged; lower the learning rate)");
            }
            mse_sum += mse_value * static_cast<double>(bsz) * n_vec;
            constraint_sum += lc_value * static_cast<double>(bsz) * n_vec;

            g.backward(total);
            std::vector<Tensor> grads;
            grads.reserve(vars.trainable.size());
            for (Var v : vars.trainable) grads.push_back(g.grad(v));
            if (grads.size() != ptensors.size()) throw std::logic_error("train: parameter bookkeeping mismatch");
            adam.update(ptensors, grads, cfg.learning_rate);
            for (auto& it : params.iters) {
                if (it.theta[0] < 0.0) it.theta[0] = 0.0;
            }
        }

        EpochStats st;
        st.epoch = epoch;
        double denom = static_cast<double>(train_idx.size()) * n_vec;
        st.loss_mse = mse_sum / denom;
        st.loss_constraint = constraint_sum / denom;
        st.val_nmse_db = val_set.size() > 0 ? nmse_db(evaluate_params(params, val_set)) : 0.0;
        st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(st);

        if (log) {
            (*log) << "epoch " << epoch << " L_mse " << st.loss_mse
                   << " L_constraint " << st.loss_constraint
                   << " val_nmse_db " << st.val_nmse_db
                   << " wall_s " << st.wall_seconds << "\n";
            log->flush();
        }
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            (epoch + 1) % cfg.checkpoint_every == 0) {
            save_params(params, cfg.checkpoint_path);
        }
    }

    result.params = std::move(params);
    return result;
}

}  // namespace sptm
