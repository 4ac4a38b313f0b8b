#include "sptm/codec.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sptm/rng.hpp"

namespace sptm {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'T', 'M'};
constexpr std::uint32_t kVersion = 1;

Tensor gaussian_tensor(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.gaussian();
    return t;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
    return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is, std::vector<int> shape, const char* what) {
    Tensor t(std::move(shape));
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
    return t;
}

}  // namespace

void UnfoldingParams::validate() const {
    if (n_iter < 1) throw std::invalid_argument("params: n_iter must be >= 1");
    if (n_vec != 2 * r_delay * n_antennas) throw std::invalid_argument("params: N != 2*R_d*N_b");
    if (m_total < (spherical ? 2 : 1)) throw std::invalid_argument("params: feedback budget too small");
    if (phi.phi.rank() != 2 || phi.phi.dim(0) != phi_rows() || phi.phi.dim(1) != n_vec) {
        throw std::invalid_argument("params: measurement matrix shape mismatch");
    }
    if (static_cast<int>(iters.size()) != n_iter) {
        throw std::invalid_argument("params: iteration count mismatch");
    }
    for (const auto& it : iters) {
        if (it.theta.size() != 1 || it.theta[0] < 0.0) {
            throw std::invalid_argument("params: theta must be a nonnegative scalar");
        }
        if (it.m_kernel.dim(0) != channels || it.h1_kernel.dim(0) != channels ||
            it.b_kernel.dim(1) != channels) {
            throw std::invalid_argument("params: kernel channel count mismatch");
        }
    }
}

UnfoldingParams init_params(const CodecConfig& cfg) {
    if (cfg.r_delay < 1 || cfg.n_antennas < 1 || cfg.n_iter < 1 || cfg.channels < 1) {
        throw std::invalid_argument("init_params: invalid dimensions");
    }
    UnfoldingParams p;
    p.r_delay = cfg.r_delay;
    p.n_antennas = cfg.n_antennas;
    p.n_vec = 2 * cfg.r_delay * cfg.n_antennas;
    p.m_total = static_cast<int>(std::floor(p.n_vec * cfg.cr));
    p.n_iter = cfg.n_iter;
    p.channels = cfg.channels;
    p.spherical = cfg.spherical;
    p.phi.mode = cfg.phi_mode;
    p.phi.seed = cfg.seed;

    Rng rng(cfg.seed);
    int rows = p.phi_rows();
    if (rows < 1) throw std::invalid_argument("init_params: compression ratio leaves no measurements");
    p.phi.phi = gaussian_tensor({rows, p.n_vec}, 1.0 / std::sqrt(static_cast<double>(p.n_vec)), rng);
    if (cfg.phi_mode == MeasurementMode::FixedRandomGaussian) {
        // orthonormal rows: thin QR of Phi^T, Phi = Q^T
        Eigen::MatrixXd phit(p.n_vec, rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < p.n_vec; ++c) phit(c, r) = p.phi.phi.at(r, c);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(phit);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p.n_vec, rows);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < p.n_vec; ++c) p.phi.phi.at(r, c) = q(c, r);
    }

    int c = cfg.channels;
    auto conv_init = [&](int cout, int cin) {
        double stddev = std::sqrt(2.0 / (cin * 9.0));
        return gaussian_tensor({cout, cin, 3, 3}, stddev, rng);
    };
    for (int k = 0; k < cfg.n_iter; ++k) {
        IterationParams it;
        it.rho = Tensor::scalar(0.5);
        it.theta = Tensor::scalar(0.01);
        it.m_kernel = conv_init(c, 1);
        it.h1_kernel = conv_init(c, c);
        it.h2_kernel = conv_init(c, c);
        it.ht1_kernel = conv_init(c, c);
        it.ht2_kernel = conv_init(c, c);
        it.b_kernel = conv_init(1, c);
        p.iters.push_back(std::move(it));
    }
    p.validate();
    return p;
}

FeedbackVector encode(const CsiMatrix& h, const UnfoldingParams& params) {
    params.validate();
    FeedbackVector fb;
    Tensor x;
    if (params.spherical) {
        SphericalCsi s = spherical_split(h);  // rejects the zero matrix
        fb.power = s.power;
        CsiMatrix unit;
        unit.data = std::move(s.direction);
        unit.domain = Domain::AngularDelayTruncated;
        x = vectorize(unit);
    } else {
        fb.power = 1.0;
        x = vectorize(h);
    }
    if (x.size() != params.n_vec) throw std::invalid_argument("encode: CSI dims do not match params");
    int rows = params.phi_rows();
    fb.y = Tensor({rows});
    const Tensor& phi = params.phi.phi;
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* pr = phi.data() + static_cast<std::int64_t>(r) * params.n_vec;
        for (int c = 0; c < params.n_vec; ++c) acc += pr[c] * x[c];
        fb.y[r] = acc;
    }
    return fb;
}

DecoderVars register_params(Graph& g, const UnfoldingParams& params, bool trainable) {
    params.validate();
    DecoderVars v;
    bool phi_trainable = trainable && params.phi.mode == MeasurementMode::Trainable;
    v.phi = phi_trainable ? g.param(params.phi.phi) : g.input(params.phi.phi);
    if (phi_trainable) v.trainable.push_back(v.phi);
    for (const auto& it : params.iters) {
        DecoderVars::Iter iv;
        auto reg = [&](const Tensor& t) {
            Var var = trainable ? g.param(t) : g.input(t);
            if (trainable) v.trainable.push_back(var);
            return var;
        };
        iv.rho = reg(it.rho);
        iv.theta = reg(it.theta);
        iv.m_kernel = reg(it.m_kernel);
        iv.h1 = reg(it.h1_kernel);
        iv.h2 = reg(it.h2_kernel);
        iv.ht1 = reg(it.ht1_kernel);
        iv.ht2 = reg(it.ht2_kernel);
        iv.b_kernel = reg(it.b_kernel);
        v.iters.push_back(iv);
    }
    return v;
}

void build_decoder(Graph& g, Var y, DecoderVars& vars, const UnfoldingParams& params,
                   bool with_constraint) {
    int batch = g.value(y).dim(0);
    if (g.value(y).dim(1) != params.phi_rows()) {
        throw std::invalid_argument("build_decoder: feedback dimension mismatch");
    }
    // x^(0) = Phi^T y per sample; batched over rows
    Var x = g.matmul(y, vars.phi);
    std::vector<int> img_shape{batch, 1, 2 * params.r_delay, params.n_antennas};
    for (int k = 0; k < params.n_iter; ++k) {
        const auto& it = vars.iters[static_cast<std::size_t>(k)];
        // r = x - rho * (x Phi^T - y) Phi
        Var resid = g.sub(g.matmul(x, vars.phi, false, true), y);
        Var r = g.sub(x, g.scale(g.matmul(resid, vars.phi), it.rho));
        vars.r.push_back(r);

        Var rimg = g.reshape(r, img_shape);
        Var mr = g.conv2d(rimg, it.m_kernel);
        vars.m_r.push_back(mr);
        Var h = g.conv2d(g.relu(g.conv2d(mr, it.h1)), it.h2);
        Var s = g.soft_threshold(h, it.theta);
        Var ht = g.conv2d(g.relu(g.conv2d(s, it.ht1)), it.ht2);
        Var w = g.conv2d(ht, it.b_kernel);
        x = g.add(r, g.reshape(w, {batch, params.n_vec}));

        if (with_constraint) {
            Var hh = g.conv2d(g.relu(g.conv2d(h, it.ht1)), it.ht2);
            vars.hh.push_back(hh);
        }
    }
    vars.x_final = x;
}

Tensor r_step(const Tensor& x_prev, const Tensor& y, const Tensor& phi, double rho) {
    if (phi.rank() != 2 || x_prev.size() != phi.dim(1) || y.size() != phi.dim(0)) {
        throw std::invalid_argument("r_step: shape mismatch");
    }
    int rows = phi.dim(0);
    int n = phi.dim(1);
    std::vector<double> resid(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double* pr = phi.data() + static_cast<std::int64_t>(r) * n;
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += pr[c] * x_prev[c];
        resid[static_cast<std::size_t>(r)] = acc - y[r];
    }
    Tensor out = x_prev;
    for (int r = 0; r < rows; ++r) {
        const double* pr = phi.data() + static_cast<std::int64_t>(r) * n;
        double rv = rho * resid[static_cast<std::size_t>(r)];
        for (int c = 0; c < n; ++c) out[c] -= rv * pr[c];
    }
    return out;
}

Tensor decode_batch(const Tensor& y_batch, const UnfoldingParams& params) {
    Graph g;
    DecoderVars vars = register_params(g, params, false);
    Var y = g.input(y_batch);
    build_decoder(g, y, vars, params, false);
    return g.value(vars.x_final);
}

DecodeResult decode(const FeedbackVector& fb, const UnfoldingParams& params) {
    params.validate();
    if (fb.y.size() != params.phi_rows()) {
        throw std::invalid_argument("decode: feedback dimension does not match params");
    }
    Graph g;
    DecoderVars vars = register_params(g, params, false);
    Tensor yb({1, params.phi_rows()});
    std::memcpy(yb.data(), fb.y.data(), sizeof(double) * static_cast<std::size_t>(fb.y.size()));
    Var y = g.input(yb);
    build_decoder(g, y, vars, params, false);

    DecodeResult res;
    Tensor x = g.value(vars.x_final);
    Tensor xv({params.n_vec});
    for (int i = 0; i < params.n_vec; ++i) xv[i] = fb.power * x[i];
    res.h_hat = devectorize(xv, params.r_delay, params.n_antennas);
    for (std::size_t k = 0; k < vars.r.size(); ++k) {
        Tensor rk = g.value(vars.r[k]);
        res.r.push_back(Tensor({params.n_vec},
                               std::vector<double>(rk.data(), rk.data() + rk.size())));
        res.m_r.push_back(g.value(vars.m_r[k]));
    }
    return res;
}

void save_params(const UnfoldingParams& params, const std::string& path) {
    params.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_params: cannot open " + path);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint32_t>(params.n_vec));
    write_pod(os, static_cast<std::uint32_t>(params.m_total));
    write_pod(os, static_cast<std::uint32_t>(params.n_iter));
    write_pod(os, static_cast<std::uint32_t>(params.channels));
    write_pod(os, static_cast<std::uint8_t>(params.spherical ? 1 : 0));
    write_pod(os, static_cast<std::uint32_t>(params.r_delay));
    write_pod(os, static_cast<std::uint32_t>(params.n_antennas));
    write_pod(os, static_cast<std::uint8_t>(params.phi.mode));
    write_pod(os, params.phi.seed);
    write_tensor(os, params.phi.phi);
    for (const auto& it : params.iters) {
        write_tensor(os, it.rho);
        write_tensor(os, it.theta);
        write_tensor(os, it.m_kernel);
        write_tensor(os, it.h1_kernel);
        write_tensor(os, it.h2_kernel);
        write_tensor(os, it.ht1_kernel);
        write_tensor(os, it.ht2_kernel);
        write_tensor(os, it.b_kernel);
    }
    if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

UnfoldingParams load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_params: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_params: bad magic, not a checkpoint file");
    }
    if (read_pod<std::uint32_t>(is, "version") != kVersion) {
        throw std::runtime_error("load_params: unsupported version");
    }
    UnfoldingParams p;
    p.n_vec = static_cast<int>(read_pod<std::uint32_t>(is, "N"));
    p.m_total = static_cast<int>(read_pod<std::uint32_t>(is, "M"));
    p.n_iter = static_cast<int>(read_pod<std::uint32_t>(is, "N_I"));
    p.channels = static_cast<int>(read_pod<std::uint32_t>(is, "C"));
    p.spherical = read_pod<std::uint8_t>(is, "spherical flag") != 0;
    p.r_delay = static_cast<int>(read_pod<std::uint32_t>(is, "R_d"));
    p.n_antennas = static_cast<int>(read_pod<std::uint32_t>(is, "N_b"));
    p.phi.mode = static_cast<MeasurementMode>(read_pod<std::uint8_t>(is, "phi mode"));
    p.phi.seed = read_pod<std::uint64_t>(is, "phi seed");
    p.phi.phi = read_tensor(is, {p.phi_rows(), p.n_vec}, "phi");
    int c = p.channels;
    for (int k = 0; k < p.n_iter; ++k) {
        IterationParams it;
        it.rho = read_tensor(is, {1}, "rho");
        it.theta = read_tensor(is, {1}, "theta");
        it.m_kernel = read_tensor(is, {c, 1, 3, 3}, "M kernel");
        it.h1_kernel = read_tensor(is, {c, c, 3, 3}, "H kernel 1");
        it.h2_kernel = read_tensor(is, {c, c, 3, 3}, "H kernel 2");
        it.ht1_kernel = read_tensor(is, {c, c, 3, 3}, "Ht kernel 1");
        it.ht2_kernel = read_tensor(is, {c, c, 3, 3}, "Ht kernel 2");
        it.b_kernel = read_tensor(is, {1, c, 3, 3}, "B kernel");
        p.iters.push_back(std::move(it));
    }
    p.validate();
    return p;
}

}  // namespace sptm
