#include "sptm/channel.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sptm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr char kMagic[4] = {'C', 'S', 'I', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error(std::string("dataset file truncated while reading ") + what);
    return v;
}

/// Phase ramp e^{j*step*m} for m = 0..n-1, computed by recurrence.
void phase_ramp(double step, int n, std::vector<std::complex<double>>& out) {
    out.resize(static_cast<std::size_t>(n));
    std::complex<double> w(std::cos(step), std::sin(step));
    std::complex<double> cur(1.0, 0.0);
    for (int m = 0; m < n; ++m) {
        out[static_cast<std::size_t>(m)] = cur;
        cur *= w;
    }
}

}  // namespace

void ChannelScenarioConfig::validate() const {
    if (n_antennas < 1 || n_subcarriers < 1) {
        throw std::invalid_argument("scenario: n_antennas and n_subcarriers must be >= 1");
    }
    if (n_paths_min < 1 || n_paths_max < n_paths_min) {
        throw std::invalid_argument("scenario: invalid path count range");
    }
    if (r_delay < 1 || r_delay > n_subcarriers) {
        throw std::invalid_argument("scenario: r_delay out of range");
    }
    if (delay_spread_max_s < 0.0 || bandwidth_hz <= 0.0) {
        throw std::invalid_argument("scenario: invalid delay spread or bandwidth");
    }
    // delay bin of a path at tau is tau * bandwidth; truncation keeps the
    // first r_delay bins
    if (delay_spread_max_s * bandwidth_hz > static_cast<double>(r_delay)) {
        throw std::invalid_argument("scenario: delay_spread_max maps beyond the first R_d delay bins");
    }
}

void Dataset::validate() const {
    if (provenance.size() != samples.size()) {
        throw std::invalid_argument("dataset: provenance/sample count mismatch");
    }
    for (const auto& s : samples) {
        if (s.rows() != r_delay || s.cols() != n_antennas) {
            throw std::invalid_argument("dataset: sample dimensions disagree with header");
        }
        if (s.norm() == 0.0) throw std::invalid_argument("dataset: identically zero sample");
    }
}

Eigen::MatrixXcd quantize_storage(const Eigen::MatrixXcd& m) {
    Eigen::MatrixXcd out(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        out.data()[i] = std::complex<double>(static_cast<float>(m.data()[i].real()),
                                             static_cast<float>(m.data()[i].imag()));
    }
    return out;
}

CsiMatrix generate_sample(const ChannelScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    int np = static_cast<int>(rng.uniform_int(cfg.n_paths_min, cfg.n_paths_max));
    double df = cfg.bandwidth_hz / cfg.n_subcarriers;

    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(cfg.n_subcarriers, cfg.n_antennas);
    std::vector<std::complex<double>> u, v;
    for (int p = 0; p < np; ++p) {
        std::complex<double> gain(rng.gaussian(), rng.gaussian());
        gain /= std::sqrt(2.0);
        double tau = rng.uniform(0.0, cfg.delay_spread_max_s);
        double phi = rng.uniform(-cfg.angle_range_rad, cfg.angle_range_rad);
        phase_ramp(-2.0 * kPi * df * tau, cfg.n_subcarriers, u);
        phase_ramp(-kPi * std::sin(phi), cfg.n_antennas, v);
        for (int b = 0; b < cfg.n_antennas; ++b) {
            std::complex<double> gb = gain * v[static_cast<std::size_t>(b)];
            for (int m = 0; m < cfg.n_subcarriers; ++m) {
                h(m, b) += gb * u[static_cast<std::size_t>(m)];
            }
        }
    }

    double power_db = rng.uniform(-0.5 * cfg.path_loss_spread_db, 0.5 * cfg.path_loss_spread_db);
    double norm = h.norm();
    if (norm == 0.0) throw std::runtime_error("generate_sample: degenerate zero draw");
    h *= std::pow(10.0, power_db / 20.0) / norm;

    CsiMatrix out;
    out.data = std::move(h);
    out.domain = Domain::SpatialFrequency;
    return out;
}

Dataset generate_dataset(const ChannelScenarioConfig& cfg, std::int64_t n_samples) {
    cfg.validate();
    if (n_samples < 0) throw std::invalid_argument("generate_dataset: negative sample count");
    Dataset ds;
    ds.r_delay = cfg.r_delay;
    ds.n_antennas = cfg.n_antennas;
    ds.seed = cfg.rng_seed;
    ds.samples.reserve(static_cast<std::size_t>(n_samples));
    for (std::int64_t i = 0; i < n_samples; ++i) {
        Rng rng(Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(i)));
        CsiMatrix sf = generate_sample(cfg, rng);
        CsiMatrix tr = truncate_delay(sf_to_ad(sf), cfg.r_delay);
        ds.samples.push_back(quantize_storage(tr.data));
        ds.provenance.push_back(Provenance::Measured);
    }
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint32_t>(ds.r_delay));
    write_pod(os, static_cast<std::uint32_t>(ds.n_antennas));
    write_pod(os, static_cast<std::uint64_t>(ds.size()));
    write_pod(os, ds.seed);
    std::vector<float> buf(static_cast<std::size_t>(ds.r_delay) * ds.n_antennas * 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& m = ds.samples[i];
        std::size_t k = 0;
        for (int r = 0; r < ds.r_delay; ++r) {
            for (int c = 0; c < ds.n_antennas; ++c) {
                buf[k++] = static_cast<float>(m(r, c).real());
                buf[k++] = static_cast<float>(m(r, c).imag());
            }
        }
        os.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
        write_pod(os, static_cast<std::uint8_t>(ds.provenance[i]));
    }
    if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_dataset: bad magic, not a dataset file");
    }
    auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kVersion) throw std::runtime_error("load_dataset: unsupported version");
    Dataset ds;
    ds.r_delay = static_cast<int>(read_pod<std::uint32_t>(is, "r_delay"));
    ds.n_antennas = static_cast<int>(read_pod<std::uint32_t>(is, "n_antennas"));
    auto n = read_pod<std::uint64_t>(is, "sample count");
    ds.seed = read_pod<std::uint64_t>(is, "seed");
    if (ds.r_delay < 1 || ds.n_antennas < 1) {
        throw std::runtime_error("load_dataset: invalid dimensions in header");
    }
    std::vector<float> buf(static_cast<std::size_t>(ds.r_delay) * ds.n_antennas * 2);
    ds.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!is) throw std::runtime_error("load_dataset: payload shorter than header promises");
        Eigen::MatrixXcd m(ds.r_delay, ds.n_antennas);
        std::size_t k = 0;
        for (int r = 0; r < ds.r_delay; ++r) {
            for (int c = 0; c < ds.n_antennas; ++c) {
                double re = buf[k++];
                double im = buf[k++];
                m(r, c) = std::complex<double>(re, im);
            }
        }
        ds.samples.push_back(std::move(m));
        ds.provenance.push_back(static_cast<Provenance>(read_pod<std::uint8_t>(is, "provenance")));
    }
    // trailing garbage means the header lied about the length
    is.peek();
    if (!is.eof()) throw std::runtime_error("load_dataset: payload longer than header promises");
    ds.validate();
    return ds;
}

}  // namespace sptm
