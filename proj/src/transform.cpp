#include "sptm/transform.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace sptm {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_domain(const CsiMatrix& h, Domain d, const char* op) {
    if (h.domain != d) {
        throw std::invalid_argument(std::string(op) + ": matrix is in the wrong domain");
    }
}

}  // namespace

const Eigen::MatrixXcd& dft_matrix(int n) {
    static std::map<int, Eigen::MatrixXcd> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    Eigen::MatrixXcd f(n, n);
    double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            double a = -2.0 * kPi * static_cast<double>(static_cast<std::int64_t>(j) * k % n) / n;
            f(j, k) = std::complex<double>(s * std::cos(a), s * std::sin(a));
        }
    }
    return cache.emplace(n, std::move(f)).first->second;
}

CsiMatrix sf_to_ad(const CsiMatrix& h) {
    require_domain(h, Domain::SpatialFrequency, "sf_to_ad");
    const auto& fd = dft_matrix(static_cast<int>(h.data.rows()));
    const auto& fa = dft_matrix(static_cast<int>(h.data.cols()));
    CsiMatrix out;
    out.data = fd.adjoint() * h.data * fa;
    out.domain = Domain::AngularDelay;
    return out;
}

CsiMatrix ad_to_sf(const CsiMatrix& h) {
    require_domain(h, Domain::AngularDelay, "ad_to_sf");
    const auto& fd = dft_matrix(static_cast<int>(h.data.rows()));
    const auto& fa = dft_matrix(static_cast<int>(h.data.cols()));
    CsiMatrix out;
    out.data = fd * h.data * fa.adjoint();
    out.domain = Domain::SpatialFrequency;
    return out;
}

CsiMatrix truncate_delay(const CsiMatrix& h, int r_delay) {
    require_domain(h, Domain::AngularDelay, "truncate_delay");
    if (r_delay < 1 || r_delay > h.data.rows()) {
        throw std::invalid_argument("truncate_delay: r_delay out of range");
    }
    CsiMatrix out;
    out.data = h.data.topRows(r_delay);
    out.domain = Domain::AngularDelayTruncated;
    return out;
}

SphericalCsi spherical_split(const CsiMatrix& h) {
    require_domain(h, Domain::AngularDelayTruncated, "spherical_split");
    double p = h.data.norm();
    if (p <= 0.0) throw std::domain_error("spherical_split: zero matrix has no direction");
    SphericalCsi s;
    s.power = p;
    s.direction = h.data / p;
    return s;
}

CsiMatrix spherical_combine(const SphericalCsi& s) {
    CsiMatrix out;
    out.data = s.power * s.direction;
    out.domain = Domain::AngularDelayTruncated;
    return out;
}

Tensor vectorize(const CsiMatrix& h) {
    require_domain(h, Domain::AngularDelayTruncated, "vectorize");
    int r = static_cast<int>(h.data.rows());
    int c = static_cast<int>(h.data.cols());
    std::int64_t half = static_cast<std::int64_t>(r) * c;
    Tensor v({static_cast<int>(2 * half)});
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            std::int64_t idx = static_cast<std::int64_t>(i) * c + j;
            v[idx] = h.data(i, j).real();
            v[half + idx] = h.data(i, j).imag();
        }
    }
    return v;
}

CsiMatrix devectorize(const Tensor& v, int r_delay, int n_antennas) {
    std::int64_t half = static_cast<std::int64_t>(r_delay) * n_antennas;
    if (v.size() != 2 * half) {
        throw std::invalid_argument("devectorize: length does not match 2*R_d*N_b");
    }
    CsiMatrix out;
    out.data.resize(r_delay, n_antennas);
    for (int i = 0; i < r_delay; ++i) {
        for (int j = 0; j < n_antennas; ++j) {
            std::int64_t idx = static_cast<std::int64_t>(i) * n_antennas + j;
            out.data(i, j) = std::complex<double>(v[idx], v[half + idx]);
        }
    }
    out.domain = Domain::AngularDelayTruncated;
    return out;
}

}  // namespace sptm
