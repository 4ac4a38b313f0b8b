#pragma once

#include <Eigen/Dense>

#include "sptm/tensor.hpp"

namespace sptm {

enum class Domain {
    SpatialFrequency,       // N_f x N_b
    AngularDelay,           // N_f x N_b
    AngularDelayTruncated,  // R_d x N_b
};

/// Complex channel matrix carrying its domain tag. Transforms check the
/// tag they expect; there is no silent reinterpretation.
struct CsiMatrix {
    Eigen::MatrixXcd data;
    Domain domain = Domain::SpatialFrequency;
};

/// Power/direction split: power is the Frobenius norm, direction has
/// unit Frobenius norm, and power * direction reconstructs the input.
struct SphericalCsi {
    double power = 0.0;
    Eigen::MatrixXcd direction;
};

/// H_ad = F_d^H * H_sf * F_a with unitary DFT matrices (1/sqrt(dim)
/// scaling); energy preserving.
CsiMatrix sf_to_ad(const CsiMatrix& h);

/// Exact inverse of sf_to_ad.
CsiMatrix ad_to_sf(const CsiMatrix& h);

/// Keep the first r_delay rows of an angular-delay matrix.
CsiMatrix truncate_delay(const CsiMatrix& h, int r_delay);

SphericalCsi spherical_split(const CsiMatrix& h);

CsiMatrix spherical_combine(const SphericalCsi& s);

/// Truncated R_d x N_b complex matrix -> real vector of length
/// N = 2*R_d*N_b. Layout: real part block then imaginary part block,
/// row-major within each. The measurement matrix is learned relative to
/// this layout; do not change it.
Tensor vectorize(const CsiMatrix& h);

CsiMatrix devectorize(const Tensor& v, int r_delay, int n_antennas);

/// Unitary DFT matrix of size n (cached).
const Eigen::MatrixXcd& dft_matrix(int n);

}  // namespace sptm
