#ifndef GRAPHDISTILL_SPECTRAL_HPP
#define GRAPHDISTILL_SPECTRAL_HPP

#include <vector>

#include "graphdistill/graph.hpp"

namespace gd::spectral {

/// Dense symmetric matrix, 64-bit entries. set() writes both (i,j) and (j,i)
/// so symmetry holds exactly as stored.
class DenseSymMatrix {
public:
    explicit DenseSymMatrix(int order) : n_(order), a_(static_cast<std::size_t>(order) * order, 0.0) {}

    int order() const { return n_; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    void set(int i, int j, double v) {
        a_[static_cast<std::size_t>(i) * n_ + j] = v;
        a_[static_cast<std::size_t>(j) * n_ + i] = v;
    }

    /// Max absolute row sum.
    double inf_norm() const;

private:
    int n_ = 0;
    std::vector<double> a_;
};

/// Full eigendecomposition of a symmetric matrix: eigenvalues ascending,
/// column k of `eigenvectors` is the eigenvector for eigenvalues[k].
struct SpectralDecomposition {
    int order = 0;
    std::vector<double> eigenvalues;
    std::vector<double> eigenvectors; // row-major n*n; (i,k) = phi_k(i)

    double phi(int i, int k) const { return eigenvectors[static_cast<std::size_t>(i) * order + k]; }
};

/// HKS featurization settings: T diffusion times logarithmically spaced from
/// t_min to t_max inclusive, histogram with B bins.
struct HksConfig {
    int num_steps = 16;
    double t_min = 0.1;
    double t_max = 50.0;
    int num_bins = 16;

    void validate() const;
    std::vector<double> times() const;
};

/// Per-node heat kernel diagonal: values[i*T + j] = h_{z_j}(i, i) in (0, 1].
struct HksMatrix {
    int node_count = 0;
    int num_steps = 0;
    std::vector<double> values; // row-major node x step

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * num_steps + j]; }
};

/// Column-normalized histogram of HKS values: values[b*T + j], each time
/// column sums to 1.
struct HksHistogram {
    int num_bins = 0;
    int num_steps = 0;
    std::vector<double> values; // row-major bin x step

    double at(int b, int j) const { return values[static_cast<std::size_t>(b) * num_steps + j]; }
};

/// L = D - W: diagonal holds degrees, off-diagonal -1 per edge. Rows sum to 0.
DenseSymMatrix laplacian(const Graph& g);

/// Cyclic Jacobi rotations; iteration cap 100 sweeps, off-diagonal threshold
/// 1e-12 scaled by the matrix magnitude. Throws NumericError (reporting the
/// worst remaining off-diagonal) if the cap is hit.
SpectralDecomposition eig_sym(const DenseSymMatrix& m);

/// h_z(i,i) = sum_k exp(-lambda_k z) phi_k(i)^2 evaluated at the given times.
/// Eigenvalues within 1e-10 of zero are snapped to 0 before exponentiation;
/// more negative ones raise NumericError. Exposed separately so tests can
/// inject arbitrary times (including z = 0).
HksMatrix hks_at_times(const SpectralDecomposition& decomp, const std::vector<double>& times);

HksMatrix heat_kernel_signature(const Graph& g, const HksConfig& cfg);

/// Bins each time column over the fixed range [0, 1] into num_bins
/// equal-width bins (a value of exactly 1.0 lands in the top bin) and divides
/// counts by the node count. Entries outside [0, 1] by more than 1e-9 raise
/// NumericError.
HksHistogram hks_histogram(const HksMatrix& h, const HksConfig& cfg);

/// laplacian -> eig_sym -> heat_kernel_signature -> hks_histogram.
HksHistogram featurize(const Graph& g, const HksConfig& cfg);

} // namespace gd::spectral

namespace gd {
using spectral::DenseSymMatrix;
using spectral::SpectralDecomposition;
using spectral::HksConfig;
using spectral::HksMatrix;
using spectral::HksHistogram;
using spectral::laplacian;
using spectral::eig_sym;
using spectral::hks_at_times;
using spectral::heat_kernel_signature;
using spectral::hks_histogram;
using spectral::featurize;
} // namespace gd

#endif
