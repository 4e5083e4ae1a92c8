#include "graphdistill/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "graphdistill/errors.hpp"

namespace gd::spectral {

double DenseSymMatrix::inf_norm() const {
    double worst = 0.0;
    for (int i = 0; i < n_; ++i) {
        double row = 0.0;
        for (int j = 0; j < n_; ++j) row += std::abs((*this)(i, j));
        worst = std::max(worst, row);
    }
    return worst;
}

void HksConfig::validate() const {
    if (num_steps < 2) throw std::invalid_argument("hks: num_steps must be >= 2");
    if (num_bins < 2) throw std::invalid_argument("hks: num_bins must be >= 2");
    if (!(t_min > 0.0)) throw std::invalid_argument("hks: t_min must be > 0");
    if (!(t_max > t_min)) throw std::invalid_argument("hks: t_max must be > t_min");
}

std::vector<double> HksConfig::times() const {
    validate();
    std::vector<double> z(num_steps);
    double lo = std::log(t_min), hi = std::log(t_max);
    for (int j = 0; j < num_steps; ++j)
        z[j] = std::exp(lo + (hi - lo) * j / (num_steps - 1));
    z.front() = t_min;
    z.back() = t_max;
    return z;
}

DenseSymMatrix laplacian(const Graph& g) {
    DenseSymMatrix m(g.node_count());
    for (int i = 0; i < g.node_count(); ++i) m.set(i, i, g.degree(i));
    for (const auto& [i, j] : g.edges()) m.set(i, j, -1.0);
    return m;
}

namespace {

constexpr int kMaxSweeps = 100;

double max_off_diagonal(const std::vector<double>& a, int n) {
    double worst = 0.0;
    for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q)
            worst = std::max(worst, std::abs(a[static_cast<std::size_t>(p) * n + q]));
    return worst;
}

} // namespace

SpectralDecomposition eig_sym(const DenseSymMatrix& m) {
    const int n = m.order();
    SpectralDecomposition out;
    out.order = n;
    if (n == 0) return out;

    std::vector<double> a(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = m(i, j);
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

    double scale = 0.0;
    for (double x : a) scale = std::max(scale, std::abs(x));
    const double tol = 1e-12 * std::max(1.0, scale);

    auto at = [&](std::vector<double>& mat, int i, int j) -> double& {
        return mat[static_cast<std::size_t>(i) * n + j];
    };

    bool converged = n == 1;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = at(a, p, q);
                if (std::abs(apq) <= tol) continue;
                converged = false;
                double app = at(a, p, p), aqq = at(a, q, q);
                double theta = 0.5 * (aqq - app) / apq;
                double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                at(a, p, p) = app - t * apq;
                at(a, q, q) = aqq + t * apq;
                at(a, p, q) = 0.0;
                at(a, q, p) = 0.0;
                for (int i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    double aip = at(a, i, p), aiq = at(a, i, q);
                    at(a, i, p) = c * aip - s * aiq;
                    at(a, p, i) = at(a, i, p);
                    at(a, i, q) = s * aip + c * aiq;
                    at(a, q, i) = at(a, i, q);
                }
                for (int i = 0; i < n; ++i) {
                    double vip = at(v, i, p), viq = at(v, i, q);
                    at(v, i, p) = c * vip - s * viq;
                    at(v, i, q) = s * vip + c * viq;
                }
            }
        }
    }
    if (!converged && max_off_diagonal(a, n) > tol)
        throw NumericError("eig_sym: Jacobi did not converge in " + std::to_string(kMaxSweeps) +
                           " sweeps; worst off-diagonal " + std::to_string(max_off_diagonal(a, n)));

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
        return at(a, x, x) < at(a, y, y);
    });
    out.eigenvalues.resize(n);
    out.eigenvectors.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int k = 0; k < n; ++k) {
        out.eigenvalues[k] = at(a, idx[k], idx[k]);
        for (int i = 0; i < n; ++i)
            out.eigenvectors[static_cast<std::size_t>(i) * n + k] = at(v, i, idx[k]);
    }
    return out;
}

HksMatrix hks_at_times(const SpectralDecomposition& decomp, const std::vector<double>& times) {
    const int n = decomp.order;
    const int T = static_cast<int>(times.size());
    std::vector<double> lambda = decomp.eigenvalues;
    for (double& l : lambda) {
        if (l < -1e-10)
            throw NumericError("hks: eigenvalue " + std::to_string(l) +
                               " below PSD roundoff tolerance");
        // Roundoff zeros land on either side of 0 depending on rotation
        // order; snapping both signs keeps e^{-lz} at exactly 1 for every
        // component kernel. Genuine connectivity eigenvalues are far larger.
        if (std::abs(l) <= 1e-10) l = 0.0;
    }
    HksMatrix h;
    h.node_count = n;
    h.num_steps = T;
    h.values.assign(static_cast<std::size_t>(n) * T, 0.0);
    std::vector<double> decay(n);
    for (int j = 0; j < T; ++j) {
        for (int k = 0; k < n; ++k) decay[k] = std::exp(-lambda[k] * times[j]);
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for (int k = 0; k < n; ++k) {
                double p = decomp.phi(i, k);
                sum += decay[k] * p * p;
            }
            if (!(sum > 0.0))
                throw NumericError("hks: nonpositive diagonal entry " + std::to_string(sum));
            if (sum > 1.0) {
                if (sum > 1.0 + 1e-9)
                    throw NumericError("hks: diagonal entry " + std::to_string(sum) +
                                       " above 1 beyond roundoff");
                sum = 1.0;
            }
            h.values[static_cast<std::size_t>(i) * T + j] = sum;
        }
    }
    return h;
}

HksMatrix heat_kernel_signature(const Graph& g, const HksConfig& cfg) {
    if (g.node_count() < 1)
        throw std::invalid_argument("heat_kernel_signature: empty graph");
    return hks_at_times(eig_sym(laplacian(g)), cfg.times());
}

HksHistogram hks_histogram(const HksMatrix& h, const HksConfig& cfg) {
    cfg.validate();
    if (h.num_steps != cfg.num_steps)
        throw std::invalid_argument("hks_histogram: step count mismatch");
    const int n = h.node_count;
    const int T = h.num_steps;
    const int B = cfg.num_bins;
    HksHistogram s;
    s.num_bins = B;
    s.num_steps = T;
    s.values.assign(static_cast<std::size_t>(B) * T, 0.0);
    for (int j = 0; j < T; ++j) {
        for (int i = 0; i < n; ++i) {
            double x = h.at(i, j);
            if (x < -1e-9 || x > 1.0 + 1e-9)
                throw NumericError("hks_histogram: entry " + std::to_string(x) +
                                   " outside [0,1]");
            x = std::min(1.0, std::max(0.0, x));
            // HKS limits sit exactly on bin edges (1/m for a size-m
            // component), where solver roundoff would make the bin choice
            // depend on node order. The offset shifts the decision point to
            // a value nothing accumulates on.
            int b = std::min(B - 1, static_cast<int>(std::floor(x * B + 1e-9)));
            s.values[static_cast<std::size_t>(b) * T + j] += 1.0;
        }
        for (int b = 0; b < B; ++b) s.values[static_cast<std::size_t>(b) * T + j] /= n;
    }
    return s;
}

HksHistogram featurize(const Graph& g, const HksConfig& cfg) {
    return hks_histogram(heat_kernel_signature(g, cfg), cfg);
}

} // namespace gd::spectral
