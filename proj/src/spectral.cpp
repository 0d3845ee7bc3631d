#include "petnet/spectral.hpp"

#include "petnet/error.hpp"

#include <cmath>

namespace petnet {

void FilterCoefficients::validate() const {
  require(!theta.empty(), ErrorKind::Validation, "filter needs at least one coefficient");
  for (double t : theta)
    require(std::isfinite(t), ErrorKind::Validation, "non-finite filter coefficient");
}

SpectralBasis::SpectralBasis(const LaplacianOp& lap, std::size_t dense_limit) {
  require(lap.size() <= dense_limit, ErrorKind::Capability,
          "exact spectral filtering is capped at " + std::to_string(dense_limit) +
              " nodes (got " + std::to_string(lap.size()) +
              "); use the Chebyshev filter for larger graphs");
  const Eigen::MatrixXd dense = Eigen::MatrixXd(lap.entries);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  require(solver.info() == Eigen::Success, ErrorKind::Runtime, "eigendecomposition failed");
  fourier_ = solver.eigenvectors();
  eigenvalues_ = solver.eigenvalues();
}

NodeSignal SpectralBasis::apply(const NodeSignal& x, const FilterCoefficients& theta) const {
  require(theta.basis == Basis::Monomial, ErrorKind::Contract,
          "exact spectral filter expects monomial coefficients");
  theta.validate();
  require(static_cast<Eigen::Index>(x.rows()) == fourier_.rows(), ErrorKind::Dimension,
          "signal has " + std::to_string(x.rows()) + " rows, graph has " +
              std::to_string(fourier_.rows()) + " nodes");

  // Horner per eigenvalue: g(lambda) = sum_k theta_k lambda^k.
  Eigen::VectorXd response(eigenvalues_.size());
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    double acc = 0.0;
    for (auto k = theta.theta.size(); k-- > 0;) acc = acc * eigenvalues_[i] + theta.theta[k];
    response[i] = acc;
  }
  const Eigen::MatrixXd spectral = fourier_.transpose() * x;
  const Eigen::MatrixXd scaled = response.asDiagonal() * spectral;
  return fourier_ * scaled;
}

NodeSignal exact_spectral_filter(const LaplacianOp& lap, const NodeSignal& x,
                                 const FilterCoefficients& theta, std::size_t dense_limit) {
  require(theta.basis == Basis::Monomial, ErrorKind::Contract,
          "exact spectral filter expects monomial coefficients");
  return SpectralBasis(lap, dense_limit).apply(x, theta);
}

NodeSignal chebyshev_filter(const LaplacianOp& lap_rescaled, const NodeSignal& x,
                            const FilterCoefficients& theta) {
  require(lap_rescaled.rescaled, ErrorKind::Contract,
          "chebyshev filter requires a rescaled laplacian");
  require(theta.basis == Basis::Chebyshev, ErrorKind::Contract,
          "chebyshev filter expects chebyshev coefficients");
  theta.validate();
  require(static_cast<std::size_t>(x.rows()) == lap_rescaled.size(), ErrorKind::Dimension,
          "signal has " + std::to_string(x.rows()) + " rows, graph has " +
              std::to_string(lap_rescaled.size()) + " nodes");

  const auto& l = lap_rescaled.entries;
  const auto& c = theta.theta;
  NodeSignal out = c[0] * x;
  if (c.size() == 1) return out;

  NodeSignal prev = x;
  NodeSignal cur = l * x;
  out += c[1] * cur;
  NodeSignal next(x.rows(), x.cols());
  for (std::size_t k = 2; k < c.size(); ++k) {
    next.noalias() = l * cur;
    next = 2.0 * next - prev;
    out += c[k] * next;
    prev.swap(cur);
    cur.swap(next);
  }
  return out;
}

FilterCoefficients chebyshev_from_monomial(const FilterCoefficients& theta_mono) {
  require(theta_mono.basis == Basis::Monomial, ErrorKind::Contract,
          "expected monomial coefficients");
  theta_mono.validate();
  const std::size_t order = theta_mono.order();

  // power[j] holds the Chebyshev expansion of x^k; multiply by x with
  // x T_0 = T_1 and x T_j = (T_{j+1} + T_{j-1}) / 2.
  std::vector<double> power(order, 0.0), next(order, 0.0);
  std::vector<double> out(order, 0.0);
  power[0] = 1.0;
  for (std::size_t k = 0; k < order; ++k) {
    for (std::size_t j = 0; j <= k; ++j) out[j] += theta_mono.theta[k] * power[j];
    if (k + 1 == order) break;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t j = 0; j <= k; ++j) {
      if (power[j] == 0.0) continue;
      if (j == 0) {
        next[1] += power[0];
      } else {
        next[j + 1] += 0.5 * power[j];
        next[j - 1] += 0.5 * power[j];
      }
    }
    power.swap(next);
  }
  return {Basis::Chebyshev, out};
}

}  // namespace petnet
