#ifndef PETNET_SPECTRAL_HPP
#define PETNET_SPECTRAL_HPP

#include "petnet/graph.hpp"

#include <cstddef>
#include <vector>

namespace petnet {

/// A node signal: one row per node, one column per channel.
using NodeSignal = Matrix;

enum class Basis { Monomial, Chebyshev };

struct FilterCoefficients {
  Basis basis = Basis::Chebyshev;
  std::vector<double> theta;

  std::size_t order() const { return theta.size(); }
  void validate() const;
};

inline constexpr std::size_t kDefaultDenseLimit = 2048;

/// Eigendecomposition L = U diag(lambda) U^T of a (small) Laplacian.
class SpectralBasis {
 public:
  explicit SpectralBasis(const LaplacianOp& lap, std::size_t dense_limit = kDefaultDenseLimit);

  const Eigen::MatrixXd& fourier() const { return fourier_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

  /// sum_k theta_k U Lambda^k U^T x for monomial coefficients.
  NodeSignal apply(const NodeSignal& x, const FilterCoefficients& theta) const;

 private:
  Eigen::MatrixXd fourier_;
  Eigen::VectorXd eigenvalues_;
};

/// Polynomial filter through explicit eigendecomposition; O(n^3) setup.
NodeSignal exact_spectral_filter(const LaplacianOp& lap, const NodeSignal& x,
                                 const FilterCoefficients& theta,
                                 std::size_t dense_limit = kDefaultDenseLimit);

/// sum_k theta_k T_k(L~) x via the three-term recursion. Each channel is
/// filtered independently with the same coefficients.
NodeSignal chebyshev_filter(const LaplacianOp& lap_rescaled, const NodeSignal& x,
                            const FilterCoefficients& theta);

/// Re-expresses a monomial polynomial in the Chebyshev basis.
FilterCoefficients chebyshev_from_monomial(const FilterCoefficients& theta_mono);

}  // namespace petnet

#endif
