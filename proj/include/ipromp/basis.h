#ifndef IPROMP_BASIS_H_
#define IPROMP_BASIS_H_

#include <Eigen/Dense>

namespace ipromp {

// Gaussian radial basis functions over normalized phase z in [0, 1].
//
//   psi_i(z) = exp(-(z - c_i)^2 / (2 h^2))
//
// optionally divided by sum_i psi_i(z) so that every row sums to one.
// Immutable once constructed.
class BasisSystem {
 public:
  // Uniformly spaced centers on [0, 1] (endpoints included) with width
  // h = overlap / (n_basis - 1). A single basis sits at 0.5 with h = overlap.
  static BasisSystem Uniform(int n_basis, double overlap = 1.0,
                             bool normalize = true);

  // Throws ConfigError when centers are not strictly increasing, leave
  // [-0.1, 1.1], or width is not positive.
  BasisSystem(Eigen::VectorXd centers, double width, bool normalize);

  int size() const { return static_cast<int>(centers_.size()); }
  const Eigen::VectorXd& centers() const { return centers_; }
  double width() const { return width_; }
  bool normalize() const { return normalize_; }

  // psi(z). Throws DataError(kDomain) for non-finite z.
  Eigen::VectorXd Evaluate(double z) const;

  // Row t is Evaluate(z_values[t]). z_values must be non-empty and in [0,1].
  Eigen::MatrixXd DesignMatrix(const Eigen::VectorXd& z_values) const;

 private:
  Eigen::VectorXd centers_;
  double width_;
  bool normalize_;
};

}  // namespace ipromp

#endif  // IPROMP_BASIS_H_
