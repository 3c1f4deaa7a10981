#include "ipromp/basis.h"

#include <cmath>
#include <string>

#include "ipromp/error.h"

namespace ipromp {

BasisSystem BasisSystem::Uniform(int n_basis, double overlap, bool normalize) {
  if (n_basis < 1) throw ConfigError("basis: n_basis must be positive");
  if (!(overlap > 0.0)) throw ConfigError("basis: overlap must be positive");
  if (n_basis == 1) {
    return BasisSystem(Eigen::VectorXd::Constant(1, 0.5), overlap, normalize);
  }
  Eigen::VectorXd centers = Eigen::VectorXd::LinSpaced(n_basis, 0.0, 1.0);
  return BasisSystem(std::move(centers), overlap / (n_basis - 1), normalize);
}

BasisSystem::BasisSystem(Eigen::VectorXd centers, double width, bool normalize)
    : centers_(std::move(centers)), width_(width), normalize_(normalize) {
  if (centers_.size() == 0) throw ConfigError("basis: no centers");
  if (!(width_ > 0.0) || !std::isfinite(width_)) {
    throw ConfigError("basis: width must be positive and finite");
  }
  for (Eigen::Index i = 0; i < centers_.size(); ++i) {
    const double c = centers_[i];
    if (!std::isfinite(c) || c < -0.1 || c > 1.1) {
      throw ConfigError("basis: center " + std::to_string(i) +
                        " outside [-0.1, 1.1]");
    }
    if (i > 0 && !(c > centers_[i - 1])) {
      throw ConfigError("basis: centers must be strictly increasing");
    }
  }
}

Eigen::VectorXd BasisSystem::Evaluate(double z) const {
  if (!std::isfinite(z)) {
    throw DataError(DataErrorKind::kDomain, "basis: non-finite phase");
  }
  const double inv_two_h2 = 1.0 / (2.0 * width_ * width_);
  Eigen::VectorXd psi(centers_.size());
  for (Eigen::Index i = 0; i < centers_.size(); ++i) {
    const double d = z - centers_[i];
    psi[i] = std::exp(-d * d * inv_two_h2);
  }
  if (normalize_) {
    // Far outside the support every term can underflow; fall back to the
    // nearest center so the row still sums to one.
    const double sum = psi.sum();
    if (sum > 0.0) {
      psi /= sum;
    } else {
      Eigen::Index nearest;
      (centers_.array() - z).abs().minCoeff(&nearest);
      psi.setZero();
      psi[nearest] = 1.0;
    }
  }
  return psi;
}

Eigen::MatrixXd BasisSystem::DesignMatrix(const Eigen::VectorXd& z_values) const {
  if (z_values.size() == 0) {
    throw DataError(DataErrorKind::kDomain, "basis: empty phase vector");
  }
  Eigen::MatrixXd design(z_values.size(), centers_.size());
  for (Eigen::Index t = 0; t < z_values.size(); ++t) {
    const double z = z_values[t];
    if (!(z >= 0.0 && z <= 1.0)) {
      throw DataError(DataErrorKind::kDomain, "basis: phase outside [0, 1]");
    }
    design.row(t) = Evaluate(z).transpose();
  }
  return design;
}

}  // namespace ipromp
