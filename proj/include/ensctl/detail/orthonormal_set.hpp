#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ensctl::detail {

// Incrementally grown orthonormal basis of a subspace of R^d.
// Candidates are projected out twice (classical Gram-Schmidt with one
// reorthogonalisation pass) and accepted when the relative residual exceeds
// the cutoff.
class OrthonormalSet {
 public:
  explicit OrthonormalSet(Eigen::Index ambient) : ambient_(ambient) {}

  Eigen::Index ambient() const { return ambient_; }
  std::size_t size() const { return basis_.size(); }
  const std::vector<Eigen::VectorXd>& vectors() const { return basis_; }

  Eigen::VectorXd residual(const Eigen::VectorXd& v) const {
    Eigen::VectorXd r = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis_) r -= q.dot(r) * q;
    }
    return r;
  }

  // Returns true when v added a new direction. `abs_floor` guards against
  // accepting numerically-zero candidates whose relative residual is noisy.
  bool try_add(const Eigen::VectorXd& v, double rel_tol, double abs_floor = 1e-13) {
    const double vn = v.norm();
    if (vn <= abs_floor) return false;
    Eigen::VectorXd r = residual(v);
    const double rn = r.norm();
    if (rn <= rel_tol * vn || rn <= abs_floor) return false;
    basis_.push_back(r / rn);
    return true;
  }

  Eigen::MatrixXd as_columns() const {
    Eigen::MatrixXd m(ambient_, static_cast<Eigen::Index>(basis_.size()));
    for (std::size_t i = 0; i < basis_.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = basis_[i];
    return m;
  }

 private:
  Eigen::Index ambient_;
  std::vector<Eigen::VectorXd> basis_;
};

}  // namespace ensctl::detail
