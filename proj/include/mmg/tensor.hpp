#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace mmg {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Symmetric rank-2 tensor stored as six independent components in the
/// fixed order (11, 22, 33, 12, 23, 13). Stress components are in kPa,
/// strains dimensionless; tension and dilation are positive.
struct SymmetricTensor2 {
  std::array<double, 6> c{0, 0, 0, 0, 0, 0};

  SymmetricTensor2() = default;
  explicit SymmetricTensor2(const std::array<double, 6>& a) : c(a) {}
  SymmetricTensor2(double a11, double a22, double a33, double a12, double a23,
                   double a13)
      : c{a11, a22, a33, a12, a23, a13} {}

  static SymmetricTensor2 zero() { return {}; }
  static SymmetricTensor2 identity() { return {1, 1, 1, 0, 0, 0}; }
  static SymmetricTensor2 isotropic(double p) { return {p, p, p, 0, 0, 0}; }
  static SymmetricTensor2 diagonal(double a, double b, double d) {
    return {a, b, d, 0, 0, 0};
  }

  double operator[](int i) const { return c[i]; }
  double& operator[](int i) { return c[i]; }

  double trace() const { return c[0] + c[1] + c[2]; }

  SymmetricTensor2 deviator() const {
    const double p = trace() / 3.0;
    return {c[0] - p, c[1] - p, c[2] - p, c[3], c[4], c[5]};
  }

  /// Frobenius norm of the full 3x3 representation (off-diagonals twice).
  double norm() const { return std::sqrt(ddot(*this)); }

  /// Double contraction A:B over the full 3x3 representation.
  double ddot(const SymmetricTensor2& o) const {
    return c[0] * o.c[0] + c[1] * o.c[1] + c[2] * o.c[2] +
           2.0 * (c[3] * o.c[3] + c[4] * o.c[4] + c[5] * o.c[5]);
  }

  /// Single contraction (A.B + B.A)/2 is not needed; this is the symmetric
  /// square A.A used by invariant derivatives.
  SymmetricTensor2 square() const {
    const auto& a = c;
    return {a[0] * a[0] + a[3] * a[3] + a[5] * a[5],
            a[3] * a[3] + a[1] * a[1] + a[4] * a[4],
            a[5] * a[5] + a[4] * a[4] + a[2] * a[2],
            a[0] * a[3] + a[3] * a[1] + a[5] * a[4],
            a[3] * a[5] + a[1] * a[4] + a[4] * a[2],
            a[0] * a[5] + a[3] * a[4] + a[5] * a[2]};
  }

  Eigen::Matrix3d full() const {
    Eigen::Matrix3d m;
    m << c[0], c[3], c[5], c[3], c[1], c[4], c[5], c[4], c[2];
    return m;
  }
  static SymmetricTensor2 from_full(const Eigen::Matrix3d& m) {
    return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)),
            0.5 * (m(1, 2) + m(2, 1)), 0.5 * (m(0, 2) + m(2, 0))};
  }

  /// Plain component 6-vector (stress-like Voigt form).
  Vector6 voigt_stress() const {
    Vector6 v;
    v << c[0], c[1], c[2], c[3], c[4], c[5];
    return v;
  }
  /// Engineering 6-vector with doubled shears (strain-like Voigt form),
  /// so that stiffness contraction is a plain matrix-vector product.
  Vector6 voigt_strain() const {
    Vector6 v;
    v << c[0], c[1], c[2], 2.0 * c[3], 2.0 * c[4], 2.0 * c[5];
    return v;
  }
  static SymmetricTensor2 from_voigt_stress(const Vector6& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }
  static SymmetricTensor2 from_voigt_strain(const Vector6& v) {
    return {v(0), v(1), v(2), 0.5 * v(3), 0.5 * v(4), 0.5 * v(5)};
  }

  SymmetricTensor2 operator+(const SymmetricTensor2& o) const {
    SymmetricTensor2 r;
    for (int i = 0; i < 6; ++i) r.c[i] = c[i] + o.c[i];
    return r;
  }
  SymmetricTensor2 operator-(const SymmetricTensor2& o) const {
    SymmetricTensor2 r;
    for (int i = 0; i < 6; ++i) r.c[i] = c[i] - o.c[i];
    return r;
  }
  SymmetricTensor2 operator*(double s) const {
    SymmetricTensor2 r;
    for (int i = 0; i < 6; ++i) r.c[i] = c[i] * s;
    return r;
  }
  SymmetricTensor2& operator+=(const SymmetricTensor2& o) {
    for (int i = 0; i < 6; ++i) c[i] += o.c[i];
    return *this;
  }
  SymmetricTensor2& operator-=(const SymmetricTensor2& o) {
    for (int i = 0; i < 6; ++i) c[i] -= o.c[i];
    return *this;
  }
  SymmetricTensor2& operator*=(double s) {
    for (int i = 0; i < 6; ++i) c[i] *= s;
    return *this;
  }

  SymmetricTensor2 normalized() const {
    const double n = norm();
    if (n <= 0.0) throw std::domain_error("cannot normalize zero tensor");
    return *this * (1.0 / n);
  }
};

inline SymmetricTensor2 operator*(double s, const SymmetricTensor2& t) {
  return t * s;
}

/// Minor-symmetric rank-4 tensor in 6x6 matrix form (kPa for stiffness).
/// Rows/columns follow the (11,22,33,12,23,13) ordering; the matrix maps
/// engineering-strain vectors to stress vectors.
class Tensor4 {
 public:
  Tensor4() { m_.setZero(); }
  explicit Tensor4(const Matrix6& m) : m_(m) {}

  /// Isotropic elastic stiffness C = K I⊗I + 2G (Isym - I⊗I/3).
  static Tensor4 isotropic(double bulk, double shear) {
    if (!(bulk > 0.0) || !(shear > 0.0))
      throw std::invalid_argument("isotropic stiffness requires K > 0, G > 0");
    Tensor4 t;
    const double lam = bulk - 2.0 * shear / 3.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) t.m_(i, j) = lam;
      t.m_(i, i) += 2.0 * shear;
      t.m_(i + 3, i + 3) = shear;
    }
    return t;
  }

  const Matrix6& matrix() const { return m_; }
  Matrix6& matrix() { return m_; }

  /// Double contraction C : t with a strain-like tensor argument.
  SymmetricTensor2 apply(const SymmetricTensor2& strain_like) const {
    Vector6 v = m_ * strain_like.voigt_strain();
    return SymmetricTensor2::from_voigt_stress(v);
  }

  /// Solves C : x = stress_like for the strain-like tensor x.
  SymmetricTensor2 solve(const SymmetricTensor2& stress_like) const {
    Vector6 v = m_.partialPivLu().solve(stress_like.voigt_stress());
    return SymmetricTensor2::from_voigt_strain(v);
  }

  Tensor4 operator+(const Tensor4& o) const { return Tensor4(m_ + o.m_); }
  Tensor4 operator-(const Tensor4& o) const { return Tensor4(m_ - o.m_); }
  Tensor4 operator*(double s) const { return Tensor4(m_ * s); }

 private:
  Matrix6 m_;
};

}  // namespace mmg
