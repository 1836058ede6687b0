#pragma once

#include <Eigen/Dense>
#include <numbers>

namespace fsep {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat43 = Eigen::Matrix<double, 4, 3>;

/// Body attitude as roll (phi), pitch (theta), yaw (psi), in radians.
struct EulerAngles {
  double phi = 0.0;
  double theta = 0.0;
  double psi = 0.0;

  static EulerAngles from_vector(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
  Vec3 as_vector() const { return {phi, theta, psi}; }
};

/// Largest |theta| accepted by euler_rate_matrix.
inline constexpr double kPitchSingularityGuard = std::numbers::pi / 2.0 - 1e-3;

/// Body-to-inertial rotation R_EB (Z-Y-X Euler sequence).
Mat3 rotation_body_to_inertial(const EulerAngles& angles);

/// Matrix mapping body rates [p q r] to Euler-angle rates.
/// Throws SingularAttitude when |theta| exceeds kPitchSingularityGuard.
Mat3 euler_rate_matrix(const EulerAngles& angles);

/// |x|^a * sign(x). Odd in x, monotone for a > 0.
double signed_power(double x, double a);

/// Element-wise signed_power.
template <typename Derived>
auto signed_power(const Eigen::MatrixBase<Derived>& x, double a) {
  return x.unaryExpr([a](double v) { return signed_power(v, a); }).eval();
}

/// Cross-product matrix: skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& a);

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace fsep
