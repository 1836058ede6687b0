#include "fsep/mathcore.hpp"

#include <cmath>
#include <string>

#include "fsep/errors.hpp"

namespace fsep {

Mat3 rotation_body_to_inertial(const EulerAngles& a) {
  const double sf = std::sin(a.phi), cf = std::cos(a.phi);
  const double st = std::sin(a.theta), ct = std::cos(a.theta);
  const double sp = std::sin(a.psi), cp = std::cos(a.psi);
  Mat3 r;
  r << cp * ct, -sp * cf + cp * st * sf, sp * sf + cp * st * cf,
       sp * ct, cp * cf + sp * st * sf, -cp * sf + sp * st * cf,
       -st, ct * sf, ct * cf;
  return r;
}

Mat3 euler_rate_matrix(const EulerAngles& a) {
  if (!(std::abs(a.theta) < kPitchSingularityGuard)) {
    throw SingularAttitude("euler_rate_matrix: |theta| = " + std::to_string(std::abs(a.theta)) +
                           " is inside the gimbal-lock guard");
  }
  const double sf = std::sin(a.phi), cf = std::cos(a.phi);
  const double st = std::sin(a.theta), ct = std::cos(a.theta);
  Mat3 r;
  r << 1.0, st / ct * sf, st / ct * cf,
       0.0, cf, -sf,
       0.0, sf / ct, cf / ct;
  return r;
}

double signed_power(double x, double a) {
  if (x == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(x), a), x);
}

Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return s;
}

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

}  // namespace fsep
