#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace kerrcat {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

/// Dimensionless quadrature coordinate in oscillator phase space.
using PhaseSpacePoint = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Frequencies are stored as angular values (rad/s) everywhere inside the
/// library; file and CLI boundaries use plain Hz (value / 2pi).
inline double hzToAngular(double hz) { return kTwoPi * hz; }
inline double angularToHz(double w) { return w / kTwoPi; }

/// Library error with a stable machine-readable code (e.g. "parity-mixing")
/// plus a human-readable detail string.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& detail) {
  throw Error(code, detail);
}

/// Log level from KERRCAT_LOG in {error, info, debug}; defaults to error.
int logLevel();
void logInfo(const std::string& msg);
void logDebug(const std::string& msg);

inline bool isHermitian(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() < tol * scale;
}

}  // namespace kerrcat
