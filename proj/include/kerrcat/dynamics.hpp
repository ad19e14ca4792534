#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kerrcat/common.hpp"

namespace kerrcat::dynamics {

struct Jump {
  double rate = 0;  ///< 1/s, >= 0
  Mat op;
};

/// Hamiltonian plus weighted jump operators in a declared basis.
struct LindbladModel {
  Mat hamiltonian;  ///< rad/s
  std::vector<Jump> jumps;
  std::string basisTag = "fock";  ///< fock | eigen | composite

  int dim() const { return int(hamiltonian.rows()); }
  void validate() const;
};

/// Density matrix tagged with its basis and tensor factorization.
struct DensityState {
  Mat matrix;
  std::string basisTag = "fock";
  std::vector<int> factorDims;

  /// Hermitian to 1e-10, trace 1 +- 1e-9, eigenvalues >= -1e-9.
  void validate() const;
};

/// Time profile for drive amplitudes during initialization and pulses.
struct RampProfile {
  enum class Kind { gaussianRise, flatTop, constant };
  Kind kind = Kind::constant;
  double duration = 0;  ///< s
  double sigma = 0;     ///< s, Gaussian width
  double startValue = 0;
  double endValue = 0;  ///< rad/s

  void validate() const;
  double value(double t) const;
};

/// Column-stacked superoperator: L vec(rho) = vec(-i[H,rho] + sum rate D[O]rho).
Mat buildLiouvillian(const LindbladModel& m);

struct EvolveOptions {
  bool allowFallback = true;   ///< adaptive stepping when L is defective
  double traceTol = 1e-8;      ///< drift bound at final time
};

/// Propagate rho0 to each requested time. Default path is exact propagation
/// through the eigendecomposition of L; falls back to adaptive stepping when
/// the eigenvector matrix is ill-conditioned.
std::vector<DensityState> evolve(const LindbladModel& m, const DensityState& rho0,
                                 const std::vector<double>& times,
                                 const EvolveOptions& opts = {});

/// Fixed-step classic 4th-order integration of the master equation with a
/// time-dependent Hamiltonian. dtMax must be small against the spectral
/// content declared by the caller (dtMax <= 1/(50 |content|)). With no jumps
/// and a pure rho0 the propagation runs on the state vector.
DensityState evolveTimeDependent(const std::function<Mat(double)>& hOf,
                                 const std::vector<Jump>& jumps, const DensityState& rho0,
                                 double tEnd, double dtMax);

struct SteadyStateOptions {
  /// 0 = never, 1 = always, 2 = automatic (system dim <= 24).
  int checkUniqueness = 2;
};

/// Trace-constrained linear solve of L vec(rho) = 0; result is Hermitized and
/// clipped to PSD (clip magnitude above 1e-8 is a hard error).
DensityState steadyState(const LindbladModel& m, const SteadyStateOptions& opts = {});

/// -Re(lambda) of the Liouvillian eigenvalue whose right eigenmatrix has the
/// largest Hilbert-Schmidt overlap with `observable`. `stateParity`, when
/// given (+-1 per basis state), restricts the eigenproblem to the weak parity
/// sector the observable lives in.
double slowestDecayRate(const LindbladModel& m, const Mat& observable,
                        const Eigen::VectorXi* stateParity = nullptr);

/// Tr(op rho); callers usually keep the real part.
Complex expectation(const DensityState& state, const Mat& op);

/// <obs>(t) along the evolution of rho0, through the spectral decomposition
/// of L. The optional parity hint restricts the solve to the observable's
/// sector, which halves the eigenproblem.
std::vector<double> expectationTimeline(const LindbladModel& m, const DensityState& rho0,
                                        const Mat& obs, const std::vector<double>& times,
                                        const Eigen::VectorXi* stateParity = nullptr);

/// Reduced matrix of the first factor: rho_A[i,j] = sum_k rho[(i,k),(j,k)].
Mat partialTraceSecond(const Mat& rho, int dimA, int dimB);

/// Time-series CSV: time_s,observable_name,value.
std::string timeSeriesCsv(const std::vector<double>& times,
                          const std::vector<std::pair<std::string, std::vector<double>>>& series);

}  // namespace kerrcat::dynamics
