#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kerrcat/common.hpp"

namespace kerrcat::fitting {

/// Parameter estimates with covariance-derived errors and provenance of
/// fixed vs free parameters.
struct FitResult {
  std::vector<std::string> names;
  RealVec params;
  RealVec stdErrors;
  double residualNorm = 0;
  bool converged = false;
  bool atBound = false;
  std::map<std::string, double> fixedParams;

  double value(const std::string& name) const;
  double error(const std::string& name) const;
  std::string toJson() const;
};

struct FitOptions {
  int maxIterations = 300;
  double tolerance = 1e-12;  ///< relative decrease of the cost
};

/// Weighted damped Gauss-Newton (Levenberg-Marquardt) with a central-difference
/// Jacobian (relative step 1e-6). sigma empty means uniform weights; bounds
/// empty means unbounded. Covariance comes from the Jacobian at the optimum.
FitResult nonlinearLeastSquares(const std::function<RealVec(const RealVec&)>& model,
                                const RealVec& data, const RealVec& sigma, const RealVec& init,
                                const std::vector<std::string>& names,
                                const RealVec& lowerBounds = {}, const RealVec& upperBounds = {},
                                const FitOptions& opts = {});

enum class CurveKind { exp, doubleExp, lorentzian, decayingSinusoid };

/// Canonical curve models with automatic initial guesses:
///   exp              a exp(-t/tau) + c
///   doubleExp        A e2 + B k2/(k1-k2) (e2 - e1) + C (1 - e2 - k2/(k1-k2)(e2 - e1))
///                    with ei = exp(-ki t), evaluated through its k1 -> k2 limit
///   lorentzian       a w^2 / ((x-x0)^2 + w^2) + c
///   decayingSinusoid a exp(-gamma t) cos(omega t + phi) + c
FitResult canonicalFits(CurveKind kind, const RealVec& x, const RealVec& y,
                        const RealVec& sigma = {});

/// Stable (exp(-k2 t) - exp(-k1 t)) / (k1 - k2), with the t exp(-k t) limit.
double expRelDiff(double t, double k1, double k2);

struct GaussianSpec {
  double mean = 0;
  double sigma = 0;
};

/// Solver output for one Monte-Carlo draw: value plus optional conditional
/// standard error (0 when the solver is deterministic given its inputs).
struct McSample {
  double value = 0;
  double conditionalSigma = 0;
};

struct McSummary {
  double mean = 0;
  double totalVariance = 0;           ///< E[sigma^2 | x] + Var(value | x)
  double meanConditionalVariance = 0; ///< E[sigma^2 | x]
  double varianceOfMeans = 0;         ///< Var(value | x)
  int failures = 0;
};

/// Seeded sampling of `solver` over independent Gaussian inputs; reports the
/// two terms of the law of total variance separately plus their sum.
/// Deterministic for a given seed regardless of thread count.
McSummary monteCarloPropagate(
    const std::function<std::optional<McSample>(const RealVec&)>& solver,
    const std::vector<GaussianSpec>& inputDists, int n, std::uint64_t seed, int jobs = 1);

/// splitmix64 step, the documented seed-derivation rule for parallel batches.
std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream);

}  // namespace kerrcat::fitting
