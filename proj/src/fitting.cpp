#include "kerrcat/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace kerrcat::fitting {

double FitResult::value(const std::string& name) const {
  for (size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return params(k);
  auto it = fixedParams.find(name);
  if (it != fixedParams.end()) return it->second;
  fail("invalid-params", "unknown fit parameter " + name);
}

double FitResult::error(const std::string& name) const {
  for (size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return stdErrors(k);
  fail("invalid-params", "unknown fitted parameter " + name);
}

std::string FitResult::toJson() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\"converged\":" << (converged ? "true" : "false")
     << ",\"atBound\":" << (atBound ? "true" : "false") << ",\"residualNorm\":" << residualNorm
     << ",\"fitted\":{";
  for (size_t k = 0; k < names.size(); ++k)
    os << (k ? "," : "") << '"' << names[k] << "\":{\"value\":" << params(k)
       << ",\"stdError\":" << stdErrors(k) << '}';
  os << "},\"fixed\":{";
  bool first = true;
  for (const auto& [name, v] : fixedParams) {
    os << (first ? "" : ",") << '"' << name << "\":" << v;
    first = false;
  }
  os << "}}";
  return os.str();
}

namespace {

RealMat numericJacobian(const std::function<RealVec(const RealVec&)>& model, const RealVec& x,
                        int nData) {
  const int np = int(x.size());
  RealMat jac(nData, np);
  for (int p = 0; p < np; ++p) {
    // 1e-6 relative step; parameters sitting at zero get an absolute one.
    const double h = x(p) != 0.0 ? 1e-6 * std::abs(x(p)) : 1e-9;
    RealVec xp = x, xm = x;
    xp(p) += h;
    xm(p) -= h;
    jac.col(p) = (model(xp) - model(xm)) / (2.0 * h);
  }
  return jac;
}

RealVec clampToBounds(RealVec x, const RealVec& lo, const RealVec& hi) {
  if (lo.size()) x = x.cwiseMax(lo);
  if (hi.size()) x = x.cwiseMin(hi);
  return x;
}

}  // namespace

FitResult nonlinearLeastSquares(const std::function<RealVec(const RealVec&)>& model,
                                const RealVec& data, const RealVec& sigma, const RealVec& init,
                                const std::vector<std::string>& names,
                                const RealVec& lowerBounds, const RealVec& upperBounds,
                                const FitOptions& opts) {
  const int nData = int(data.size());
  const int np = int(init.size());
  if (!data.allFinite()) fail("invalid-params", "data contains non-finite values");
  if (int(names.size()) != np) fail("invalid-params", "parameter name count mismatch");
  RealVec weights = RealVec::Ones(nData);
  if (sigma.size()) {
    if (sigma.size() != nData) fail("invalid-params", "sigma length mismatch");
    weights = sigma.array().square().inverse();
  }
  RealVec x = clampToBounds(init, lowerBounds, upperBounds);

  auto cost = [&](const RealVec& p) {
    const RealVec r = model(p) - data;
    return (weights.array() * r.array().square()).sum();
  };

  double lambda = 1e-3;
  double c = cost(x);
  bool converged = false;
  for (int iter = 0; iter < opts.maxIterations && !converged; ++iter) {
    const RealVec r = model(x) - data;
    const RealMat jac = numericJacobian(model, x, nData);
    const RealMat jtw = jac.transpose() * weights.asDiagonal();
    const RealMat hess = jtw * jac;
    const RealVec grad = jtw * r;

    bool stepped = false;
    for (int tries = 0; tries < 60 && !stepped; ++tries) {
      RealMat damped = hess;
      damped.diagonal() += lambda * hess.diagonal().cwiseMax(1e-12);
      Eigen::LDLT<RealMat> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        lambda *= 10;
        continue;
      }
      const RealVec step = ldlt.solve(-grad);
      if (!step.allFinite()) {
        lambda *= 10;
        continue;
      }
      const RealVec xNew = clampToBounds(x + step, lowerBounds, upperBounds);
      const double cNew = cost(xNew);
      if (cNew <= c) {
        const double relDrop = (c - cNew) / std::max(c, 1e-300);
        const double relStep = (xNew - x).norm() / std::max(x.norm(), 1e-300);
        x = xNew;
        c = cNew;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (relDrop < opts.tolerance || relStep < 1e-14) converged = true;
      } else {
        lambda *= 10;
        if (lambda > 1e14) break;
      }
    }
    if (!stepped) {
      // No descent direction inside the box: accept if the projected
      // gradient vanishes (possibly at a bound), otherwise report failure.
      bool boundary = false;
      bool freeDescent = false;
      const double gradScale = std::max(1.0, std::sqrt(c)) *
                               std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      for (int p = 0; p < np; ++p) {
        const bool atLo = lowerBounds.size() && x(p) <= lowerBounds(p) && grad(p) > 0;
        const bool atHi = upperBounds.size() && x(p) >= upperBounds(p) && grad(p) < 0;
        if (atLo || atHi) boundary = true;
        else if (std::abs(grad(p)) > 1e-8 * gradScale) freeDescent = true;
      }
      if (freeDescent && !boundary) fail("singular-Jacobian", "no descent step found");
      converged = true;
    }
  }
  if (!converged) fail("max-iterations", "residual norm " + std::to_string(std::sqrt(c)));

  FitResult res;
  res.names = names;
  res.params = x;
  res.converged = true;
  res.residualNorm = std::sqrt(c);
  const RealVec rFinal = model(x) - data;
  const RealMat jacFinal = numericJacobian(model, x, nData);
  const RealVec gradFinal = jacFinal.transpose() * weights.asDiagonal() * rFinal;
  for (int p = 0; p < np; ++p) {
    const bool atLo = lowerBounds.size() && x(p) <= lowerBounds(p) && gradFinal(p) > 0;
    const bool atHi = upperBounds.size() && x(p) >= upperBounds(p) && gradFinal(p) < 0;
    if (atLo || atHi) res.atBound = true;
  }
  const RealMat hessFinal = jacFinal.transpose() * weights.asDiagonal() * jacFinal;
  Eigen::FullPivLU<RealMat> lu(hessFinal);
  if (!lu.isInvertible()) {
    res.stdErrors = RealVec::Constant(np, std::numeric_limits<double>::quiet_NaN());
    return res;
  }
  RealMat cov = lu.inverse();
  const double scale = sigma.size() ? 1.0 : c / std::max(1, nData - np);
  res.stdErrors = (scale * cov.diagonal().cwiseMax(0.0)).cwiseSqrt();
  return res;
}

double expRelDiff(double t, double k1, double k2) {
  // (exp(-k2 t) - exp(-k1 t)) / (k1 - k2)
  const double d = k1 - k2;
  const double x = d * t;
  if (std::abs(x) < 1e-6) return t * std::exp(-k2 * t) * (1.0 - 0.5 * x + x * x / 6.0);
  return std::exp(-k2 * t) * (1.0 - std::exp(-x)) / d;
}

namespace {

RealVec expModel(const RealVec& p, const RealVec& t) {
  return p(0) * (-t / p(1)).array().exp() + p(2);
}

RealVec doubleExpModel(const RealVec& p, const RealVec& t) {
  // p = (A, B, C, k1, k2)
  RealVec out(t.size());
  for (int k = 0; k < t.size(); ++k) {
    const double e2 = std::exp(-p(4) * t(k));
    const double mix = p(4) * expRelDiff(t(k), p(3), p(4));
    out(k) = p(0) * e2 + p(1) * mix + p(2) * (1.0 - e2 - mix);
  }
  return out;
}

RealVec lorentzianModel(const RealVec& p, const RealVec& x) {
  // p = (a, x0, w, c)
  return p(0) * p(2) * p(2) /
             ((x.array() - p(1)).square() + p(2) * p(2)) +
         p(3);
}

RealVec decayingSinusoidModel(const RealVec& p, const RealVec& t) {
  // p = (a, gamma, omega, phi, c)
  return p(0) * (-p(1) * t.array()).exp() * (p(2) * t.array() + p(3)).cos() + p(4);
}

int countSignChanges(const RealVec& y) {
  int n = 0;
  for (int k = 1; k < y.size(); ++k)
    if (y(k - 1) * y(k) < 0) ++n;
  return n;
}

}  // namespace

FitResult canonicalFits(CurveKind kind, const RealVec& x, const RealVec& y, const RealVec& sigma) {
  const int n = int(x.size());
  const double span = x(n - 1) - x(0);
  const double ymin = y.minCoeff(), ymax = y.maxCoeff();

  auto runFit = [&](auto&& fn, const RealVec& init, const std::vector<std::string>& names,
                    const RealVec& lo, const RealVec& hi) {
    if (n < 2 * int(names.size()))
      fail("invalid-params", "need at least 2x as many points as parameters");
    return nonlinearLeastSquares([&](const RealVec& p) { return fn(p, x); }, y, sigma, init,
                                 names, lo, hi);
  };

  switch (kind) {
    case CurveKind::exp: {
      RealVec init(3);
      init << y(0) - y(n - 1), std::max(span / 3.0, 1e-30), y(n - 1);
      return runFit(expModel, init, {"a", "tau", "c"}, {}, {});
    }
    case CurveKind::doubleExp: {
      RealVec init(5);
      const double kGuess = 3.0 / std::max(span, 1e-30);
      init << y(0), y(n - 1), 0.5 * (ymin + ymax), kGuess / 3.0, kGuess;
      RealVec lo(5), hi(5);
      lo << -1e300, -1e300, -1e300, 0, 0;
      hi << 1e300, 1e300, 1e300, 1e300, 1e300;
      return runFit(doubleExpModel, init, {"A", "B", "C", "k1", "k2"}, lo, hi);
    }
    case CurveKind::lorentzian: {
      // Median baseline, extremum center.
      RealVec sorted = y;
      std::sort(sorted.data(), sorted.data() + n);
      const double c0 = sorted(n / 2);
      int peak = 0;
      (y.array() - c0).abs().maxCoeff(&peak);
      RealVec init(4);
      init << y(peak) - c0, x(peak), std::max(span / 10.0, 1e-30), c0;
      return runFit(lorentzianModel, init, {"a", "x0", "w", "c"}, {}, {});
    }
    case CurveKind::decayingSinusoid: {
      const double c0 = y.mean();
      const double a0 = 0.5 * (ymax - ymin);
      const int crossings = countSignChanges(y.array() - c0);
      const double omega0 = std::max(crossings, 1) * M_PI / std::max(span, 1e-30);
      // Envelope decay from the two halves of |y - c|.
      const int half = n / 2;
      const double a1 = (y.head(half).array() - c0).abs().maxCoeff();
      const double a2 = (y.tail(n - half).array() - c0).abs().maxCoeff();
      double gamma0 = 0;
      if (a1 > 0 && a2 > 0 && a2 < a1) gamma0 = std::log(a1 / a2) / (0.5 * span);
      RealVec best;
      double bestCost = std::numeric_limits<double>::infinity();
      FitResult bestRes;
      for (double scale : {1.0, 0.5, 2.0}) {
        RealVec init(5);
        init << a0, gamma0, omega0 * scale, std::acos(std::clamp((y(0) - c0) / std::max(a0, 1e-30), -1.0, 1.0)), c0;
        try {
          FitResult res = runFit(decayingSinusoidModel, init,
                                 {"a", "gamma", "omega", "phi", "c"}, {}, {});
          if (res.residualNorm < bestCost) {
            bestCost = res.residualNorm;
            bestRes = res;
            best = res.params;
          }
        } catch (const Error&) {
          // try the next frequency guess
        }
      }
      if (!best.size()) fail("fit-failure", "decaying sinusoid fit failed for all initial guesses");
      return bestRes;
    }
  }
  fail("invalid-params", "unknown curve kind");
}

std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

McSummary monteCarloPropagate(
    const std::function<std::optional<McSample>(const RealVec&)>& solver,
    const std::vector<GaussianSpec>& inputDists, int n, std::uint64_t seed, int jobs) {
  if (n < 100) fail("invalid-params", "Monte Carlo needs n >= 100");
  constexpr int kBatches = 64;
  struct Batch {
    double sumV = 0, sumV2 = 0, sumS2 = 0;
    int count = 0, failures = 0;
  };
  std::vector<Batch> batches(kBatches);

  auto runBatch = [&](int b) {
    std::mt19937_64 rng(deriveSeed(seed, std::uint64_t(b)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int lo = int(std::int64_t(n) * b / kBatches);
    const int hi = int(std::int64_t(n) * (b + 1) / kBatches);
    RealVec draw(inputDists.size());
    for (int s = lo; s < hi; ++s) {
      for (size_t d = 0; d < inputDists.size(); ++d)
        draw(d) = inputDists[d].mean + inputDists[d].sigma * gauss(rng);
      auto res = solver(draw);
      if (!res) {
        ++batches[b].failures;
        continue;
      }
      batches[b].sumV += res->value;
      batches[b].sumV2 += res->value * res->value;
      batches[b].sumS2 += res->conditionalSigma * res->conditionalSigma;
      ++batches[b].count;
    }
  };

  if (jobs <= 1) {
    for (int b = 0; b < kBatches; ++b) runBatch(b);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w)
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < kBatches; b = next.fetch_add(1)) runBatch(b);
      });
    for (auto& th : pool) th.join();
  }

  McSummary out;
  double sumV = 0, sumV2 = 0, sumS2 = 0;
  int count = 0;
  for (const auto& b : batches) {
    sumV += b.sumV;
    sumV2 += b.sumV2;
    sumS2 += b.sumS2;
    count += b.count;
    out.failures += b.failures;
  }
  if (out.failures > n / 20)
    fail("propagation-unreliable", std::to_string(out.failures) + " of " + std::to_string(n) +
                                       " solver draws failed");
  out.mean = sumV / count;
  out.varianceOfMeans = std::max(0.0, sumV2 / count - out.mean * out.mean);
  out.meanConditionalVariance = sumS2 / count;
  out.totalVariance = out.varianceOfMeans + out.meanConditionalVariance;
  return out;
}

}  // namespace kerrcat::fitting
