#include "kerrcat/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kerrcat/hilbert.hpp"

namespace kerrcat::dynamics {

using hilbert::tensorEmbed;

void LindbladModel::validate() const {
  if (hamiltonian.rows() != hamiltonian.cols()) fail("invalid-model", "Hamiltonian must be square");
  for (const auto& j : jumps) {
    if (!(j.rate >= 0) || !std::isfinite(j.rate)) fail("invalid-model", "jump rate must be finite and >= 0");
    if (j.op.rows() != hamiltonian.rows() || j.op.cols() != hamiltonian.cols())
      fail("invalid-model", "jump operator dimension mismatch");
  }
}

void DensityState::validate() const {
  if (matrix.rows() != matrix.cols()) fail("invalid-state", "density matrix must be square");
  if (!isHermitian(matrix, 1e-10)) fail("invalid-state", "density matrix not Hermitian to 1e-10");
  if (std::abs(matrix.trace().real() - 1.0) > 1e-9 || std::abs(matrix.trace().imag()) > 1e-9)
    fail("invalid-state", "density matrix trace differs from 1 beyond 1e-9");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (matrix + Mat(matrix.adjoint())));
  if (es.eigenvalues().minCoeff() < -1e-9)
    fail("invalid-state", "density matrix has eigenvalue below -1e-9");
}

void RampProfile::validate() const {
  if (!(duration > 0)) fail("invalid-params", "ramp duration must be > 0");
  if (kind != Kind::constant && !(sigma > 0)) fail("invalid-params", "Gaussian ramp needs sigma > 0");
}

double RampProfile::value(double t) const {
  switch (kind) {
    case Kind::constant:
      return endValue;
    case Kind::gaussianRise: {
      if (t >= duration) return endValue;
      const double g = std::exp(-0.5 * (t - duration) * (t - duration) / (sigma * sigma));
      return startValue + (endValue - startValue) * g;
    }
    case Kind::flatTop: {
      const double rise = 2.5 * sigma;
      if (t < rise)
        return startValue + (endValue - startValue) *
                                std::exp(-0.5 * (t - rise) * (t - rise) / (sigma * sigma));
      if (t <= rise + duration) return endValue;
      const double tf = t - rise - duration;
      return startValue + (endValue - startValue) * std::exp(-0.5 * tf * tf / (sigma * sigma));
    }
  }
  return endValue;
}

Mat buildLiouvillian(const LindbladModel& m) {
  m.validate();
  const int n = m.dim();
  const Mat eye = Mat::Identity(n, n);
  const Complex i1(0, 1);
  Mat liou = -i1 * (tensorEmbed(eye, m.hamiltonian) - tensorEmbed(m.hamiltonian.transpose(), eye));
  for (const auto& j : m.jumps) {
    if (j.rate == 0) continue;
    const Mat odo = j.op.adjoint() * j.op;
    liou += j.rate * (tensorEmbed(j.op.conjugate(), j.op) - 0.5 * tensorEmbed(eye, odo) -
                      0.5 * tensorEmbed(odo.transpose(), eye));
  }
  return liou;
}

namespace {

Vec vecOf(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Mat unvec(const Vec& v, int n) { return Eigen::Map<const Mat>(v.data(), n, n); }

Mat hermitize(const Mat& m) { return 0.5 * (m + Mat(m.adjoint())); }

// Cash-Karp embedded RK45 with step control, on vec(rho).
Vec adaptiveStep(const Mat& liou, Vec v, double tEnd, double relTol) {
  double t = 0;
  const double scale = std::max(1.0, liou.cwiseAbs().rowwise().sum().maxCoeff());
  double dt = std::min(tEnd, 0.1 / scale);
  const int n = int(v.size());
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n);
  while (t < tEnd) {
    dt = std::min(dt, tEnd - t);
    k1 = liou * v;
    k2 = liou * (v + dt * 0.2 * k1);
    k3 = liou * (v + dt * (0.075 * k1 + 0.225 * k2));
    k4 = liou * (v + dt * (0.3 * k1 - 0.9 * k2 + 1.2 * k3));
    k5 = liou * (v + dt * (-11.0 / 54 * k1 + 2.5 * k2 - 70.0 / 27 * k3 + 35.0 / 27 * k4));
    k6 = liou * (v + dt * (1631.0 / 55296 * k1 + 175.0 / 512 * k2 + 575.0 / 13824 * k3 +
                           44275.0 / 110592 * k4 + 253.0 / 4096 * k5));
    Vec v5 = v + dt * (37.0 / 378 * k1 + 250.0 / 621 * k3 + 125.0 / 594 * k4 + 512.0 / 1771 * k6);
    Vec v4 = v + dt * (2825.0 / 27648 * k1 + 18575.0 / 48384 * k3 + 13525.0 / 55296 * k4 +
                       277.0 / 14336 * k5 + 0.25 * k6);
    const double err = (v5 - v4).norm() / std::max(v.norm(), 1e-300);
    if (err <= relTol || dt <= 1e-18 * tEnd) {
      t += dt;
      v = std::move(v5);
    }
    const double grow = err > 0 ? 0.9 * std::pow(relTol / err, 0.2) : 5.0;
    dt *= std::clamp(grow, 0.1, 5.0);
  }
  return v;
}

struct SpectralPropagator {
  Eigen::ComplexEigenSolver<Mat> solver;
  Vec coeffs;
  bool ok = false;

  SpectralPropagator(const Mat& liou, const Vec& v0) {
    solver.compute(liou);
    if (solver.info() != Eigen::Success) return;
    Eigen::PartialPivLU<Mat> lu(solver.eigenvectors());
    coeffs = lu.solve(v0);
    const double recon = (solver.eigenvectors() * coeffs - v0).norm();
    ok = recon <= 1e-8 * std::max(1.0, v0.norm());
  }

  Vec at(double t) const {
    const Vec phase = (solver.eigenvalues().array() * t).exp();
    return solver.eigenvectors() * (coeffs.array() * phase.array()).matrix();
  }
};

}  // namespace

std::vector<DensityState> evolve(const LindbladModel& m, const DensityState& rho0,
                                 const std::vector<double>& times, const EvolveOptions& opts) {
  m.validate();
  if (rho0.matrix.rows() != m.dim()) fail("invalid-model", "state dimension mismatch");
  const int n = m.dim();
  const Mat liou = buildLiouvillian(m);
  const Vec v0 = vecOf(rho0.matrix);

  std::vector<DensityState> out;
  out.reserve(times.size());
  SpectralPropagator prop(liou, v0);
  bool spectralOk = prop.ok;
  if (spectralOk) {
    for (double t : times) {
      Mat rho = hermitize(unvec(prop.at(t), n));
      out.push_back({rho, rho0.basisTag, rho0.factorDims});
    }
    const double drift = std::abs(out.back().matrix.trace().real() - rho0.matrix.trace().real());
    if (drift > opts.traceTol) spectralOk = false;
  }
  if (!spectralOk) {
    if (!opts.allowFallback) fail("propagation-failure", "Liouvillian not reliably diagonalizable");
    out.clear();
    for (double t : times) {
      Mat rho = hermitize(unvec(adaptiveStep(liou, v0, t, 1e-11), n));
      out.push_back({rho, rho0.basisTag, rho0.factorDims});
    }
    const double drift = std::abs(out.back().matrix.trace().real() - rho0.matrix.trace().real());
    if (drift > opts.traceTol) fail("propagation-failure", "trace drift above bound after fallback");
  }
  return out;
}

DensityState evolveTimeDependent(const std::function<Mat(double)>& hOf,
                                 const std::vector<Jump>& jumps, const DensityState& rho0,
                                 double tEnd, double dtMax) {
  if (!(tEnd > 0) || !(dtMax > 0)) fail("invalid-params", "tEnd and dtMax must be positive");
  const int n = int(rho0.matrix.rows());
  const long steps = long(std::ceil(tEnd / dtMax));
  const double dt = tEnd / double(steps);
  const Complex i1(0, 1);

  // Pure state with no jumps: integrate the state vector itself.
  const bool pure = jumps.empty() && std::abs((rho0.matrix * rho0.matrix).trace().real() - 1.0) < 1e-9;
  if (pure) {
    Eigen::SelfAdjointEigenSolver<Mat> es(rho0.matrix);
    int maxIdx = 0;
    es.eigenvalues().maxCoeff(&maxIdx);
    Vec psi = es.eigenvectors().col(maxIdx);
    auto rhs = [&](const Mat& h, const Vec& v) -> Vec { return -i1 * (h * v); };
    Vec k1(n), k2(n), k3(n), k4(n);
    double t = 0;
    for (long s = 0; s < steps; ++s) {
      const Mat h0 = hOf(t), h1 = hOf(t + 0.5 * dt), h2 = hOf(t + dt);
      k1 = rhs(h0, psi);
      k2 = rhs(h1, psi + 0.5 * dt * k1);
      k3 = rhs(h1, psi + 0.5 * dt * k2);
      k4 = rhs(h2, psi + dt * k3);
      psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += dt;
    }
    const double drift = std::abs(psi.norm() - 1.0);
    if (drift > 1e-7) fail("step-size-too-large", "norm drift " + std::to_string(drift));
    psi.normalize();
    return {psi * psi.adjoint(), rho0.basisTag, rho0.factorDims};
  }

  std::vector<Mat> odo;
  odo.reserve(jumps.size());
  for (const auto& j : jumps) odo.push_back(j.op.adjoint() * j.op);
  auto rhs = [&](const Mat& h, const Mat& rho) -> Mat {
    Mat d = -i1 * (h * rho - rho * h);
    for (size_t k = 0; k < jumps.size(); ++k) {
      if (jumps[k].rate == 0) continue;
      d += jumps[k].rate * (jumps[k].op * rho * jumps[k].op.adjoint() -
                            0.5 * (odo[k] * rho + rho * odo[k]));
    }
    return d;
  };
  Mat rho = rho0.matrix;
  double t = 0;
  for (long s = 0; s < steps; ++s) {
    const Mat h0 = hOf(t), h1 = hOf(t + 0.5 * dt), h2 = hOf(t + dt);
    const Mat k1 = rhs(h0, rho);
    const Mat k2 = rhs(h1, rho + 0.5 * dt * k1);
    const Mat k3 = rhs(h1, rho + 0.5 * dt * k2);
    const Mat k4 = rhs(h2, rho + dt * k3);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
  }
  const double drift = std::abs(rho.trace().real() - rho0.matrix.trace().real());
  if (drift > 1e-7) fail("step-size-too-large", "trace drift " + std::to_string(drift));
  rho = hermitize(rho);
  rho /= rho.trace().real();
  return {rho, rho0.basisTag, rho0.factorDims};
}

DensityState steadyState(const LindbladModel& m, const SteadyStateOptions& opts) {
  m.validate();
  const int n = m.dim();
  Mat liou = buildLiouvillian(m);

  const bool check = opts.checkUniqueness == 1 || (opts.checkUniqueness == 2 && n <= 24);
  if (check) {
    Eigen::ComplexEigenSolver<Mat> es(liou, /*computeEigenvectors=*/false);
    RealVec re = es.eigenvalues().real().cwiseAbs();
    std::sort(re.data(), re.data() + re.size());
    const double floor = std::max(re(0), 1e-14 * liou.cwiseAbs().maxCoeff());
    if (re(1) <= 1e3 * floor)
      fail("non-unique-steady-state", "second-smallest |Re eigenvalue| too close to zero");
  }

  // Trace row replaces the first row of L.
  Mat sys = liou;
  Vec rhsVec = Vec::Zero(n * n);
  for (int c = 0; c < n * n; ++c) sys(0, c) = 0;
  for (int k = 0; k < n; ++k) sys(0, k * n + k) = 1.0;
  rhsVec(0) = 1.0;
  Vec x = sys.partialPivLu().solve(rhsVec);
  if (!x.allFinite()) x = sys.fullPivLu().solve(rhsVec);

  Mat rho = hermitize(unvec(x, n));
  rho /= rho.trace().real();
  const double residual = (liou * vecOf(rho)).cwiseAbs().maxCoeff();
  const double lscale = liou.norm();
  if (!(residual < 1e-10 * std::max(lscale, 1.0)))
    fail("non-unique-steady-state", "steady-state residual " + std::to_string(residual) +
                                        " too large for |L| = " + std::to_string(lscale));

  Eigen::SelfAdjointEigenSolver<Mat> es(rho);
  const double minEig = es.eigenvalues().minCoeff();
  if (minEig < -1e-8)
    fail("psd-violation", "steady state has eigenvalue " + std::to_string(minEig));
  if (minEig < 0) {
    RealVec clipped = es.eigenvalues().cwiseMax(0.0);
    rho = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
    rho /= rho.trace().real();
  }
  return {rho, m.basisTag, {}};
}

namespace {

struct SectorSelection {
  std::vector<int> indices;  // vec-space indices belonging to the sector
};

// Sector of vec index (r + c n) is parity(r)*parity(c).
std::optional<SectorSelection> observableSector(const Mat& obs, const Eigen::VectorXi& parity) {
  const int n = int(obs.rows());
  const double scale = obs.cwiseAbs().maxCoeff();
  int sector = 0;
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) {
      if (std::abs(obs(r, c)) <= 1e-12 * scale) continue;
      const int s = parity(r) * parity(c);
      if (sector == 0) sector = s;
      else if (sector != s) return std::nullopt;
    }
  if (sector == 0) return std::nullopt;
  SectorSelection sel;
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r)
      if (parity(r) * parity(c) == sector) sel.indices.push_back(r + c * n);
  return sel;
}

Mat restrict(const Mat& liou, const std::vector<int>& idx) {
  Mat out(idx.size(), idx.size());
  for (size_t j = 0; j < idx.size(); ++j)
    for (size_t i = 0; i < idx.size(); ++i) out(i, j) = liou(idx[i], idx[j]);
  return out;
}

// Verifies the sector is actually invariant under L (weak symmetry).
bool sectorClosed(const Mat& liou, const std::vector<int>& idx) {
  const int nn = int(liou.rows());
  std::vector<char> in(nn, 0);
  for (int k : idx) in[k] = 1;
  const double scale = std::max(liou.cwiseAbs().maxCoeff(), 1e-300);
  for (int k : idx)
    for (int r = 0; r < nn; ++r)
      if (!in[r] && std::abs(liou(r, k)) > 1e-10 * scale) return false;
  return true;
}

}  // namespace

std::vector<double> expectationTimeline(const LindbladModel& m, const DensityState& rho0,
                                        const Mat& obs, const std::vector<double>& times,
                                        const Eigen::VectorXi* stateParity) {
  m.validate();
  const Mat liou = buildLiouvillian(m);
  const Vec v0 = vecOf(rho0.matrix);
  const Vec w = vecOf(Mat(obs.adjoint()));  // Tr[O rho] = vec(O^dag)^dag vec(rho)

  if (stateParity) {
    auto sel = observableSector(obs, *stateParity);
    if (sel && sectorClosed(liou, sel->indices)) {
      const auto& idx = sel->indices;
      Mat ls = restrict(liou, idx);
      Vec vs(idx.size()), ws(idx.size());
      for (size_t k = 0; k < idx.size(); ++k) {
        vs(k) = v0(idx[k]);
        ws(k) = w(idx[k]);
      }
      SpectralPropagator prop(ls, vs);
      if (prop.ok) {
        std::vector<double> out;
        out.reserve(times.size());
        for (double t : times) out.push_back(ws.dot(prop.at(t)).real());
        return out;
      }
    }
    logInfo("expectationTimeline: parity-sector fast path unavailable, using full space");
  }

  SpectralPropagator prop(liou, v0);
  if (prop.ok) {
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(w.dot(prop.at(t)).real());
    return out;
  }
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(w.dot(adaptiveStep(liou, v0, t, 1e-11)).real());
  return out;
}

double slowestDecayRate(const LindbladModel& m, const Mat& observable,
                        const Eigen::VectorXi* stateParity) {
  m.validate();
  Mat liou = buildLiouvillian(m);
  const Vec w = vecOf(observable);

  Vec evals;
  Mat evecs;
  std::vector<int> idx;  // empty means full space
  if (stateParity) {
    auto sel = observableSector(observable, *stateParity);
    if (sel && sectorClosed(liou, sel->indices)) idx = sel->indices;
  }
  if (!idx.empty()) {
    Eigen::ComplexEigenSolver<Mat> es(restrict(liou, idx));
    if (es.info() != Eigen::Success) fail("propagation-failure", "sector eigensolve failed");
    evals = es.eigenvalues();
    evecs = es.eigenvectors();
  } else {
    Eigen::ComplexEigenSolver<Mat> es(liou);
    if (es.info() != Eigen::Success) fail("propagation-failure", "Liouvillian eigensolve failed");
    evals = es.eigenvalues();
    evecs = es.eigenvectors();
  }

  Vec wSel;
  if (idx.empty()) {
    wSel = w;
  } else {
    wSel.resize(idx.size());
    for (size_t k = 0; k < idx.size(); ++k) wSel(k) = w(idx[k]);
  }

  // Exclude the steady mode (only present when the sector holds the trace).
  int steady = -1;
  if (idx.empty()) evals.cwiseAbs().minCoeff(&steady);
  const double wNorm = wSel.norm();
  struct Mode {
    double overlap, rate;
  };
  std::vector<Mode> modes;
  for (int k = 0; k < evals.size(); ++k) {
    if (k == steady) continue;
    const double overlap = std::abs(wSel.dot(evecs.col(k))) / (wNorm * evecs.col(k).norm());
    modes.push_back({overlap, -evals(k).real()});
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.overlap > b.overlap; });
  if (modes.empty()) fail("ambiguous-mode", "no decaying modes available");
  // Conjugate partners and exact degeneracies share the rate; ambiguity only
  // matters when distinct rates compete at similar overlap.
  for (size_t k = 1; k < modes.size(); ++k) {
    if (modes[k].overlap < 0.9 * modes[0].overlap) break;
    const double r0 = modes[0].rate, rk = modes[k].rate;
    if (std::abs(r0 - rk) > 0.01 * std::max(std::abs(r0), std::abs(rk)))
      fail("ambiguous-mode", "top two mode overlaps within 10% at distinct rates");
  }
  return modes[0].rate;
}

Complex expectation(const DensityState& state, const Mat& op) {
  if (op.rows() != state.matrix.rows() || op.cols() != state.matrix.cols())
    fail("invalid-shape", "observable dimension mismatch");
  return (op * state.matrix).trace();
}

Mat partialTraceSecond(const Mat& rho, int dimA, int dimB) {
  if (rho.rows() != dimA * dimB || rho.cols() != dimA * dimB)
    fail("invalid-shape", "partial trace dimension mismatch");
  Mat out = Mat::Zero(dimA, dimA);
  for (int i = 0; i < dimA; ++i)
    for (int j = 0; j < dimA; ++j)
      for (int k = 0; k < dimB; ++k) out(i, j) += rho(i * dimB + k, j * dimB + k);
  return out;
}

std::string timeSeriesCsv(const std::vector<double>& times,
                          const std::vector<std::pair<std::string, std::vector<double>>>& series) {
  std::ostringstream os;
  os.precision(12);
  os << "time_s,observable_name,value\n";
  for (const auto& [name, values] : series)
    for (size_t k = 0; k < times.size(); ++k)
      os << times[k] << ',' << name << ',' << values[k] << '\n';
  return os.str();
}

}  // namespace kerrcat::dynamics
