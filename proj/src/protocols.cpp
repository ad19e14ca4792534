#include "kerrcat/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <memory>
#include <cmath>
#include <thread>

#include "kerrcat/hilbert.hpp"

namespace kerrcat::protocols {

using dynamics::DensityState;
using dynamics::Jump;
using dynamics::LindbladModel;
using fitting::expRelDiff;

void DecoherenceRates::validate() const {
  for (double r : {k1_01, k1_12, kphi_01, kphi_12, kup_01, kup_12})
    if (r < 0 || !std::isfinite(r)) fail("invalid-params", "decoherence rates must be finite and >= 0");
}

double ReadoutContrasts::operator[](int i) const {
  switch (i) {
    case 0: return m0;
    case 1: return m1;
    case 2: return m2;
    case 3: return m3;
  }
  fail("invalid-params", "contrast index out of range");
}

// ---------------------------------------------------------------------------
// Dispersive readout model

ReadoutContrasts cavityReadoutModel(const CavityParams& cav, const ManifoldSpectrum& spec,
                                    double probeOffset) {
  cav.validate();
  if (spec.pairCount() < 4)
    fail("invalid-state", "readout model needs mean photon numbers for manifolds 0..3");
  double nbar[4];
  for (int i = 0; i < 4; ++i)
    nbar[i] = 0.5 * (spec.meanPhotons(spec.stateIndex(i, +1)) +
                     spec.meanPhotons(spec.stateIndex(i, -1)));

  const double kTot = cav.kappaB();
  const double probe = cav.chiAb * nbar[0] + probeOffset;
  double phases[4];
  for (int i = 0; i < 4; ++i) {
    const double det = probe - cav.chiAb * nbar[i];
    const Complex s11 = 1.0 - cav.kappaOut / (Complex(0.5 * kTot, det));
    phases[i] = std::arg(s11);
  }
  // Keep all phases on the branch containing M0.
  for (int i = 1; i < 4; ++i) {
    while (phases[i] - phases[0] > M_PI) phases[i] -= kTwoPi;
    while (phases[i] - phases[0] < -M_PI) phases[i] += kTwoPi;
  }
  return {phases[0], phases[1], phases[2], phases[3]};
}

// ---------------------------------------------------------------------------
// Closed-form manifold coherence signals

CoherenceSignals manifoldCoherenceSignals(const DecoherenceRates& rates,
                                          const ReadoutContrasts& m, double deltaOmega,
                                          const std::vector<double>& times) {
  rates.validate();
  const double k01 = rates.k1_01, k12 = rates.k1_12;
  const double g01 = 0.5 * k01 + rates.kphi_01;
  const double g12 = 0.5 * k12 + rates.kphi_12;

  CoherenceSignals out;
  out.t1_01.reserve(times.size());
  out.tphi_01.reserve(times.size());
  out.t1_12.reserve(times.size());
  out.tphi_12.reserve(times.size());
  for (double t : times) {
    const double e01 = std::exp(-k01 * t);
    out.t1_01.push_back(m.m1 * e01 + m.m0 * (1.0 - e01));
    out.tphi_01.push_back(0.5 * (m.m1 + m.m0) +
                          0.5 * (m.m1 - m.m0) * std::cos(deltaOmega * t) * std::exp(-g01 * t));

    const double e12 = std::exp(-k12 * t);
    const double cascade = k12 * expRelDiff(t, k01, k12);
    out.t1_12.push_back(m.m2 * e12 + m.m0 * cascade + m.m1 * (1.0 - e12 - cascade));

    const double r22 = 0.25 * e12;
    // Manifold-1 population: the quarter prepared initially plus the cascade
    // fed from manifold 2.
    const double r11 = 0.25 * std::exp(-k01 * t) + 0.25 * cascade;
    const double r00 = 0.5 - r11 - r22;
    out.tphi_12.push_back(2.0 * m.m1 * r00 + (m.m2 + m.m0) * (r11 + r22) +
                          0.5 * (m.m2 - m.m0) * std::cos(deltaOmega * t) *
                              std::exp(-(g01 + g12) * t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reduced three-manifold pulse engine

namespace {

// Projected oscillator restricted to the lowest nManifolds complete pairs,
// state order (0+, 0-, 1+, 1-, ...).
struct ManifoldSystem {
  RealVec energies;  // per state, descending manifold order
  Mat a;             // annihilation operator restricted to these states
  int nManifolds = 0;

  int dim() const { return 2 * nManifolds; }
  static int index(int manifold, int parity) { return 2 * manifold + (parity > 0 ? 0 : 1); }
  Mat projector(int manifold) const {
    Mat p = Mat::Zero(dim(), dim());
    p(index(manifold, +1), index(manifold, +1)) = 1.0;
    p(index(manifold, -1), index(manifold, -1)) = 1.0;
    return p;
  }
  double pairMean(int manifold) const {
    return 0.5 * (energies(index(manifold, +1)) + energies(index(manifold, -1)));
  }
};

ManifoldSystem restrictToManifolds(const ProjectedOscillator& proj, int nManifolds) {
  if (int(proj.pairMeanEnergies.size()) < nManifolds)
    fail("invalid-state", "projection holds fewer than " + std::to_string(nManifolds) +
                              " complete manifolds");
  ManifoldSystem sys;
  sys.nManifolds = nManifolds;
  std::vector<int> cols(2 * nManifolds);
  for (int i = 0; i < nManifolds; ++i) {
    cols[ManifoldSystem::index(i, +1)] = proj.stateIndex(i, +1);
    cols[ManifoldSystem::index(i, -1)] = proj.stateIndex(i, -1);
  }
  sys.energies.resize(2 * nManifolds);
  sys.a.resize(2 * nManifolds, 2 * nManifolds);
  for (int r = 0; r < 2 * nManifolds; ++r) {
    sys.energies(r) = proj.energies(cols[r]);
    for (int c = 0; c < 2 * nManifolds; ++c) sys.a(r, c) = proj.a(cols[r], cols[c]);
  }
  return sys;
}

std::vector<Jump> manifoldJumps(const ManifoldSystem& sys, const DecoherenceRates& rates) {
  std::vector<Jump> jumps;
  auto ket = [&](int m, int p) {
    Vec v = Vec::Zero(sys.dim());
    v(ManifoldSystem::index(m, p)) = 1.0;
    return v;
  };
  auto parityFlippedLowering = [&](int from, int to) {
    Mat op = Mat::Zero(sys.dim(), sys.dim());
    op += ket(to, +1) * ket(from, -1).adjoint();
    op += ket(to, -1) * ket(from, +1).adjoint();
    return op;
  };
  if (rates.k1_01 > 0) jumps.push_back({rates.k1_01, parityFlippedLowering(1, 0)});
  if (rates.kphi_01 > 0) jumps.push_back({2.0 * rates.kphi_01, sys.projector(1)});
  if (sys.nManifolds > 2) {
    if (rates.k1_12 > 0) jumps.push_back({rates.k1_12, parityFlippedLowering(2, 1)});
    if (rates.kphi_12 > 0) jumps.push_back({2.0 * rates.kphi_12, sys.projector(2)});
    if (rates.kup_12 > 0) jumps.push_back({rates.kup_12, parityFlippedLowering(1, 2)});
  }
  if (rates.kup_01 > 0) jumps.push_back({rates.kup_01, parityFlippedLowering(0, 1)});
  return jumps;
}

struct PulseSpec {
  int from = 0, to = 1;     // manifold pair the carrier addresses
  double amplitudeScale = 0;  // in pi-pulse units for that pair
};

double gaussianEnvelopeArea(double length, double sigma) {
  // Simpson quadrature of exp(-(t - L/2)^2 / (2 sigma^2)) over [0, L].
  const int n = 400;
  const double h = length / n;
  auto f = [&](double t) {
    const double u = (t - 0.5 * length) / sigma;
    return std::exp(-0.5 * u * u);
  };
  double s = f(0) + f(length);
  for (int k = 1; k < n; ++k) s += f(k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// The drive at the (lo, hi) transition frequency survives the rotating-wave
// approximation through the lowering-operator element from the higher
// manifold index into the lower one (the spectrum is inverted, so this is
// the energy-raising direction); mean magnitude over the parity channels.
double resonantElement(const ManifoldSystem& sys, int lo, int hi) {
  const double m1 = std::abs(sys.a(ManifoldSystem::index(lo, +1), ManifoldSystem::index(hi, -1)));
  const double m2 = std::abs(sys.a(ManifoldSystem::index(lo, -1), ManifoldSystem::index(hi, +1)));
  return 0.5 * (m1 + m2);
}

// Sequential pulses in each pulse's own rotating frame, with exact phase
// stitching at the boundaries.
Mat runPulseSequence(const ManifoldSystem& sys, const std::vector<Jump>& jumps, Mat rho,
                     const std::vector<PulseSpec>& pulses, const RabiContrastSettings& cfg) {
  const int d = sys.dim();
  double tStart = 0;
  double prevFrame = 0;
  for (const auto& pulse : pulses) {
    const double omegaD = sys.pairMean(pulse.to) - sys.pairMean(pulse.from);
    // Frame switch: rho -> W rho W^dag with W = diag(exp(-i (w2 - w1) n t)).
    if (tStart > 0 && omegaD != prevFrame) {
      Vec w(d);
      for (int s = 0; s < d; ++s) {
        const int manifold = s / 2;
        w(s) = std::exp(Complex(0, -1) * (prevFrame - omegaD) * double(manifold) * tStart);
      }
      rho = w.asDiagonal() * rho * w.asDiagonal().toDenseMatrix().adjoint();
    }
    prevFrame = omegaD;

    Vec diag(d);
    for (int s = 0; s < d; ++s) diag(s) = sys.energies(s) - omegaD * double(s / 2);
    diag.array() -= diag(0);
    const int lo = std::min(pulse.from, pulse.to), hi = std::max(pulse.from, pulse.to);
    const Mat drive = sys.projector(lo) * sys.a * sys.projector(hi);
    const Mat driveH = drive + drive.adjoint();

    const double area = gaussianEnvelopeArea(cfg.pulseLength, cfg.pulseSigma);
    const double piAmp = M_PI / (2.0 * resonantElement(sys, lo, hi) * area);
    const double omega0 = pulse.amplitudeScale * piAmp;

    auto hOf = [&](double t) -> Mat {
      const double u = (t - 0.5 * cfg.pulseLength) / cfg.pulseSigma;
      return Mat(diag.asDiagonal()) + (omega0 * std::exp(-0.5 * u * u)) * driveH;
    };
    const double content = diag.cwiseAbs().maxCoeff() + std::abs(omega0) * driveH.norm() + 1.0;
    const double dtMax = 1.0 / (50.0 * content);
    DensityState st{rho, "eigen", {}};
    st = dynamics::evolveTimeDependent(hOf, jumps, st, cfg.pulseLength, dtMax);
    rho = st.matrix;
    tStart += cfg.pulseLength;
  }
  return rho;
}

// Carrier-resolved propagation in the manifold basis (cross-check mode).
Mat runPulseSequenceFull(const ManifoldSystem& sys, const std::vector<Jump>& jumps, Mat rho,
                         const std::vector<PulseSpec>& pulses, const RabiContrastSettings& cfg) {
  double tStart = 0;
  const Mat diag = sys.energies.cast<Complex>().asDiagonal();
  for (const auto& pulse : pulses) {
    const double omegaD = sys.pairMean(pulse.to) - sys.pairMean(pulse.from);
    const int lo = std::min(pulse.from, pulse.to), hi = std::max(pulse.from, pulse.to);
    const double area = gaussianEnvelopeArea(cfg.pulseLength, cfg.pulseSigma);
    const double piAmp = M_PI / (2.0 * resonantElement(sys, lo, hi) * area);
    const double omega0 = pulse.amplitudeScale * piAmp;
    auto hOf = [&](double t) -> Mat {
      const double u = (t - 0.5 * cfg.pulseLength) / cfg.pulseSigma;
      const double env = omega0 * std::exp(-0.5 * u * u);
      const Complex phase = std::exp(Complex(0, 1) * omegaD * (t + tStart));
      return diag + env * (phase * sys.a + std::conj(phase) * sys.a.adjoint());
    };
    const double content =
        sys.energies.cwiseAbs().maxCoeff() + std::abs(omegaD) + std::abs(omega0) * sys.a.norm();
    DensityState st{rho, "eigen", {}};
    st = dynamics::evolveTimeDependent(hOf, jumps, st, cfg.pulseLength, 1.0 / (50.0 * content));
    rho = st.matrix;
    tStart += cfg.pulseLength;
  }
  return rho;
}

Mat contrastObservable(const ManifoldSystem& sys, const ReadoutContrasts& m) {
  Mat obs = Mat::Zero(sys.dim(), sys.dim());
  for (int i = 0; i < sys.nManifolds; ++i) {
    obs(ManifoldSystem::index(i, +1), ManifoldSystem::index(i, +1)) = m[i];
    obs(ManifoldSystem::index(i, -1), ManifoldSystem::index(i, -1)) = m[i];
  }
  return obs;
}

Mat mixtureState(const ManifoldSystem& sys, double p0, double p1, double p2) {
  Mat rho = Mat::Zero(sys.dim(), sys.dim());
  const double pops[3] = {p0, p1, p2};
  for (int i = 0; i < std::min(3, sys.nManifolds); ++i) {
    rho(ManifoldSystem::index(i, +1), ManifoldSystem::index(i, +1)) = 0.5 * pops[i];
    rho(ManifoldSystem::index(i, -1), ManifoldSystem::index(i, -1)) = 0.5 * pops[i];
  }
  return rho;
}

void checkReducedModelApplies(const ProjectedOscillator& proj, const RabiContrastSettings& cfg) {
  const double bandwidth = 3.0 / cfg.pulseSigma;
  const double spacing = std::abs(proj.transitionFrequency(0, 1) - proj.transitionFrequency(1, 2));
  if (spacing < bandwidth)
    fail("selectivity-violation",
         "pulse bandwidth overlaps the 01 and 12 transitions (|w01 - w12| = " +
             std::to_string(angularToHz(spacing)) + " Hz)");
}

bool reducedGuardOk(const ProjectedOscillator& proj, const RabiContrastSettings& cfg) {
  for (int i = 0; i < std::min(3, int(proj.pairMeanEnergies.size())); ++i) {
    const double split = std::abs(proj.energies(proj.stateIndex(i, +1)) -
                                  proj.energies(proj.stateIndex(i, -1)));
    if (split > cfg.reducedGuardSplitting) return false;
  }
  return true;
}

}  // namespace

RabiContrastTraces rabiContrastProtocol(const ProjectedOscillator& proj,
                                        const DecoherenceRates& rates,
                                        const PopulationEstimate& trueP,
                                        const ReadoutContrasts& contrasts,
                                        const std::vector<double>& amplitudes,
                                        const RabiContrastSettings& settings) {
  rates.validate();
  checkReducedModelApplies(proj, settings);
  const bool full = settings.fullPropagation || !reducedGuardOk(proj, settings);
  if (full && !settings.fullPropagation)
    logInfo("rabiContrastProtocol: manifold splitting above the degeneracy guard, "
            "using carrier-resolved propagation");

  const auto sys = restrictToManifolds(proj, 3);
  const auto jumps = manifoldJumps(sys, rates);
  const Mat obs = contrastObservable(sys, contrasts);
  const Mat rho0 = mixtureState(sys, trueP.p0, trueP.p1, trueP.p2);

  RabiContrastTraces out;
  out.amplitudes = amplitudes;
  out.withPi01.reserve(amplitudes.size());
  out.withoutPi01.reserve(amplitudes.size());
  for (double amp : amplitudes) {
    const std::vector<PulseSpec> seqWith{{0, 1, 1.0}, {1, 2, amp}};
    const std::vector<PulseSpec> seqWithout{{1, 2, amp}};
    const Mat rhoW = full ? runPulseSequenceFull(sys, jumps, rho0, seqWith, settings)
                          : runPulseSequence(sys, jumps, rho0, seqWith, settings);
    const Mat rhoWo = full ? runPulseSequenceFull(sys, jumps, rho0, seqWithout, settings)
                           : runPulseSequence(sys, jumps, rho0, seqWithout, settings);
    out.withPi01.push_back((obs * rhoW).trace().real());
    out.withoutPi01.push_back((obs * rhoWo).trace().real());
  }
  return out;
}

// ---------------------------------------------------------------------------
// p1 extraction

namespace {

// signal = sum_i M_i sum_j p_j T[seq](j -> i); the transfer tensor only
// depends on the pulse sequence, so the (p1, M) fit reuses three simulations.
struct TransferTensors {
  // [amplitude][variant(0=with,1=without)](initManifold, readManifold)
  std::vector<std::array<Eigen::Matrix3d, 2>> t;
};

TransferTensors transferTensors(const ProjectedOscillator& proj, const DecoherenceRates& rates,
                                const std::vector<double>& amplitudes,
                                const RabiContrastSettings& settings) {
  const auto sys = restrictToManifolds(proj, 3);
  const auto jumps = manifoldJumps(sys, rates);
  TransferTensors tt;
  tt.t.resize(amplitudes.size());
  for (size_t a = 0; a < amplitudes.size(); ++a) {
    for (int variant = 0; variant < 2; ++variant) {
      std::vector<PulseSpec> seq;
      if (variant == 0) seq.push_back({0, 1, 1.0});
      seq.push_back({1, 2, amplitudes[a]});
      Eigen::Matrix3d m;
      for (int init = 0; init < 3; ++init) {
        Mat rho0 = mixtureState(sys, init == 0, init == 1, init == 2);
        const Mat rhoF = runPulseSequence(sys, jumps, rho0, seq, settings);
        for (int read = 0; read < 3; ++read)
          m(init, read) = (sys.projector(read) * rhoF).trace().real();
      }
      tt.t[a][variant] = m;
    }
  }
  return tt;
}

double ratioEstimator(double ratio, double p2) {
  return (ratio * (1.0 - 2.0 * p2) + p2) / (1.0 + ratio);
}

}  // namespace

PopulationEstimate fitLeakagePopulation(const RabiContrastTraces& data,
                                        const ProjectedOscillator& proj,
                                        const DecoherenceRates& rates, double p2, double p2Sigma,
                                        LeakageFitMode mode, const RabiContrastSettings& settings,
                                        int mcSamples, std::uint64_t seed, int jobs) {
  const int nAmp = int(data.amplitudes.size());
  if (nAmp < 4 || data.withPi01.size() != size_t(nAmp) || data.withoutPi01.size() != size_t(nAmp))
    fail("invalid-params", "traces must share the amplitude grid");
  const double spreadW = *std::max_element(data.withPi01.begin(), data.withPi01.end()) -
                         *std::min_element(data.withPi01.begin(), data.withPi01.end());
  if (spreadW < 1e-12) fail("fit-failure", "with-pulse trace is flat, p1 not identifiable");

  RealVec stacked(2 * nAmp);
  for (int k = 0; k < nAmp; ++k) {
    stacked(k) = data.withPi01[k];
    stacked(nAmp + k) = data.withoutPi01[k];
  }

  std::function<std::optional<fitting::McSample>(const RealVec&)> solver;
  if (mode == LeakageFitMode::fullModel) {
    auto tensors = std::make_shared<TransferTensors>(
        transferTensors(proj, rates, data.amplitudes, settings));

    auto modelFor = [tensors, nAmp](double p2s) {
      return [tensors, nAmp, p2s](const RealVec& prm) {
        const Eigen::Vector3d pops(1.0 - prm(0) - p2s, prm(0), p2s);
        const Eigen::Vector3d m(prm(1), prm(2), prm(3));
        RealVec y(2 * nAmp);
        for (int k = 0; k < nAmp; ++k) {
          y(k) = pops.transpose() * tensors->t[k][0] * m;
          y(nAmp + k) = pops.transpose() * tensors->t[k][1] * m;
        }
        return y;
      };
    };
    // Contrasts enter linearly, so the initial guess solves the linear
    // subproblem at a nominal p1.
    auto linearContrasts = [tensors, nAmp, &stacked](double p1, double p2s) {
      Eigen::Matrix<double, Eigen::Dynamic, 3> design(2 * nAmp, 3);
      const Eigen::Vector3d pops(1.0 - p1 - p2s, p1, p2s);
      for (int k = 0; k < nAmp; ++k) {
        design.row(k) = pops.transpose() * tensors->t[k][0];
        design.row(nAmp + k) = pops.transpose() * tensors->t[k][1];
      }
      return design.colPivHouseholderQr().solve(stacked).eval();
    };
    RealVec lo(4), hi(4);
    lo << 0.0, -1e6, -1e6, -1e6;
    hi << 1.0, 1e6, 1e6, 1e6;
    auto fitOnce = [=](double p2s, const RealVec* warm) {
      RealVec init(4);
      if (warm) {
        init = *warm;
      } else {
        const Eigen::Vector3d m0 = linearContrasts(0.08, p2s);
        init << 0.08, m0(0), m0(1), m0(2);
      }
      return fitting::nonlinearLeastSquares(modelFor(p2s), stacked, {}, init,
                                            {"p1", "M0", "M1", "M2"}, lo, hi);
    };
    const auto central = fitOnce(p2, nullptr);
    auto warmStart = std::make_shared<RealVec>(central.params);
    solver = [=](const RealVec& draw) -> std::optional<fitting::McSample> {
      try {
        auto res = fitOnce(draw(0), warmStart.get());
        return fitting::McSample{res.value("p1"), res.error("p1")};
      } catch (const Error&) {
        return std::nullopt;
      }
    };
  } else {
    RealVec amps = Eigen::Map<const RealVec>(data.amplitudes.data(), nAmp);
    auto fitAmp = [amps](const std::vector<double>& y) {
      RealVec yv = Eigen::Map<const RealVec>(y.data(), y.size());
      auto res = fitting::canonicalFits(fitting::CurveKind::decayingSinusoid, amps, yv);
      return std::pair<double, double>(std::abs(res.value("a")), res.error("a"));
    };
    const auto [aWith, sWith] = fitAmp(data.withPi01);
    const auto [aWithout, sWithout] = fitAmp(data.withoutPi01);
    if (aWith < 1e-12) fail("fit-failure", "with-pulse oscillation amplitude vanished");
    solver = [=](const RealVec& draw) -> std::optional<fitting::McSample> {
      const double p2s = draw(0);
      const double ratio = aWithout / aWith;
      const double p1 = ratioEstimator(ratio, p2s);
      const double dRatio = ratio * std::sqrt(sWith * sWith / (aWith * aWith) +
                                              sWithout * sWithout / (aWithout * aWithout));
      const double dP1dR = ((1.0 - 2.0 * p2s) - p1) / (1.0 + ratio);
      return fitting::McSample{p1, std::abs(dP1dR) * dRatio};
    };
  }

  fitting::McSummary mc;
  if (p2Sigma > 0) {
    mc = fitting::monteCarloPropagate(solver, {{p2, p2Sigma}}, mcSamples, seed, jobs);
  } else {
    RealVec fixed(1);
    fixed << p2;
    auto res = solver(fixed);
    if (!res) fail("fit-failure", "p1 fit did not converge");
    mc.mean = res->value;
    mc.totalVariance = res->conditionalSigma * res->conditionalSigma;
  }

  PopulationEstimate est;
  est.p1 = mc.mean;
  est.p2 = p2;
  est.p0 = 1.0 - est.p1 - est.p2;
  est.sigma1 = std::sqrt(mc.totalVariance);
  est.sigma2 = p2Sigma;
  est.sigma0 = std::sqrt(mc.totalVariance + p2Sigma * p2Sigma);
  return est;
}

PopulationEstimate spectroscopyInversion(const SpectroscopyPeaks& peaks,
                                         const ReadoutContrasts& m, int nSamples,
                                         std::uint64_t seed, int jobs) {
  if (peaks.pk01 == 0) fail("invalid-params", "pk01 must be nonzero");
  const double eta12 = (m.m2 - m.m1) / (m.m1 - m.m0);
  const double eta23 = (m.m3 - m.m2) / (m.m1 - m.m0);

  auto invert = [&](double pk01, double pk12, double pk23) -> Eigen::Vector3d {
    const double u1 = (pk12 / pk01) / eta12;
    const double u2 = (pk23 / pk01) / eta23;
    const double d = 1.0 / (1.0 + 2.0 * u1 + 3.0 * u2);
    return {(1.0 + u1 + u2) * d, (u1 + u2) * d, u2 * d};
  };

  const Eigen::Vector3d central = invert(peaks.pk01, peaks.pk12, peaks.pk23);
  std::vector<fitting::GaussianSpec> dists{{peaks.pk01, peaks.sigma01},
                                           {peaks.pk12, peaks.sigma12},
                                           {peaks.pk23, peaks.sigma23}};
  PopulationEstimate est;
  est.p0 = central(0);
  est.p1 = central(1);
  est.p2 = central(2);
  for (int comp = 0; comp < 3; ++comp) {
    auto compSolver = [&, comp](const RealVec& draw) -> std::optional<fitting::McSample> {
      if (std::abs(draw(0)) < 1e-12) return std::nullopt;
      return fitting::McSample{invert(draw(0), draw(1), draw(2))(comp), 0.0};
    };
    const auto mc = fitting::monteCarloPropagate(compSolver, dists, nSamples, seed, jobs);
    const double sd = std::sqrt(mc.totalVariance);
    if (comp == 0) est.sigma0 = sd;
    if (comp == 1) est.sigma1 = sd;
    if (comp == 2) est.sigma2 = sd;
  }
  const double ps[3] = {est.p0, est.p1, est.p2};
  const double sd[3] = {est.sigma0, est.sigma1, est.sigma2};
  for (int c = 0; c < 3; ++c)
    if (ps[c] < -sd[c] || ps[c] > 1.0 + sd[c])
      fail("inversion-out-of-range", "population " + std::to_string(c) + " = " +
                                         std::to_string(ps[c]) + " is unphysical");
  return est;
}

// ---------------------------------------------------------------------------
// Steady leakage and dissipation protocols

namespace {

Eigen::VectorXi oscParity(const ProjectedOscillator& proj) { return proj.parity; }

std::pair<double, double> manifoldPopulations(const ProjectedOscillator& proj, const Mat& rhoOsc) {
  double p1 = 0, p2 = 0;
  for (int k = 0; k < proj.dim(); ++k) {
    if (proj.labels[k].manifold == 1) p1 += rhoOsc(k, k).real();
    if (proj.labels[k].manifold == 2) p2 += rhoOsc(k, k).real();
  }
  return {p1, p2};
}

}  // namespace

std::vector<LeakagePoint> steadyLeakageVsDissipation(const OscillatorParams& osc,
                                                     const CavityParams& cav,
                                                     const std::vector<double>& gDissGrid,
                                                     const ManifoldSpectrum& spec,
                                                     const FockSpace& space, double tauDelay,
                                                     int jobs) {
  std::vector<LeakagePoint> out(gDissGrid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next.fetch_add(1); k < gDissGrid.size(); k = next.fetch_add(1)) {
      DissipationDrive drive{gDissGrid[k], 0.0, {0, 1}};
      const auto cm = composite::buildCoupledModel(osc, cav, drive, spec, space);
      const auto ss = dynamics::steadyState(cm.model, {/*checkUniqueness=*/0});
      Mat rhoOsc = cm.reduceToOscillator(ss.matrix);
      if (tauDelay > 0) {
        const auto single = composite::oscillatorModel(osc, cm.osc);
        DensityState st{rhoOsc, "eigen", {}};
        rhoOsc = dynamics::evolve(single, st, {tauDelay}).back().matrix;
      }
      const auto [p1, p2] = manifoldPopulations(cm.osc, rhoOsc);
      out[k] = {gDissGrid[k], p1, p2};
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

std::pair<double, double> dephasingEquivalentHeating(const OscillatorParams& osc,
                                                     const ProjectedOscillator& proj,
                                                     double kphi) {
  auto model = composite::oscillatorModel(osc, proj);
  if (kphi > 0) model.jumps.push_back({kphi, proj.number});
  const auto ss = dynamics::steadyState(model, {/*checkUniqueness=*/0});
  return manifoldPopulations(proj, ss.matrix);
}

// ---------------------------------------------------------------------------
// Bit-flip protocols

namespace {

Mat kcqZObservable(const ProjectedOscillator& proj) {
  Mat obs = Mat::Zero(proj.dim(), proj.dim());
  const int ip = proj.stateIndex(0, +1), im = proj.stateIndex(0, -1);
  obs(ip, im) = 1.0;
  obs(im, ip) = 1.0;
  return obs;
}

Mat plusZProjector(const ProjectedOscillator& proj) {
  Vec v = Vec::Zero(proj.dim());
  v(proj.stateIndex(0, +1)) = 1.0 / std::sqrt(2.0);
  v(proj.stateIndex(0, -1)) = 1.0 / std::sqrt(2.0);
  return v * v.adjoint();
}

}  // namespace

ThresholdScanResult bitFlipScan(const OscillatorParams& oscBase,
                                const std::vector<double>& eps2Grid, const CavityParams& cav,
                                const DissipationDrive& drive,
                                const std::vector<double>& detuningGrid, const FockSpace& space,
                                double duration, int jobs) {
  if (eps2Grid.empty() || detuningGrid.size() < 3)
    fail("invalid-params", "scan needs an eps2 grid and at least 3 detuning points");
  const int nE = int(eps2Grid.size()), nD = int(detuningGrid.size());

  // Spectra are shared across the detuning axis.
  std::vector<ManifoldSpectrum> spectra(nE);
  for (int e = 0; e < nE; ++e) {
    OscillatorParams osc = oscBase;
    osc.eps2 = eps2Grid[e];
    spectra[e] = spectrum::analyzeOscillator(osc, space);
  }

  RealMat zRaw(nE, nD);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int cell = next.fetch_add(1); cell < nE * nD; cell = next.fetch_add(1)) {
      const int e = cell / nD, d = cell % nD;
      OscillatorParams osc = oscBase;
      osc.eps2 = eps2Grid[e];
      DissipationDrive dr = drive;
      dr.detuning = detuningGrid[d];
      const auto cm = composite::buildCoupledModel(osc, cav, dr, spectra[e], space);
      const int nb = cm.cavityDim;
      Mat rho = Mat::Zero(cm.dim(), cm.dim());
      const Mat pz = plusZProjector(cm.osc);
      for (int i = 0; i < cm.osc.dim(); ++i)
        for (int j = 0; j < cm.osc.dim(); ++j) rho(i * nb, j * nb) = pz(i, j);
      const Mat obs = cm.oscillatorObservable(kcqZObservable(cm.osc));
      const DensityState rho0{rho, "composite", {cm.osc.dim(), nb}};
      zRaw(e, d) =
          dynamics::expectationTimeline(cm.model, rho0, obs, {duration}, &cm.stateParity)[0];
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ThresholdScanResult res;
  res.delta = oscBase.delta;
  res.eps2Grid = eps2Grid;
  res.detuningGrid = detuningGrid;
  res.deltaZ.resize(nE, nD);
  res.peakAmplitude.resize(nE);
  res.rowDiagnostics.resize(nE);
  RealVec rowNoise(nE);

  RealVec detunings = Eigen::Map<const RealVec>(detuningGrid.data(), nD);
  for (int e = 0; e < nE; ++e) {
    const double bg = zRaw(e, 0);  // reference detuning leads the grid
    for (int d = 0; d < nD; ++d) res.deltaZ(e, d) = (zRaw(e, d) - bg) / bg;
    // The normalization pins the background at zero, so the row fit is a
    // three-parameter Lorentzian.
    try {
      const RealVec row = res.deltaZ.row(e).transpose();
      auto model = [&](const RealVec& p) {
        return (p(0) * p(2) * p(2) /
                ((detunings.array() - p(1)).square() + p(2) * p(2)))
            .matrix()
            .eval();
      };
      int peakIdx = 0;
      row.cwiseAbs().maxCoeff(&peakIdx);
      RealVec init(3);
      init << row(peakIdx), 0.0, 0.5 * cav.kappaB();
      auto fit = fitting::nonlinearLeastSquares(model, row, {}, init, {"a", "x0", "w"});
      res.peakAmplitude(e) = fit.value("a");
      rowNoise(e) = std::sqrt((row - model(fit.params)).squaredNorm() / nD);
      res.rowDiagnostics[e] = "ok";
    } catch (const Error& err) {
      res.peakAmplitude(e) = std::numeric_limits<double>::quiet_NaN();
      rowNoise(e) = 0;
      res.rowDiagnostics[e] = err.code();
    }
  }

  // Threshold: the smallest grid eps2 whose fitted peak is no longer
  // negative after a negative row (the interpolated zero is kept alongside);
  // otherwise the first row whose peak falls below its own noise floor.
  res.eps2Th = 0;
  bool found = false;
  for (int e = 1; e < nE && !found; ++e) {
    const double a0 = res.peakAmplitude(e - 1), a1 = res.peakAmplitude(e);
    if (std::isnan(a0) || std::isnan(a1)) continue;
    if (a0 < 0 && a1 >= 0) {
      res.eps2Th = eps2Grid[e];
      const double f = a0 / (a0 - a1);
      res.eps2Crossing = eps2Grid[e - 1] + f * (eps2Grid[e] - eps2Grid[e - 1]);
      res.regime = ThresholdScanResult::Regime::signChange;
      found = true;
    }
  }
  if (!found) {
    for (int e = 0; e < nE && !found; ++e) {
      if (std::isnan(res.peakAmplitude(e))) continue;
      if (std::abs(res.peakAmplitude(e)) < std::max(rowNoise(e), 1e-4)) {
        res.eps2Th = eps2Grid[e];
        res.regime = ThresholdScanResult::Regime::saturation;
        found = true;
      }
    }
  }
  if (!found)
    fail("bracket-failure", "no threshold found: peak amplitude never changes sign or saturates");
  return res;
}

TzThreshold thresholdFromTzCrossing(const OscillatorParams& oscBase, const CavityParams& cav,
                                    const DissipationDrive& drive,
                                    const std::vector<double>& eps2Grid, const FockSpace& space,
                                    bool useEffectiveModel, int jobs) {
  TzThreshold out;
  out.eps2Grid = eps2Grid;
  out.tzWith.resize(eps2Grid.size());
  out.tzWithout.resize(eps2Grid.size());

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next.fetch_add(1); k < eps2Grid.size(); k = next.fetch_add(1)) {
      OscillatorParams osc = oscBase;
      osc.eps2 = eps2Grid[k];
      const auto spec = spectrum::analyzeOscillator(osc, space);
      const auto proj = composite::projectOscillator(spec, space);
      const Mat obsOsc = kcqZObservable(proj);
      const Eigen::VectorXi parity = oscParity(proj);
      {
        const auto bare = composite::oscillatorModel(osc, proj);
        out.tzWithout[k] = 1.0 / dynamics::slowestDecayRate(bare, obsOsc, &parity);
      }
      if (useEffectiveModel) {
        auto model = composite::oscillatorModel(osc, proj);
        for (auto& j : composite::effectiveDissipators(osc, cav, drive, proj))
          model.jumps.push_back(j);
        out.tzWith[k] = 1.0 / dynamics::slowestDecayRate(model, obsOsc, &parity);
      } else {
        const auto cm = composite::buildCoupledModel(osc, cav, drive, spec, space);
        const Mat obs = cm.oscillatorObservable(kcqZObservable(cm.osc));
        out.tzWith[k] = 1.0 / dynamics::slowestDecayRate(cm.model, obs, &cm.stateParity);
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Smallest grid point where dissipation no longer shortens T_Z, plus the
  // interpolated log-ratio crossing.
  double prev = std::log(out.tzWith[0] / out.tzWithout[0]);
  for (size_t k = 1; k < eps2Grid.size(); ++k) {
    const double cur = std::log(out.tzWith[k] / out.tzWithout[k]);
    if (prev < 0 && cur >= 0) {
      out.eps2Th = eps2Grid[k];
      const double f = prev / (prev - cur);
      out.eps2Crossing = eps2Grid[k - 1] + f * (eps2Grid[k] - eps2Grid[k - 1]);
      return out;
    }
    prev = cur;
  }
  fail("bracket-failure", "T_Z ratio does not cross unity on the eps2 grid");
}

BitFlipTime bitFlipTime(const OscillatorParams& osc, const CavityParams& cav,
                        const std::optional<DissipationDrive>& drive,
                        const ManifoldSpectrum& spec, const FockSpace& space, bool crossCheck) {
  BitFlipTime out;
  double rate = 0;
  if (drive) {
    const auto cm = composite::buildCoupledModel(osc, cav, *drive, spec, space);
    const Mat obs = cm.oscillatorObservable(kcqZObservable(cm.osc));
    rate = dynamics::slowestDecayRate(cm.model, obs, &cm.stateParity);
    if (crossCheck) {
      const int nb = cm.cavityDim;
      Mat rho = Mat::Zero(cm.dim(), cm.dim());
      const Mat pz = plusZProjector(cm.osc);
      for (int i = 0; i < cm.osc.dim(); ++i)
        for (int j = 0; j < cm.osc.dim(); ++j) rho(i * nb, j * nb) = pz(i, j);
      // Fit window past the leakage-equilibration transient.
      std::vector<double> times;
      for (int k = 0; k <= 24; ++k) times.push_back((0.4 + 2.5 * k / 24.0) / rate);
      const DensityState rho0{rho, "composite", {cm.osc.dim(), nb}};
      const auto z = dynamics::expectationTimeline(cm.model, rho0, obs, times, &cm.stateParity);
      RealVec tv = Eigen::Map<const RealVec>(times.data(), times.size());
      RealVec zv = Eigen::Map<const RealVec>(z.data(), z.size());
      auto fit = fitting::canonicalFits(fitting::CurveKind::exp, tv, zv);
      out.tzTimeDomain = fit.value("tau");
    }
  } else {
    const auto proj = composite::projectOscillator(spec, space);
    const auto model = composite::oscillatorModel(osc, proj);
    const Mat obs = kcqZObservable(proj);
    const Eigen::VectorXi parity = oscParity(proj);
    rate = dynamics::slowestDecayRate(model, obs, &parity);
    if (crossCheck) {
      std::vector<double> times;
      for (int k = 0; k <= 24; ++k) times.push_back((0.4 + 2.5 * k / 24.0) / rate);
      const DensityState rho0{plusZProjector(proj), "eigen", {}};
      const auto z = dynamics::expectationTimeline(model, rho0, obs, times, &parity);
      RealVec tv = Eigen::Map<const RealVec>(times.data(), times.size());
      RealVec zv = Eigen::Map<const RealVec>(z.data(), z.size());
      auto fit = fitting::canonicalFits(fitting::CurveKind::exp, tv, zv);
      out.tzTimeDomain = fit.value("tau");
    }
  }
  out.tz = 1.0 / rate;
  out.method = "spectral";
  return out;
}

double initializationRamp(const OscillatorParams& target, const dynamics::RampProfile& eps2Ramp,
                          const dynamics::RampProfile& deltaRamp, bool withDetuningRamp,
                          const FockSpace& space) {
  target.validate();
  eps2Ramp.validate();
  if (withDetuningRamp) deltaRamp.validate();

  const auto ops = hilbert::buildFockOperators(space);
  const Mat kerr = ops.annihilation.adjoint() * ops.annihilation.adjoint() * ops.annihilation *
                   ops.annihilation;
  const Mat squeeze = ops.annihilation * ops.annihilation +
                      Mat(ops.annihilation.adjoint() * ops.annihilation.adjoint());
  const Mat& num = ops.number;

  auto hOf = [&](double t) -> Mat {
    const double e2 = eps2Ramp.value(t);
    const double det = withDetuningRamp ? deltaRamp.value(t) : target.delta;
    return det * num - target.K * kerr + e2 * squeeze;
  };

  const double tEnd = std::max(eps2Ramp.duration, withDetuningRamp ? deltaRamp.duration : 0.0);
  // Spectral content bound from the final Hamiltonian's largest row sum.
  const Mat hFinal = hOf(tEnd);
  const double content = hFinal.cwiseAbs().rowwise().sum().maxCoeff();
  const double dtMax = 1.0 / (50.0 * content);

  Mat rho0 = Mat::Zero(space.dim, space.dim);
  rho0(0, 0) = 1.0;
  const DensityState vac{rho0, "fock", {space.dim}};
  const auto fin = dynamics::evolveTimeDependent(hOf, {}, vac, tEnd, dtMax);

  OscillatorParams fp = target;
  const auto spec = spectrum::analyzeOscillator(fp, space, /*acknowledgeNoStark=*/true);
  double fidelity = 0;
  for (int par : {+1, -1}) {
    const Vec psi = spec.state(0, par);
    fidelity += (psi.adjoint() * fin.matrix * psi)(0).real();
  }
  return fidelity;
}

double kerrGateFidelity(double k1Eff, double kphiEff, double tau, double kerr,
                        const ManifoldSpectrum& spec, int gateDim) {
  if (k1Eff < 0 || kphiEff < 0 || tau < 0) fail("invalid-params", "rates and tau must be >= 0");
  const auto basis = spectrum::kcqBasisStates(spec);
  Vec psi0 = basis.plusZ.head(gateDim);
  psi0.normalize();

  const FockSpace gateSpace{gateDim};
  const auto ops = hilbert::buildFockOperators(gateSpace);
  LindbladModel m;
  m.basisTag = "fock";
  m.hamiltonian = -kerr * (ops.annihilation.adjoint() * ops.annihilation.adjoint() *
                           ops.annihilation * ops.annihilation);
  if (k1Eff > 0) m.jumps.push_back({k1Eff, ops.annihilation});
  if (kphiEff > 0) m.jumps.push_back({kphiEff, ops.number});

  const DensityState rho0{psi0 * psi0.adjoint(), "fock", {gateDim}};
  const Mat rhoLossy = dynamics::evolve(m, rho0, {tau}).back().matrix;

  Vec phases(gateDim);
  for (int n = 0; n < gateDim; ++n)
    phases(n) = std::exp(Complex(0, 1) * kerr * double(n) * double(n - 1) * tau);
  const Vec psiIdeal = phases.asDiagonal() * psi0;
  const Mat rhoIdeal = psiIdeal * psiIdeal.adjoint();

  // Uhlmann fidelity via the PSD square root of rho_ideal.
  Eigen::SelfAdjointEigenSolver<Mat> es(rhoIdeal);
  const Mat sqrtIdeal = es.eigenvectors() *
                        es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                        es.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<Mat> inner(0.5 * (Mat(sqrtIdeal * rhoLossy * sqrtIdeal) +
                                                  Mat((sqrtIdeal * rhoLossy * sqrtIdeal).adjoint())));
  const double traceSqrt = inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::min(1.0, traceSqrt * traceSqrt);
}

double zGateError(double gammaRabi, double tau) {
  if (gammaRabi < 0 || tau < 0) fail("invalid-params", "gamma and tau must be >= 0");
  return 0.5 * (1.0 - std::exp(-gammaRabi * tau));
}

ReadoutQuality zroFidelityQnd(const std::vector<double>& firstShots,
                              const std::vector<double>& secondShots, double threshold) {
  if (firstShots.size() != secondShots.size() || firstShots.empty())
    fail("invalid-params", "shot records must be aligned and non-empty");
  long nPlusFirst = 0, nMinusFirst = 0, plusGivenPlus = 0, minusGivenMinus = 0,
       plusGivenMinus = 0, minusGivenPlus = 0;
  for (size_t k = 0; k < firstShots.size(); ++k) {
    const bool firstPlus = firstShots[k] > threshold;
    const bool secondPlus = secondShots[k] > threshold;
    if (firstPlus) {
      ++nPlusFirst;
      secondPlus ? ++plusGivenPlus : ++minusGivenPlus;
    } else {
      ++nMinusFirst;
      secondPlus ? ++plusGivenMinus : ++minusGivenMinus;
    }
  }
  if (nPlusFirst == 0 || nMinusFirst == 0)
    fail("undefined-conditional", "one first-readout class is empty");
  const double pPlusGivenMinus = double(plusGivenMinus) / nMinusFirst;
  const double pMinusGivenPlus = double(minusGivenPlus) / nPlusFirst;
  ReadoutQuality q;
  q.fidelity = 1.0 - pPlusGivenMinus - pMinusGivenPlus;
  q.qndness = 0.5 * (double(plusGivenPlus) / nPlusFirst + double(minusGivenMinus) / nMinusFirst);
  return q;
}

// ---------------------------------------------------------------------------
// Excitation-robustness study (plain three-level system)

namespace {

struct ThreeLevel {
  std::vector<Jump> jumps;
  Mat obs;

  static Mat ket(int i, int j) {
    Mat m = Mat::Zero(3, 3);
    m(i, j) = 1.0;
    return m;
  }
};

ThreeLevel threeLevelSystem(const DecoherenceRates& r, const ReadoutContrasts& m) {
  ThreeLevel sys;
  auto add = [&](double rate, const Mat& op) {
    if (rate > 0) sys.jumps.push_back({rate, op});
  };
  add(r.k1_01, ThreeLevel::ket(0, 1));
  add(2.0 * r.kphi_01, ThreeLevel::ket(1, 1));
  add(r.k1_12, ThreeLevel::ket(1, 2));
  add(2.0 * r.kphi_12, ThreeLevel::ket(2, 2));
  add(r.kup_01, ThreeLevel::ket(1, 0));
  add(r.kup_12, ThreeLevel::ket(2, 1));
  sys.obs = Mat::Zero(3, 3);
  sys.obs(0, 0) = m.m0;
  sys.obs(1, 1) = m.m1;
  sys.obs(2, 2) = m.m2;
  return sys;
}

std::vector<double> threeLevelSignal(const ThreeLevel& sys, const Mat& h, const Mat& rho0,
                                     const Mat& postRotation, const std::vector<double>& times) {
  LindbladModel m{h, sys.jumps, "eigen"};
  const DensityState st{rho0, "eigen", {}};
  const auto states = dynamics::evolve(m, st, times);
  std::vector<double> out;
  out.reserve(times.size());
  for (const auto& s : states)
    out.push_back((sys.obs * postRotation * s.matrix * postRotation.adjoint()).trace().real());
  return out;
}

RealVec toVec(const std::vector<double>& v) {
  return Eigen::Map<const RealVec>(v.data(), v.size());
}

Mat threeLevelSteady(const ThreeLevel& sys) {
  LindbladModel m{Mat::Zero(3, 3), sys.jumps, "eigen"};
  return dynamics::steadyState(m).matrix;
}

// Gaussian pulse on one transition of the plain three-level system.
Mat threeLevelPulse(const ThreeLevel& sys, Mat rho, int lo, int hi, double amplitudeScale,
                    const RabiContrastSettings& cfg) {
  const Mat flip = ThreeLevel::ket(lo, hi) + ThreeLevel::ket(hi, lo);
  const double area = gaussianEnvelopeArea(cfg.pulseLength, cfg.pulseSigma);
  const double omega0 = amplitudeScale * M_PI / (2.0 * area);
  auto hOf = [&](double t) -> Mat {
    const double u = (t - 0.5 * cfg.pulseLength) / cfg.pulseSigma;
    return (omega0 * std::exp(-0.5 * u * u)) * flip;
  };
  DensityState st{rho, "eigen", {}};
  const double content = std::abs(omega0) + 1.0;
  st = dynamics::evolveTimeDependent(hOf, sys.jumps, st, cfg.pulseLength, 1.0 / (50.0 * content));
  return st.matrix;
}

}  // namespace

RobustnessReport excitationRobustnessStudy(const DecoherenceRates& rates,
                                           const ReadoutContrasts& contrasts) {
  rates.validate();
  RobustnessReport rep;
  rep.setRates = rates;

  const auto sys = threeLevelSystem(rates, contrasts);
  const Mat h0 = Mat::Zero(3, 3);

  // --- T1(01): relax |1>, exponential fit.
  {
    std::vector<double> times;
    const double tMax = 5.0 / rates.k1_01;
    for (int k = 0; k <= 60; ++k) times.push_back(tMax * k / 60.0);
    const auto sig = threeLevelSignal(sys, h0, ThreeLevel::ket(1, 1), Mat::Identity(3, 3), times);
    auto fit = fitting::canonicalFits(fitting::CurveKind::exp, toVec(times), toVec(sig));
    rep.fittedRates.k1_01 = 1.0 / fit.value("tau");
  }

  // --- Ramsey(01): fringes at deltaOmega, decay Gamma01 = k1/2 + kphi.
  const double deltaOmega01 = kTwoPi * 250e3;
  {
    const double gamma01 = 0.5 * rates.k1_01 + rates.kphi_01;
    std::vector<double> times;
    const double tMax = 3.0 / gamma01;
    for (int k = 0; k <= 160; ++k) times.push_back(tMax * k / 160.0);
    Mat h = Mat::Zero(3, 3);
    h(1, 1) = deltaOmega01;
    Vec plus = Vec::Zero(3);
    plus(0) = plus(1) = 1.0 / std::sqrt(2.0);
    Mat rot = Mat::Identity(3, 3);
    rot(0, 0) = rot(1, 1) = 1.0 / std::sqrt(2.0);
    rot(0, 1) = -1.0 / std::sqrt(2.0);
    rot(1, 0) = 1.0 / std::sqrt(2.0);
    const auto sig = threeLevelSignal(sys, h, plus * plus.adjoint(), rot, times);
    auto fit =
        fitting::canonicalFits(fitting::CurveKind::decayingSinusoid, toVec(times), toVec(sig));
    rep.fittedRates.kphi_01 = fit.value("gamma") - 0.5 * rep.fittedRates.k1_01;
  }

  // --- T1(12): relax |2>, pi01 swap before readout, double-exponential with
  // the already-fitted k1(01) held fixed.
  {
    std::vector<double> times;
    const double tMax = 5.0 / rates.k1_12 + 2.0 / rates.k1_01;
    for (int k = 0; k <= 80; ++k) times.push_back(tMax * k / 80.0);
    Mat swap01 = ThreeLevel::ket(0, 1) + ThreeLevel::ket(1, 0) + ThreeLevel::ket(2, 2);
    const auto sig = threeLevelSignal(sys, h0, ThreeLevel::ket(2, 2), swap01, times);
    const double k1Fixed = rep.fittedRates.k1_01;
    auto model = [&](const RealVec& p) {
      RealVec out(int(times.size()));
      for (size_t k = 0; k < times.size(); ++k) {
        const double e2 = std::exp(-p(3) * times[k]);
        const double mix = p(3) * expRelDiff(times[k], k1Fixed, p(3));
        out(k) = p(0) * e2 + p(1) * mix + p(2) * (1.0 - e2 - mix);
      }
      return out;
    };
    RealVec init(4);
    init << contrasts.m2, contrasts.m0, contrasts.m1, rates.k1_12;
    auto fit = fitting::nonlinearLeastSquares(model, toVec(sig), {}, init, {"A", "B", "C", "k2"});
    rep.fittedRates.k1_12 = fit.value("k2");
  }

  // --- Ramsey(12): decay Gamma01 + Gamma12.
  const double deltaOmega12 = kTwoPi * 500e3;
  {
    const double gammaTot = 0.5 * (rates.k1_01 + rates.k1_12) + rates.kphi_01 + rates.kphi_12;
    std::vector<double> times;
    const double tMax = 3.0 / gammaTot;
    for (int k = 0; k <= 140; ++k) times.push_back(tMax * k / 140.0);
    Mat h = Mat::Zero(3, 3);
    h(2, 2) = deltaOmega12;
    Vec plus = Vec::Zero(3);
    plus(1) = plus(2) = 1.0 / std::sqrt(2.0);
    Mat rot12 = Mat::Identity(3, 3);
    rot12(1, 1) = rot12(2, 2) = 1.0 / std::sqrt(2.0);
    rot12(1, 2) = -1.0 / std::sqrt(2.0);
    rot12(2, 1) = 1.0 / std::sqrt(2.0);
    Mat swap01 = ThreeLevel::ket(0, 1) + ThreeLevel::ket(1, 0) + ThreeLevel::ket(2, 2);
    const auto sig = threeLevelSignal(sys, h, plus * plus.adjoint(), swap01 * rot12, times);
    auto fit =
        fitting::canonicalFits(fitting::CurveKind::decayingSinusoid, toVec(times), toVec(sig));
    const double gamma01Fit = 0.5 * rep.fittedRates.k1_01 + rep.fittedRates.kphi_01;
    rep.fittedRates.kphi_12 =
        fit.value("gamma") - gamma01Fit - 0.5 * rep.fittedRates.k1_12;
  }

  rep.relErrK1_01 = std::abs(rep.fittedRates.k1_01 - rates.k1_01) / rates.k1_01;
  rep.relErrK1_12 = std::abs(rep.fittedRates.k1_12 - rates.k1_12) / rates.k1_12;
  rep.relErrKphi_01 = std::abs(rep.fittedRates.kphi_01 - rates.kphi_01) / rates.kphi_01;
  rep.relErrKphi_12 = std::abs(rep.fittedRates.kphi_12 - rates.kphi_12) / rates.kphi_12;

  // --- Rabi-contrast p1 estimators on heating-contaminated data.
  const Mat steady = threeLevelSteady(sys);
  rep.p1True = steady(1, 1).real();
  const double p2Fixed = 0.01;

  RabiContrastSettings cfg;
  std::vector<double> amps;
  for (int k = 0; k <= 25; ++k) amps.push_back(2.5 * k / 25.0);

  std::vector<double> withPi, withoutPi;
  for (double a : amps) {
    Mat rho = threeLevelPulse(sys, steady, 0, 1, 1.0, cfg);
    rho = threeLevelPulse(sys, rho, 1, 2, a, cfg);
    withPi.push_back((sys.obs * rho).trace().real());
    Mat rho2 = threeLevelPulse(sys, steady, 1, 2, a, cfg);
    withoutPi.push_back((sys.obs * rho2).trace().real());
  }

  // Ratio of damped-sinusoid amplitudes.
  {
    auto fitW = fitting::canonicalFits(fitting::CurveKind::decayingSinusoid, toVec(amps),
                                       toVec(withPi));
    auto fitWo = fitting::canonicalFits(fitting::CurveKind::decayingSinusoid, toVec(amps),
                                        toVec(withoutPi));
    const double ratio = std::abs(fitWo.value("a")) / std::abs(fitW.value("a"));
    rep.p1ByRatio = ratioEstimator(ratio, p2Fixed);
    const double dRatio = ratio * std::sqrt(std::pow(fitW.error("a") / fitW.value("a"), 2) +
                                            std::pow(fitWo.error("a") / fitWo.value("a"), 2));
    rep.p1ByRatioSigma =
        std::abs(((1.0 - 2.0 * p2Fixed) - rep.p1ByRatio) / (1.0 + ratio)) * dRatio;
  }

  // Full decoherence-model fit with the heating-free fitted rates.
  {
    DecoherenceRates fitted = rep.fittedRates;
    fitted.kup_01 = fitted.kup_12 = 0;
    const auto fitSys = threeLevelSystem(fitted, contrasts);
    // Transfer tensors of the heating-free model.
    std::vector<std::array<Eigen::Matrix3d, 2>> tensors(amps.size());
    for (size_t k = 0; k < amps.size(); ++k)
      for (int variant = 0; variant < 2; ++variant) {
        Eigen::Matrix3d t;
        for (int init = 0; init < 3; ++init) {
          Mat rho = ThreeLevel::ket(init, init);
          if (variant == 0) rho = threeLevelPulse(fitSys, rho, 0, 1, 1.0, cfg);
          rho = threeLevelPulse(fitSys, rho, 1, 2, amps[k], cfg);
          for (int read = 0; read < 3; ++read) t(init, read) = rho(read, read).real();
        }
        tensors[k][variant] = t;
      }
    const int nAmp = int(amps.size());
    RealVec stacked(2 * nAmp);
    for (int k = 0; k < nAmp; ++k) {
      stacked(k) = withPi[k];
      stacked(nAmp + k) = withoutPi[k];
    }
    auto model = [&](const RealVec& prm) {
      const Eigen::Vector3d pops(1.0 - prm(0) - p2Fixed, prm(0), p2Fixed);
      const Eigen::Vector3d m(prm(1), prm(2), prm(3));
      RealVec y(2 * nAmp);
      for (int k = 0; k < nAmp; ++k) {
        y(k) = pops.transpose() * tensors[k][0] * m;
        y(nAmp + k) = pops.transpose() * tensors[k][1] * m;
      }
      return y;
    };
    RealVec init(4);
    init << 0.08, contrasts.m0, contrasts.m1, contrasts.m2;
    RealVec lo(4), hi(4);
    lo << 0, -1e6, -1e6, -1e6;
    hi << 1, 1e6, 1e6, 1e6;
    auto fit = fitting::nonlinearLeastSquares(model, stacked, {}, init, {"p1", "M0", "M1", "M2"},
                                              lo, hi);
    rep.p1ByModel = fit.value("p1");
    rep.p1ByModelSigma = fit.error("p1");
  }
  return rep;
}

}  // namespace kerrcat::protocols
