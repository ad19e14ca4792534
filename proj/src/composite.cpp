#include "kerrcat/composite.hpp"

#include <algorithm>
#include <cmath>

#include "kerrcat/hilbert.hpp"

namespace kerrcat::composite {

using dynamics::Jump;
using dynamics::LindbladModel;
using hilbert::tensorEmbed;

void CavityParams::validate() const {
  if (kappaOut < 0 || kappaLoss < 0) fail("invalid-params", "cavity rates must be >= 0");
  if (nThB < 0) fail("invalid-params", "nThB must be >= 0");
  if (cavityDim != 0 && cavityDim != 2 && cavityDim != 3)
    fail("invalid-params", "cavityDim must be 2 or 3 (0 = automatic)");
}

int CavityParams::effectiveDim() const {
  if (cavityDim != 0) return cavityDim;
  return nThB > 0 ? 3 : 2;
}

Mat ProjectedOscillator::manifoldProjector(int manifold) const {
  Mat p = Mat::Zero(dim(), dim());
  for (int k = 0; k < dim(); ++k)
    if (labels[k].manifold == manifold) p(k, k) = 1.0;
  return p;
}

int ProjectedOscillator::stateIndex(int manifold, int par) const {
  for (int k = 0; k < dim(); ++k)
    if (labels[k].manifold == manifold && labels[k].parity == par) return k;
  fail("invalid-state", "projected basis lacks manifold " + std::to_string(manifold));
}

ProjectedOscillator projectOscillator(const ManifoldSpectrum& spec,
                                      const spectrum::FockSpace& space, int minStates,
                                      int extraStates) {
  const int total = int(spec.eigenvalues.size());
  int keep = std::max(spec.confinedCount + extraStates, minStates);
  if (total < minStates)
    fail("truncation-too-small", "need at least " + std::to_string(minStates) +
                                     " eigenstates, Fock dimension provides " +
                                     std::to_string(total));
  keep = std::min(keep, total);

  ProjectedOscillator proj;
  proj.basis = spec.eigenvectors.leftCols(keep);
  proj.energies = spec.eigenvalues.head(keep);
  proj.labels.assign(spec.labels.begin(), spec.labels.begin() + keep);
  proj.parity.resize(keep);
  for (int k = 0; k < keep; ++k) proj.parity(k) = proj.labels[k].parity;

  const auto ops = hilbert::buildFockOperators(space);
  proj.a = proj.basis.adjoint() * ops.annihilation * proj.basis;
  proj.number = proj.basis.adjoint() * ops.number * proj.basis;

  int pairs = 0;
  while (true) {
    bool hasBoth = true;
    for (int par : {+1, -1}) {
      bool found = false;
      for (const auto& l : proj.labels)
        if (l.manifold == pairs && l.parity == par) found = true;
      hasBoth = hasBoth && found;
    }
    if (!hasBoth) break;
    ++pairs;
  }
  proj.pairMeanEnergies.resize(pairs);
  for (int i = 0; i < pairs; ++i)
    proj.pairMeanEnergies(i) = 0.5 * (proj.energies(proj.stateIndex(i, +1)) +
                                      proj.energies(proj.stateIndex(i, -1)));
  return proj;
}

LindbladModel oscillatorModel(const OscillatorParams& osc, const ProjectedOscillator& proj) {
  LindbladModel m;
  m.basisTag = "eigen";
  m.hamiltonian = proj.energies.cast<Complex>().asDiagonal();
  if (osc.kappaA > 0) {
    m.jumps.push_back({osc.kappaA * (1.0 + osc.nThA), proj.a});
    if (osc.nThA > 0) m.jumps.push_back({osc.kappaA * osc.nThA, proj.a.adjoint()});
  }
  return m;
}

Mat CompositeModel::oscillatorObservable(const Mat& opOsc) const {
  return tensorEmbed(opOsc, Mat::Identity(cavityDim, cavityDim));
}

Mat CompositeModel::reduceToOscillator(const Mat& rho) const {
  return dynamics::partialTraceSecond(rho, osc.dim(), cavityDim);
}

CompositeModel buildCoupledModel(const OscillatorParams& osc, const CavityParams& cav,
                                 const DissipationDrive& drive, const ManifoldSpectrum& spec,
                                 const spectrum::FockSpace& space) {
  osc.validate();
  cav.validate();
  if (drive.gDiss < 0) fail("invalid-params", "gDiss must be >= 0");

  CompositeModel cm;
  cm.osc = projectOscillator(spec, space);
  cm.cavityDim = cav.effectiveDim();
  const int na = cm.osc.dim(), nb = cm.cavityDim;

  const auto bOps = hilbert::buildFockOperators({nb});
  const Mat eyeA = Mat::Identity(na, na), eyeB = Mat::Identity(nb, nb);
  const auto [ti, tj] = drive.targetTransition;
  if (std::max(ti, tj) >= int(cm.osc.pairMeanEnergies.size()))
    fail("invalid-params", "target transition outside the projected manifolds");
  const double deltaB = cm.osc.transitionFrequency(ti, tj) + drive.detuning;

  Mat h = tensorEmbed(Mat(cm.osc.energies.cast<Complex>().asDiagonal()), eyeB) +
          deltaB * tensorEmbed(eyeA, bOps.number) +
          drive.gDiss * (tensorEmbed(cm.osc.a, bOps.annihilation.adjoint()) +
                         tensorEmbed(cm.osc.a.adjoint(), bOps.annihilation));
  cm.model.hamiltonian = 0.5 * (h + Mat(h.adjoint()));
  cm.model.basisTag = "composite";

  if (osc.kappaA > 0) {
    cm.model.jumps.push_back({osc.kappaA * (1.0 + osc.nThA), tensorEmbed(cm.osc.a, eyeB)});
    if (osc.nThA > 0)
      cm.model.jumps.push_back({osc.kappaA * osc.nThA, tensorEmbed(cm.osc.a.adjoint(), eyeB)});
  }
  const double kb = cav.kappaB();
  if (kb > 0) {
    cm.model.jumps.push_back({kb * (1.0 + cav.nThB), tensorEmbed(eyeA, bOps.annihilation)});
    if (cav.nThB > 0)
      cm.model.jumps.push_back({kb * cav.nThB, tensorEmbed(eyeA, bOps.annihilation.adjoint())});
  }

  cm.stateParity.resize(na * nb);
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nb; ++k)
      cm.stateParity(i * nb + k) = cm.osc.parity(i) * (k % 2 == 0 ? 1 : -1);
  return cm;
}

std::vector<Jump> effectiveDissipators(const OscillatorParams& osc, const CavityParams& cav,
                                       const DissipationDrive& drive,
                                       const ProjectedOscillator& proj) {
  osc.validate();
  cav.validate();
  const double kb = cav.kappaB();
  if (!(kb > 0)) fail("invalid-params", "effective dissipators need kappa_b > 0");
  if (drive.gDiss > kb)
    fail("invalid-params", "g_diss above kappa_b breaks the adiabatic elimination");
  if (drive.gDiss > 0.5 * kb)
    logInfo("effectiveDissipators: g_diss above kappa_b/2, adiabatic elimination is marginal");

  const auto [ti, tj] = drive.targetTransition;
  const double driveFreq = proj.transitionFrequency(ti, tj) + drive.detuning;
  const int pairs = int(proj.pairMeanEnergies.size());

  std::vector<Jump> out;
  const double g2kb = kb * drive.gDiss * drive.gDiss;
  for (int i = 0; i < pairs; ++i) {
    for (int j = 0; j < pairs; ++j) {
      const Mat cool = proj.manifoldProjector(j) * proj.a * proj.manifoldProjector(i);
      if (cool.norm() < 1e-10) continue;
      const double det = driveFreq - (proj.pairMeanEnergies(i) - proj.pairMeanEnergies(j));
      const double lorentz = g2kb / (0.25 * kb * kb + det * det);
      out.push_back({lorentz * (1.0 + cav.nThB), cool});
      if (cav.nThB > 0) out.push_back({lorentz * cav.nThB, Mat(cool.adjoint())});
    }
  }
  return out;
}

double extractKappaDiss(const OscillatorParams& osc, const CavityParams& cav,
                        const DissipationDrive& drive, const ManifoldSpectrum& spec,
                        const spectrum::FockSpace& space) {
  if (drive.detuning != 0)
    fail("invalid-params", "kappa_diss extraction is defined on resonance only");
  OscillatorParams oscLossless = osc;
  oscLossless.kappaA = 0;
  oscLossless.nThA = 0;
  CavityParams cavCold = cav;
  cavCold.nThB = 0;
  cavCold.cavityDim = 0;

  const CompositeModel cm = buildCoupledModel(oscLossless, cavCold, drive, spec, space);
  const int na = cm.osc.dim(), nb = cm.cavityDim;
  const int sourceManifold = drive.targetTransition.second;

  Mat rho = Mat::Zero(na * nb, na * nb);
  for (int par : {+1, -1}) {
    const int k = cm.osc.stateIndex(sourceManifold, par);
    rho(k * nb, k * nb) = 0.5;  // cavity vacuum
  }
  const Mat obs = cm.oscillatorObservable(cm.osc.manifoldProjector(sourceManifold));

  const double kb = cav.kappaB();
  const double kappaEst = 4.0 * drive.gDiss * drive.gDiss / kb;
  const double tMax = 10.0 / kappaEst;
  std::vector<double> times{0.0};
  constexpr int kSamples = 200;
  for (int k = 0; k < kSamples; ++k)
    times.push_back(tMax * std::pow(1e-3, 1.0 - double(k) / (kSamples - 1)));

  const dynamics::DensityState rho0{rho, "composite", {na, nb}};
  const auto pops = dynamics::expectationTimeline(cm.model, rho0, obs, times, &cm.stateParity);

  const double target = pops[0] / M_E;
  for (size_t k = 1; k < pops.size(); ++k) {
    if (pops[k] <= target) {
      const double t0 = times[k - 1], t1 = times[k];
      const double p0 = pops[k - 1], p1 = pops[k];
      const double tCross = t0 + (target - p0) / (p1 - p0) * (t1 - t0);
      return 1.0 / tCross;
    }
  }
  fail("no-crossing", "population never reached 1/e within the sampling window");
}

TwoModeAmplitudes analyticTwoModeDecay(const TwoModeDecayParams& p, double t) {
  const Complex lam = p.lambda();
  const Complex z = 0.25 * lam * t;
  // sinh(z)/z, stable near z = 0
  const Complex sinhc = std::abs(z) < 1e-8 ? Complex(1.0, 0.0) + z * z / 6.0 : std::sinh(z) / z;
  const Complex coshz = std::cosh(z);
  const double envelope = std::exp(-p.kappaTot() * t);
  const Complex aRel = envelope * (coshz + (p.kappaB - p.kappaA) * 0.25 * t * sinhc);
  const Complex bRel = Complex(0, -1) * p.g * t * envelope * sinhc;
  return {std::norm(aRel), bRel};
}

std::vector<fitting::FitResult> fitGdissFromDecay(
    const std::vector<std::pair<RealVec, RealVec>>& traces, double kappaA, double kappaB) {
  std::vector<fitting::FitResult> results;
  for (const auto& [t, y] : traces) {
    if (t.size() < 8) fail("invalid-params", "need at least 8 points per trace");
    const double spanDecay = (y.array() - y(y.size() - 1)).abs().maxCoeff();
    if (spanDecay < 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff()))
      fail("fit-failure", "trace carries no decaying signal");

    auto model = [&](const RealVec& p) {
      RealVec out(t.size());
      TwoModeDecayParams tm{p(0), kappaA, kappaB};
      for (int k = 0; k < t.size(); ++k) out(k) = p(1) * analyticTwoModeDecay(tm, t(k)).nbarA + p(2);
      return out;
    };

    // Initial g from the early decay rate: nbarA ~ exp(-4 g^2 t / kappa_b).
    const double y0 = y(0), yEnd = y(y.size() - 1);
    int mid = 0;
    (y.array() - 0.5 * (y0 + yEnd)).abs().minCoeff(&mid);
    const double tHalf = std::max(t(std::max(mid, 1)), t(1));
    const double rate0 = std::log(2.0) / tHalf;
    const double g0 = std::sqrt(std::max(rate0 * kappaB, 1e-12)) / 2.0;

    std::optional<fitting::FitResult> best;
    for (double scale : {1.0, 0.5, 2.0, 4.0}) {
      RealVec init(3);
      init << g0 * scale, y0 - yEnd, yEnd;
      RealVec lo(3), hi(3);
      lo << 0, -1e300, -1e300;
      hi << 1e300, 1e300, 1e300;
      try {
        auto res = fitting::nonlinearLeastSquares(model, y, {}, init, {"g", "scale", "offset"},
                                                  lo, hi);
        if (!best || res.residualNorm < best->residualNorm) best = res;
      } catch (const Error&) {
      }
    }
    if (!best)
      fail("fit-failure", "g_diss fit did not converge for any initial guess");
    best->fixedParams["kappaA"] = kappaA;
    best->fixedParams["kappaB"] = kappaB;
    results.push_back(*best);
  }
  return results;
}

}  // namespace kerrcat::composite
