// Acceptance suite: runs every headline criterion at its stated tolerance and
// prints one pass/fail line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kerrcat/hilbert.hpp"
#include "kerrcat/protocols.hpp"

using namespace kerrcat;

namespace {

const double kK = hzToAngular(1.74e6);
const int kJobs = 2;

spectrum::OscillatorParams workingPoint(double nThA) {
  spectrum::OscillatorParams p;
  p.K = kK;
  p.eps2 = 2.4 * kK;
  p.delta = 8.0 * kK;
  p.g3 = hzToAngular(-6.5e6);
  p.kappaA = 1.0 / 55.7e-6;
  p.nThA = nThA;
  return p;
}

composite::CavityParams cavity(double nThB) {
  composite::CavityParams c;
  c.kappaOut = kTwoPi * 524e3;
  c.kappaLoss = kTwoPi * 157e3;
  c.chiAb = kTwoPi * 180e3;
  c.nThB = nThB;
  return c;
}

protocols::DecoherenceRates tableRates(double kupScale) {
  protocols::DecoherenceRates r;
  r.k1_01 = kTwoPi * 3.18e3;
  r.k1_12 = kTwoPi * 15.92e3;
  r.kphi_01 = kTwoPi * 10.61e3;
  r.kphi_12 = kTwoPi * 31.83e3;
  r.kup_01 = kupScale * r.k1_01;
  r.kup_12 = kupScale * r.k1_12;
  return r;
}

std::pair<double, double> steadyLeakagePopulations(double nThA, int fockDim) {
  const auto osc = workingPoint(nThA);
  const auto spec = spectrum::analyzeOscillator(osc, {fockDim});
  const auto proj = composite::projectOscillator(spec, {fockDim});
  const auto ss = dynamics::steadyState(composite::oscillatorModel(osc, proj), {0});
  double p1 = 0, p2 = 0;
  for (int k = 0; k < proj.dim(); ++k) {
    if (proj.labels[k].manifold == 1) p1 += ss.matrix(k, k).real();
    if (proj.labels[k].manifold == 2) p2 += ss.matrix(k, k).real();
  }
  return {p1, p2};
}

struct Criterion {
  int id;
  std::string label;
  std::function<bool(std::string&)> body;
};

bool inBand(double value, double lo, double hi) { return value >= lo && value <= hi; }

}  // namespace

int main() {
  std::vector<Criterion> criteria;

  criteria.push_back({1, "quantum heating steady state", [](std::string& detail) {
    const auto [p1, p2] = steadyLeakagePopulations(0.0, 45);
    char buf[128];
    snprintf(buf, sizeof buf, "p1 = %.2f%% (7.0 +- 0.3), p2 = %.2f%% (0.6 +- 0.3)", 100 * p1,
             100 * p2);
    detail = buf;
    return inBand(p1, 0.067, 0.073) && inBand(p2, 0.003, 0.009);
  }});

  criteria.push_back({2, "thermal-variant steady state", [](std::string& detail) {
    const auto [p1, p2] = steadyLeakagePopulations(0.025, 45);
    char buf[128];
    snprintf(buf, sizeof buf, "p1 = %.2f%% (9.1 +- 0.3), p2 = %.2f%% (1.1 +- 0.3)", 100 * p1,
             100 * p2);
    detail = buf;
    return inBand(p1, 0.088, 0.094) && inBand(p2, 0.008, 0.014);
  }});

  criteria.push_back({3, "kappa_diss calibration", [](std::string& detail) {
    const auto osc = workingPoint(0.0);
    const auto cav = cavity(0.0);
    const auto spec = spectrum::analyzeOscillator(osc, {45});
    const double kb = cav.kappaB();
    auto kd = [&](double gHz) {
      return angularToHz(composite::extractKappaDiss(
          osc, cav, {kTwoPi * gHz, 0.0, {0, 1}}, spec, {45}));
    };
    const double at166 = kd(166e3);
    const double at50 = kd(50e3);
    bool adiabaticOk = true;
    double worst = 0;
    for (double g : {kb / 10.0, kb / 15.0}) {
      const double rate = composite::extractKappaDiss(osc, cav, {g, 0.0, {0, 1}}, spec, {45});
      const double rel = std::abs(rate - 4 * g * g / kb) / (4 * g * g / kb);
      worst = std::max(worst, rel);
      adiabaticOk = adiabaticOk && rel < 0.10;
    }
    char buf[160];
    snprintf(buf, sizeof buf,
             "166 kHz -> %.1f kHz (120 +- 10), 50 kHz -> %.1f kHz (15 +- 2), adiabatic dev %.1f%%",
             at166 / 1e3, at50 / 1e3, 100 * worst);
    detail = buf;
    return inBand(at166, 110e3, 130e3) && inBand(at50, 13e3, 17e3) && adiabaticOk;
  }});

  criteria.push_back({4, "degeneracy and isoline structure", [](std::string& detail) {
    spectrum::OscillatorParams bare;
    bare.K = kK;
    bool degenerate = true;
    for (double d : {2.0, 4.0, 6.0, 8.0})
      for (double e : {1.5, 2.4}) {
        bare.delta = d * kK;
        bare.eps2 = e * kK;
        const auto spec = spectrum::analyzeOscillator(bare, {45}, true);
        degenerate = degenerate && spec.splittings(0) < 1e-6 * kK;
      }
    spectrum::OscillatorParams p = workingPoint(0.0);
    const double target = hzToAngular(60e3);
    const double at15 = spectrum::splittingIsoline(target, 1.5 * kK, p, {70}, 4.5 * kK, 8.0 * kK);
    const double at20 = spectrum::splittingIsoline(target, 2.0 * kK, p, {45}, 0.05 * kK, 1.0 * kK);
    const double at25 = spectrum::splittingIsoline(target, 2.5 * kK, p, {45}, 2.4 * kK, 3.6 * kK);
    const double b15 = spectrum::splittingIsoline(target, 1.5 * kK, p, {90}, 10 * kK, 20 * kK, 2);
    const double b20 = spectrum::splittingIsoline(target, 2.0 * kK, p, {90}, 10 * kK, 20 * kK, 2);
    const double b25 = spectrum::splittingIsoline(target, 2.5 * kK, p, {90}, 8 * kK, 18 * kK, 2);
    const bool minAt2K = at20 < at15 && at20 < at25;
    const bool noMinForDe2 = !(b20 < b15 && b20 < b25);
    char buf[160];
    snprintf(buf, sizeof buf, "dE0 < 1e-6 K: %s; dE1 isoline %.2f/%.2f/%.2f K, dE2 %.1f/%.1f/%.1f K",
             degenerate ? "yes" : "no", at15 / kK, at20 / kK, at25 / kK, b15 / kK, b20 / kK,
             b25 / kK);
    detail = buf;
    return degenerate && minAt2K && noMinForDe2;
  }});

  criteria.push_back({5, "threshold map at Delta = 7K", [](std::string& detail) {
    spectrum::OscillatorParams osc = workingPoint(0.025);
    osc.delta = 7.0 * kK;
    const auto cav = cavity(0.004);
    const composite::DissipationDrive drive{kTwoPi * 166e3, 0.0, {0, 1}};

    std::vector<double> eps2Grid;
    for (int k = 0; k < 12; ++k) eps2Grid.push_back((1.6 + 1.1 * k / 11.0) * kK);
    std::vector<double> detGrid{hzToAngular(-3e6)};
    for (int k = 0; k < 8; ++k)
      detGrid.push_back(hzToAngular(-680e3 + 1360e3 * k / 7.0));
    const auto scan =
        protocols::bitFlipScan(osc, eps2Grid, cav, drive, detGrid, {45}, 50e-6, kJobs);
    const bool signChange =
        scan.regime == protocols::ThresholdScanResult::Regime::signChange;

    const double isoline =
        spectrum::splittingIsoline(hzToAngular(60e3), osc.delta, osc, {45}, 1.5 * kK, 2.7 * kK);
    const bool nearIsoline = std::abs(scan.eps2Th - isoline) <= 0.10 * isoline;

    const auto thFull =
        protocols::thresholdFromTzCrossing(osc, cav, drive, eps2Grid, {45}, false, kJobs);
    const auto thEff =
        protocols::thresholdFromTzCrossing(osc, cav, drive, eps2Grid, {45}, true, kJobs);
    const bool effClose =
        std::abs(thEff.eps2Crossing - thFull.eps2Crossing) <= 0.05 * thFull.eps2Crossing;

    char buf[240];
    snprintf(buf, sizeof buf,
             "scan th %.3f K (zero at %.3f K) vs isoline %.3f K (10%%); Tz-crossing full %.3f K "
             "vs effective %.3f K (5%%)",
             scan.eps2Th / kK, scan.eps2Crossing / kK, isoline / kK, thFull.eps2Crossing / kK,
             thEff.eps2Crossing / kK);
    detail = buf;
    return signChange && nearIsoline && effClose;
  }});

  criteria.push_back({6, "analytic oracles match Lindblad propagation", [](std::string& detail) {
    double worst = 0;
    // Manifold coherence signals against the six-state numeric model.
    const auto rates = tableRates(0.0);
    const protocols::ReadoutContrasts m{-3.14, -4.05, -4.76, -5.22};
    const double deltaOmega = kTwoPi * 180e3;
    std::vector<double> times;
    for (int k = 0; k < 50; ++k) times.push_back(60e-6 * k / 49.0);
    const auto sig = protocols::manifoldCoherenceSignals(rates, m, deltaOmega, times);

    const int d = 6;
    auto ket = [&](int s) {
      Vec v = Vec::Zero(d);
      v(s) = 1;
      return v;
    };
    auto proj = [&](int manifold) {
      Mat p = Mat::Zero(d, d);
      p(2 * manifold, 2 * manifold) = p(2 * manifold + 1, 2 * manifold + 1) = 1.0;
      return p;
    };
    dynamics::LindbladModel model;
    model.basisTag = "eigen";
    model.jumps = {{rates.k1_01, Mat(ket(0) * ket(3).adjoint() + ket(1) * ket(2).adjoint())},
                   {2 * rates.kphi_01, proj(1)},
                   {rates.k1_12, Mat(ket(2) * ket(5).adjoint() + ket(3) * ket(4).adjoint())},
                   {2 * rates.kphi_12, proj(2)}};
    const Mat obs = m.m0 * proj(0) + m.m1 * proj(1) + m.m2 * proj(2);

    Mat r01 = Mat::Identity(d, d);
    r01.block(0, 0, 4, 4) << 1, 0, 0, -1, 0, 1, -1, 0, 0, 1, 1, 0, 1, 0, 0, 1;
    r01.block(0, 0, 4, 4) /= std::sqrt(2.0);
    Mat swap01 = Mat::Zero(d, d);
    swap01(0, 2) = swap01(2, 0) = swap01(1, 3) = swap01(3, 1) = swap01(4, 4) = swap01(5, 5) = 1.0;
    Mat r12 = Mat::Identity(d, d);
    r12.block(2, 2, 4, 4) << 1, 0, 0, -1, 0, 1, -1, 0, 0, 1, 1, 0, 1, 0, 0, 1;
    r12.block(2, 2, 4, 4) /= std::sqrt(2.0);

    {  // relaxation (0,1)
      model.hamiltonian = Mat::Zero(d, d);
      Mat rho0 = 0.5 * (ket(2) * ket(2).adjoint() + ket(3) * ket(3).adjoint());
      const auto st = dynamics::evolve(model, {rho0, "eigen", {}}, times);
      for (size_t k = 0; k < times.size(); ++k)
        worst = std::max(worst, std::abs((obs * st[k].matrix).trace().real() - sig.t1_01[k]));
    }
    {  // Ramsey (0,1)
      model.hamiltonian = deltaOmega * proj(1) + 2 * deltaOmega * proj(2);
      Vec a = (ket(0) + ket(3)) / std::sqrt(2.0), b = (ket(1) + ket(2)) / std::sqrt(2.0);
      Mat rho0 = 0.5 * (a * a.adjoint() + b * b.adjoint());
      const auto st = dynamics::evolve(model, {rho0, "eigen", {}}, times);
      for (size_t k = 0; k < times.size(); ++k) {
        const Mat rot = r01 * st[k].matrix * r01.adjoint();
        worst = std::max(worst, std::abs((obs * rot).trace().real() - sig.tphi_01[k]));
      }
    }
    {  // relaxation (1,2)
      model.hamiltonian = Mat::Zero(d, d);
      Mat rho0 = 0.5 * (ket(4) * ket(4).adjoint() + ket(5) * ket(5).adjoint());
      const auto st = dynamics::evolve(model, {rho0, "eigen", {}}, times);
      for (size_t k = 0; k < times.size(); ++k) {
        const Mat rot = swap01 * st[k].matrix * swap01.adjoint();
        worst = std::max(worst, std::abs((obs * rot).trace().real() - sig.t1_12[k]));
      }
    }
    {  // Ramsey (1,2)
      model.hamiltonian = deltaOmega * proj(2);
      Vec a = (ket(2) + ket(5)) / std::sqrt(2.0), b = (ket(3) + ket(4)) / std::sqrt(2.0);
      Mat rho0 = 0.5 * (a * a.adjoint() + b * b.adjoint());
      const auto st = dynamics::evolve(model, {rho0, "eigen", {}}, times);
      for (size_t k = 0; k < times.size(); ++k) {
        const Mat rot = swap01 * r12 * st[k].matrix * r12.adjoint() * swap01.adjoint();
        worst = std::max(worst, std::abs((obs * rot).trace().real() - sig.tphi_12[k]));
      }
    }

    // Linear two-mode decay against the single-excitation Lindblad model.
    composite::TwoModeDecayParams tm{kTwoPi * 300e3, 1.0 / 55.7e-6, kTwoPi * 681e3};
    const Mat a2 = hilbert::buildFockOperators({2}).annihilation;
    const Mat eye2 = Mat::Identity(2, 2);
    const Mat aF = hilbert::tensorEmbed(a2, eye2), bF = hilbert::tensorEmbed(eye2, a2);
    dynamics::LindbladModel two;
    two.hamiltonian = tm.g * (aF * bF.adjoint() + aF.adjoint() * bF);
    two.jumps = {{tm.kappaA, aF}, {tm.kappaB, bF}};
    Mat rho0 = Mat::Zero(4, 4);
    rho0(2, 2) = 1.0;
    std::vector<double> times2;
    for (int k = 0; k < 50; ++k) times2.push_back(6e-6 * k / 49.0);
    const auto st = dynamics::evolve(two, {rho0, "composite", {2, 2}}, times2);
    for (size_t k = 0; k < times2.size(); ++k) {
      const double nA = (aF.adjoint() * aF * st[k].matrix).trace().real();
      worst = std::max(worst, std::abs(nA - composite::analyticTwoModeDecay(tm, times2[k]).nbarA));
    }

    char buf[96];
    snprintf(buf, sizeof buf, "max |analytic - numeric| = %.2e (bound 1e-8)", worst);
    detail = buf;
    return worst < 1e-8;
  }});

  criteria.push_back({7, "initialization ramp fidelities", [](std::string& detail) {
    spectrum::OscillatorParams target;
    target.K = kK;
    target.eps2 = 2.4 * kK;
    target.delta = 8.0 * kK;
    dynamics::RampProfile eps2Ramp{dynamics::RampProfile::Kind::gaussianRise, 1e-6, 200e-9, 0.0,
                                   target.eps2};
    dynamics::RampProfile deltaRamp{dynamics::RampProfile::Kind::gaussianRise, 5.6e-6, 1.12e-6,
                                    0.0, target.delta};
    const double fWith = protocols::initializationRamp(target, eps2Ramp, deltaRamp, true, {30});
    const double fWithout =
        protocols::initializationRamp(target, eps2Ramp, deltaRamp, false, {30});
    char buf[96];
    snprintf(buf, sizeof buf, "with ramp %.4f (>= 0.90), without %.6f (<= 0.01)", fWith, fWithout);
    detail = buf;
    return fWith >= 0.90 && fWithout <= 0.01;
  }});

  criteria.push_back({8, "gate fidelity and Z-gate error", [](std::string& detail) {
    const auto spec = spectrum::analyzeOscillator(workingPoint(0.0), {45});
    const double f140 =
        protocols::kerrGateFidelity(kTwoPi * 4.2e3, kTwoPi * 21.2e3, 140e-9, kK, spec);
    const double f144 =
        protocols::kerrGateFidelity(kTwoPi * 4.2e3, kTwoPi * 21.2e3, 144e-9, kK, spec);
    const double xi = protocols::zGateError(1.0 / 2.91e-6, 100e-9);
    char buf[128];
    snprintf(buf, sizeof buf, "F(140ns) = %.4f, F(144ns) = %.4f (0.86..0.92); xi_Z = %.3f%%",
             f140, f144, 100 * xi);
    detail = buf;
    return inBand(f140, 0.86, 0.92) && inBand(f144, 0.86, 0.92) &&
           inBand(xi, 0.0162, 0.0172);
  }});

  criteria.push_back({9, "excitation-robustness study", [](std::string& detail) {
    const auto rep =
        protocols::excitationRobustnessStudy(tableRates(0.1), {-3.14, -4.05, -4.76, -5.22});
    const bool ratesOk = rep.relErrK1_01 <= 0.20 && rep.relErrK1_12 <= 0.20 &&
                         rep.relErrKphi_01 <= 0.20 && rep.relErrKphi_12 <= 0.20;
    const bool ratioOk = inBand(rep.p1ByRatio, 0.091, 0.111);
    const bool modelOk = inBand(rep.p1ByModel, 0.090, 0.100);
    char buf[200];
    snprintf(buf, sizeof buf,
             "rate errors %.0f/%.0f/%.0f/%.0f%% (<= 20); ratio %.2f%% (10.1 +- 1.0), model %.2f%% "
             "(9.5 +- 0.5), true %.2f%%",
             100 * rep.relErrK1_01, 100 * rep.relErrK1_12, 100 * rep.relErrKphi_01,
             100 * rep.relErrKphi_12, 100 * rep.p1ByRatio, 100 * rep.p1ByModel, 100 * rep.p1True);
    detail = buf;
    return ratesOk && ratioOk && modelOk;
  }});

  criteria.push_back({10, "frequency selectivity", [](std::string& detail) {
    const auto osc = workingPoint(0.025);
    const auto cav = cavity(0.004);
    const auto spec = spectrum::analyzeOscillator(osc, {45});
    const auto proj = composite::projectOscillator(spec, {45});

    // Ratio of the qubit-sector effective rate to the resonant kappa_diss.
    const composite::DissipationDrive drive{kTwoPi * 166e3, 0.0, {0, 1}};
    const auto jumps = composite::effectiveDissipators(osc, cav, drive, proj);
    double coolRate = 0, phaseRate = 0;
    const Mat coolOp = proj.manifoldProjector(0) * proj.a * proj.manifoldProjector(1);
    const Mat phaseOp = proj.manifoldProjector(0) * proj.a * proj.manifoldProjector(0);
    for (const auto& j : jumps) {
      if ((j.op - coolOp).norm() < 1e-12 * coolOp.norm()) coolRate = j.rate;
      if ((j.op - phaseOp).norm() < 1e-12 * phaseOp.norm()) phaseRate = std::max(phaseRate, j.rate);
    }
    const double ratio = phaseRate / coolRate;

    // Equator-sector Liouvillian rates with and without the exchange.
    const int ip = proj.stateIndex(0, +1), im = proj.stateIndex(0, -1);
    Mat obsX = Mat::Zero(proj.dim(), proj.dim());
    obsX(ip, ip) = 1.0;
    obsX(im, im) = -1.0;
    Mat obsY = Mat::Zero(proj.dim(), proj.dim());
    obsY(ip, im) = Complex(0, 1);
    obsY(im, ip) = Complex(0, -1);
    const auto bare = composite::oscillatorModel(osc, proj);
    const Eigen::VectorXi parity = proj.parity;
    const double x0 = dynamics::slowestDecayRate(bare, obsX, &parity);
    const double y0 = dynamics::slowestDecayRate(bare, obsY, &parity);
    const auto cm = composite::buildCoupledModel(osc, cav, drive, spec, {45});
    const double x1 =
        dynamics::slowestDecayRate(cm.model, cm.oscillatorObservable(obsX), &cm.stateParity);
    const double y1 =
        dynamics::slowestDecayRate(cm.model, cm.oscillatorObservable(obsY), &cm.stateParity);
    const double shiftX = std::abs(x1 - x0) / x0, shiftY = std::abs(y1 - y0) / y0;

    char buf[160];
    snprintf(buf, sizeof buf,
             "phase/cooling rate ratio %.2e (< 2e-4); equator rate shifts %.2f%%/%.2f%% (< 5%%)",
             ratio, 100 * shiftX, 100 * shiftY);
    detail = buf;
    return ratio < 2e-4 && shiftX < 0.05 && shiftY < 0.05;
  }});

  criteria.push_back({11, "spectroscopy inversion", [](std::string& detail) {
    const auto spec = spectrum::analyzeOscillator(workingPoint(0.025), {45});
    const auto m = protocols::cavityReadoutModel(cavity(0.0), spec, 0.0);

    // Exact synthetic round trip.
    const double q0 = 0.91, q1 = 0.077, q2 = 0.013;
    protocols::SpectroscopyPeaks synth;
    synth.pk01 = 0.5 * (q0 - q1) * (m.m1 - m.m0);
    synth.pk12 = 0.5 * (q1 - q2) * (m.m2 - m.m1);
    synth.pk23 = 0.5 * q2 * (m.m3 - m.m2);
    const auto round = protocols::spectroscopyInversion(synth, m, 101);
    const bool exact = std::abs(round.p0 - q0) < 1e-10 && std::abs(round.p1 - q1) < 1e-10 &&
                       std::abs(round.p2 - q2) < 1e-10;

    protocols::SpectroscopyPeaks peaks{-453.7e-3, -28.0e-3, -4.1e-3, 14e-3, 1.37e-3, 1.6e-3};
    const auto est = protocols::spectroscopyInversion(peaks, m, 20000, 1, kJobs);
    const bool central = std::abs(est.p0 - 0.9098) < 0.015 && std::abs(est.p1 - 0.0769) < 0.015 &&
                         std::abs(est.p2 - 0.0133) < 0.015;
    // "Of order 2.8 pt": within a decade of the reported scale.
    const bool sigmaOk = inBand(est.sigma1, 0.0028, 0.28);
    char buf[200];
    snprintf(buf, sizeof buf,
             "round trip %s; p = (%.2f, %.2f, %.2f)%% vs (90.98, 7.69, 1.33) +- 1.5; sigma_p1 = "
             "%.2f pt (order 2.8)",
             exact ? "exact" : "off", 100 * est.p0, 100 * est.p1, 100 * est.p2,
             100 * est.sigma1);
    detail = buf;
    return exact && central && sigmaOk;
  }});

  criteria.push_back({12, "infrastructure invariants", [](std::string& detail) {
    // Trace preservation of constructed Liouvillians.
    const auto osc = workingPoint(0.025);
    const auto spec = spectrum::analyzeOscillator(osc, {45});
    const auto cm = composite::buildCoupledModel(osc, cavity(0.004),
                                                 {kTwoPi * 166e3, 0.0, {0, 1}}, spec, {45});
    const Mat liou = dynamics::buildLiouvillian(cm.model);
    const int n = cm.dim();
    Vec vecI = Vec::Zero(n * n);
    for (int k = 0; k < n; ++k) vecI(k * n + k) = 1.0;
    const double traceResidual =
        (vecI.adjoint() * liou).cwiseAbs().maxCoeff() / liou.cwiseAbs().maxCoeff();

    // Positivity along a propagated trajectory.
    const auto proj = composite::projectOscillator(spec, {45});
    const auto single = composite::oscillatorModel(osc, proj);
    Mat pz = Mat::Zero(proj.dim(), proj.dim());
    {
      Vec v = Vec::Zero(proj.dim());
      v(proj.stateIndex(0, +1)) = v(proj.stateIndex(0, -1)) = 1.0 / std::sqrt(2.0);
      pz = v * v.adjoint();
    }
    double minEig = 0;
    for (const auto& st :
         dynamics::evolve(single, {pz, "eigen", {}}, {1e-6, 20e-6, 400e-6})) {
      Eigen::SelfAdjointEigenSolver<Mat> es(st.matrix);
      minEig = std::min(minEig, es.eigenvalues().minCoeff());
    }

    // Seed reproducibility of the Monte-Carlo machinery.
    auto solver = [](const RealVec& x) -> std::optional<fitting::McSample> {
      return fitting::McSample{x(0) * x(0), 0.1};
    };
    const auto mcA = fitting::monteCarloPropagate(solver, {{1.0, 0.3}}, 4000, 17, 1);
    const auto mcB = fitting::monteCarloPropagate(solver, {{1.0, 0.3}}, 4000, 17, 2);
    const bool reproducible = mcA.mean == mcB.mean && mcA.totalVariance == mcB.totalVariance;

    // Truncation convergence: doubling the Fock dimension moves p1 by
    // less than 0.05 percentage points.
    const auto [p45, q45] = steadyLeakagePopulations(0.025, 45);
    const auto [p90, q90] = steadyLeakagePopulations(0.025, 90);
    const double shift = std::abs(p90 - p45);

    char buf[200];
    snprintf(buf, sizeof buf,
             "trace residual %.1e; min eigenvalue %.1e; seeds %s; p1 shift %.4f pt (< 0.05)",
             traceResidual, minEig, reproducible ? "bitwise equal" : "DIFFER", 100 * shift);
    detail = buf;
    return traceResidual < 1e-12 && minEig > -1e-7 && reproducible && shift < 5e-4;
  }});

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    printf("%s  criterion %2d: %s — %s [%.1f s]\n", ok ? "PASS" : "FAIL", c.id, c.label.c_str(),
           detail.c_str(), secs);
    fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) printf("%d criterion(s) failed\n", failures);
  else printf("all %zu criteria passed\n", criteria.size());
  return failures ? 1 : 0;
}
