// Config-driven experiment runner: maps each study to a reproducible command
// emitting results.json plus CSV artifacts.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>

#include "kerrcat/io.hpp"
#include "kerrcat/protocols.hpp"

using json = nlohmann::ordered_json;
using namespace kerrcat;

namespace {

struct RunContext {
  io::RunConfig cfg;
  json results;
  json diagnostics;
  std::vector<std::pair<std::string, std::string>> csvFiles;  // name -> contents
};

spectrum::OscillatorParams oscillatorFromConfig(const io::RunConfig& cfg) {
  spectrum::OscillatorParams p;
  p.K = hzToAngular(cfg.get("K_over_2pi_Hz"));
  p.eps2 = cfg.getOr("eps2_over_K", 2.4) * p.K;
  p.delta = cfg.getOr("delta_over_K", 8.0) * p.K;
  p.g3 = hzToAngular(cfg.getOr("g3_over_2pi_Hz", -6.5e6));
  p.kappaA = hzToAngular(cfg.getOr("kappa_a_Hz", 0.0));
  p.nThA = cfg.getOr("n_th_a", 0.0);
  return p;
}

// An explicit g3 = 0 in the config acknowledges the absent Stark term.
bool noStarkAcknowledged(const io::RunConfig& cfg) {
  return cfg.has("g3_over_2pi_Hz") && cfg.get("g3_over_2pi_Hz") == 0.0;
}

composite::CavityParams cavityFromConfig(const io::RunConfig& cfg) {
  composite::CavityParams c;
  c.kappaOut = hzToAngular(cfg.get("kappa_b_out_Hz"));
  c.kappaLoss = hzToAngular(cfg.getOr("kappa_b_loss_Hz", 0.0));
  c.nThB = cfg.getOr("n_th_b", 0.0);
  c.chiAb = hzToAngular(cfg.getOr("chi_ab_Hz", 180e3));
  c.cavityDim = int(cfg.getOr("cavity_dim", 0));
  return c;
}

spectrum::FockSpace fockFromConfig(const io::RunConfig& cfg) {
  if (cfg.fockDim) return {*cfg.fockDim};
  return {int(cfg.getOr("fock_dim", 45))};
}

protocols::DecoherenceRates ratesFromConfig(const io::RunConfig& cfg, double kupScale = 0.0) {
  protocols::DecoherenceRates r;
  r.k1_01 = hzToAngular(cfg.getOr("k1_01_Hz", 3.18e3));
  r.k1_12 = hzToAngular(cfg.getOr("k1_12_Hz", 15.92e3));
  r.kphi_01 = hzToAngular(cfg.getOr("kphi_01_Hz", 10.61e3));
  r.kphi_12 = hzToAngular(cfg.getOr("kphi_12_Hz", 31.83e3));
  r.kup_01 = kupScale * r.k1_01;
  r.kup_12 = kupScale * r.k1_12;
  return r;
}

std::vector<double> linearGrid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int k = 0; k < n; ++k) g.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
  return g;
}

void runSpectrum(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space, noStarkAcknowledged(ctx.cfg));
  ctx.csvFiles.emplace_back("spectrum.csv", spectrum::spectrumCsv(spec));
  json splittings = json::array();
  for (int i = 0; i < std::min(spec.pairCount(), spec.confinedCount / 2 + 1); ++i)
    splittings.push_back(angularToHz(spec.splittings(i)));
  ctx.results["omega01_over_2pi_Hz"] = angularToHz(spec.transitionFrequency(0, 1));
  ctx.results["omega12_over_2pi_Hz"] = angularToHz(spec.transitionFrequency(1, 2));
  ctx.results["splittings_over_h_Hz"] = splittings;
  ctx.results["confined_count"] = spec.confinedCount;
}

void runWigner(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space, noStarkAcknowledged(ctx.cfg));
  const auto basis = spectrum::kcqBasisStates(spec);
  const int which = int(ctx.cfg.getOr("state", 0));
  const Vec* states[] = {&basis.plusZ, &basis.minusZ, &basis.plusX, &basis.plusY};
  if (which < 0 || which > 3) fail("invalid-params", "state must be 0..3 (+Z,-Z,+X,+Y)");
  const Vec& psi = *states[which];
  const Mat rho = psi * psi.adjoint();

  const auto meta = spectrum::metapotentialGeometry(osc);
  const double half = ctx.cfg.getOr("grid_halfwidth", meta.wellAmplitude + 3.0);
  const int n = int(ctx.cfg.getOr("grid_points", 81));
  std::vector<PhaseSpacePoint> grid;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      grid.push_back({-half + 2 * half * i / (n - 1), -half + 2 * half * j / (n - 1)});
  const auto w = hilbert::wignerFunction(rho, grid);
  std::ostringstream csv;
  csv.precision(10);
  csv << "re_beta,im_beta,wigner\n";
  for (size_t k = 0; k < grid.size(); ++k)
    csv << grid[k].real() << ',' << grid[k].imag() << ',' << w[k] << '\n';
  ctx.csvFiles.emplace_back("wigner.csv", csv.str());
  ctx.results["grid_points"] = n;
  ctx.results["max_abs_wigner"] = *std::max_element(w.begin(), w.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  });
}

void runSteadyLeakage(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space);
  std::vector<double> gGrid;
  if (ctx.cfg.has("g_diss_max_Hz")) {
    const int n = int(ctx.cfg.getOr("g_diss_points", 9));
    for (double g : linearGrid(0.0, hzToAngular(ctx.cfg.get("g_diss_max_Hz")), n))
      gGrid.push_back(g);
  } else {
    gGrid.push_back(hzToAngular(ctx.cfg.getOr("g_diss_Hz", 0.0)));
  }
  const double tau = ctx.cfg.getOr("tau_delay_s", 4.2e-6);
  const auto pts =
      protocols::steadyLeakageVsDissipation(osc, cav, gGrid, spec, space, tau, ctx.cfg.jobs);
  std::ostringstream csv;
  csv.precision(10);
  csv << "g_diss_Hz,p1,p2\n";
  for (const auto& pt : pts)
    csv << angularToHz(pt.gDiss) << ',' << pt.p1 << ',' << pt.p2 << '\n';
  ctx.csvFiles.emplace_back("leakage.csv", csv.str());
  ctx.results["p1"] = pts.front().p1;
  ctx.results["p2"] = pts.front().p2;
  ctx.results["p1_final"] = pts.back().p1;
  if (ctx.cfg.has("dephasing_Hz")) {
    const auto proj = composite::projectOscillator(spec, space);
    const auto [p1, p2] = protocols::dephasingEquivalentHeating(
        osc, proj, hzToAngular(ctx.cfg.get("dephasing_Hz")));
    ctx.results["p1_dephasing_equivalent"] = p1;
    ctx.results["p2_dephasing_equivalent"] = p2;
  }
}

void runKappaDiss(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space);
  std::vector<double> gGrid;
  if (ctx.cfg.has("g_diss_max_Hz")) {
    const int n = int(ctx.cfg.getOr("g_diss_points", 6));
    const double gMax = hzToAngular(ctx.cfg.get("g_diss_max_Hz"));
    for (int k = 1; k <= n; ++k) gGrid.push_back(gMax * k / n);
  } else {
    gGrid.push_back(hzToAngular(ctx.cfg.get("g_diss_Hz")));
  }
  std::ostringstream csv;
  csv.precision(10);
  csv << "g_diss_Hz,kappa_diss_Hz\n";
  json rates = json::array();
  for (double g : gGrid) {
    const double kd =
        composite::extractKappaDiss(osc, cav, {g, 0.0, {0, 1}}, spec, space);
    csv << angularToHz(g) << ',' << angularToHz(kd) << '\n';
    rates.push_back({{"g_diss_Hz", angularToHz(g)}, {"kappa_diss_Hz", angularToHz(kd)}});
  }
  ctx.csvFiles.emplace_back("kappa_diss.csv", csv.str());
  ctx.results["map"] = rates;
}

void runRabiContrast(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space);
  const auto proj = composite::projectOscillator(spec, space);
  const auto contrasts = protocols::cavityReadoutModel(cav, spec, 0.0);
  const auto rates = ratesFromConfig(ctx.cfg);

  protocols::PopulationEstimate trueP;
  trueP.p1 = ctx.cfg.getOr("p1_true", 0.092);
  trueP.p2 = ctx.cfg.getOr("p2_true", 0.0133);
  trueP.p0 = 1.0 - trueP.p1 - trueP.p2;
  const auto amps = linearGrid(0.0, ctx.cfg.getOr("amplitude_max", 2.5),
                               int(ctx.cfg.getOr("amplitude_points", 26)));
  const auto traces = protocols::rabiContrastProtocol(proj, rates, trueP, contrasts, amps);

  std::ostringstream csv;
  csv.precision(10);
  csv << "amplitude,with_pi01,without_pi01\n";
  for (size_t k = 0; k < amps.size(); ++k)
    csv << amps[k] << ',' << traces.withPi01[k] << ',' << traces.withoutPi01[k] << '\n';
  ctx.csvFiles.emplace_back("rabi_contrast.csv", csv.str());

  const double p2Sigma = ctx.cfg.getOr("p2_sigma", 0.005);
  const int mc = int(ctx.cfg.getOr("mc_samples", 200));
  const auto byRatio =
      protocols::fitLeakagePopulation(traces, proj, rates, trueP.p2, p2Sigma,
                                      protocols::LeakageFitMode::amplitudeRatio, {}, std::max(mc, 100),
                                      ctx.cfg.seed, ctx.cfg.jobs);
  const auto byModel =
      protocols::fitLeakagePopulation(traces, proj, rates, trueP.p2, p2Sigma,
                                      protocols::LeakageFitMode::fullModel, {}, std::max(mc, 100),
                                      ctx.cfg.seed, ctx.cfg.jobs);
  ctx.results["p1_true"] = trueP.p1;
  ctx.results["p1_amplitude_ratio"] = byRatio.p1;
  ctx.results["p1_amplitude_ratio_sigma"] = byRatio.sigma1;
  ctx.results["p1_full_model"] = byModel.p1;
  ctx.results["p1_full_model_sigma"] = byModel.sigma1;
}

void runCoherenceSignals(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space);
  const auto contrasts = protocols::cavityReadoutModel(cav, spec, 0.0);
  const auto rates = ratesFromConfig(ctx.cfg);
  const double deltaOmega = hzToAngular(ctx.cfg.getOr("ramsey_detuning_Hz", 180e3));
  const auto times = linearGrid(0.0, ctx.cfg.getOr("time_max_s", 120e-6),
                                int(ctx.cfg.getOr("time_points", 200)));
  const auto sig = protocols::manifoldCoherenceSignals(rates, contrasts, deltaOmega, times);
  ctx.csvFiles.emplace_back(
      "coherence_signals.csv",
      dynamics::timeSeriesCsv(times, {{"t1_01", sig.t1_01},
                                      {"tphi_01", sig.tphi_01},
                                      {"t1_12", sig.t1_12},
                                      {"tphi_12", sig.tphi_12}}));
  ctx.results["contrasts_rad"] = {contrasts.m0, contrasts.m1, contrasts.m2, contrasts.m3};
}

void runSpectroscopyInvert(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space);
  const auto contrasts = protocols::cavityReadoutModel(cav, spec, 0.0);
  protocols::SpectroscopyPeaks peaks;
  peaks.pk01 = 1e-3 * ctx.cfg.getOr("pk01_mrad", -453.7);
  peaks.pk12 = 1e-3 * ctx.cfg.getOr("pk12_mrad", -28.0);
  peaks.pk23 = 1e-3 * ctx.cfg.getOr("pk23_mrad", -4.1);
  peaks.sigma01 = 1e-3 * ctx.cfg.getOr("sigma01_mrad", 14.0);
  peaks.sigma12 = 1e-3 * ctx.cfg.getOr("sigma12_mrad", 1.37);
  peaks.sigma23 = 1e-3 * ctx.cfg.getOr("sigma23_mrad", 1.6);
  const int n = int(ctx.cfg.getOr("mc_samples", 20000));
  const auto est = protocols::spectroscopyInversion(peaks, contrasts, n, ctx.cfg.seed, ctx.cfg.jobs);
  ctx.results["p0"] = est.p0;
  ctx.results["p1"] = est.p1;
  ctx.results["p2"] = est.p2;
  ctx.results["sigma_p0"] = est.sigma0;
  ctx.results["sigma_p1"] = est.sigma1;
  ctx.results["sigma_p2"] = est.sigma2;
}

void runTzScan(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto eps2Grid = linearGrid(ctx.cfg.getOr("eps2_min_over_K", 1.6) * osc.K,
                                   ctx.cfg.getOr("eps2_max_over_K", 2.7) * osc.K,
                                   int(ctx.cfg.getOr("eps2_points", 12)));
  std::vector<double> detGrid{hzToAngular(ctx.cfg.getOr("reference_detuning_Hz", -3e6))};
  for (double d : linearGrid(ctx.cfg.getOr("detuning_min_Hz", -680e3),
                             ctx.cfg.getOr("detuning_max_Hz", 680e3),
                             int(ctx.cfg.getOr("detuning_points", 8))))
    detGrid.push_back(hzToAngular(d));
  const composite::DissipationDrive drive{hzToAngular(ctx.cfg.getOr("g_diss_Hz", 166e3)), 0.0,
                                          {0, 1}};
  const auto res = protocols::bitFlipScan(osc, eps2Grid, cav, drive, detGrid, space,
                                          ctx.cfg.getOr("duration_s", 50e-6), ctx.cfg.jobs);
  std::ostringstream csv;
  csv.precision(10);
  csv << "eps2_over_K,detuning_Hz,delta_z\n";
  for (size_t e = 0; e < res.eps2Grid.size(); ++e)
    for (size_t d = 0; d < res.detuningGrid.size(); ++d)
      csv << res.eps2Grid[e] / osc.K << ',' << angularToHz(res.detuningGrid[d]) << ','
          << res.deltaZ(e, d) << '\n';
  ctx.csvFiles.emplace_back("tz_scan.csv", csv.str());
  std::ostringstream rows;
  rows.precision(10);
  rows << "eps2_over_K,peak_amplitude,diagnostic\n";
  for (size_t e = 0; e < res.eps2Grid.size(); ++e)
    rows << res.eps2Grid[e] / osc.K << ',' << res.peakAmplitude(e) << ','
         << res.rowDiagnostics[e] << '\n';
  ctx.csvFiles.emplace_back("tz_scan_rows.csv", rows.str());
  ctx.results["eps2_th_over_K"] = res.eps2Th / osc.K;
  ctx.results["eps2_crossing_over_K"] = res.eps2Crossing / osc.K;
  ctx.results["regime"] =
      res.regime == protocols::ThresholdScanResult::Regime::signChange ? "signChange"
                                                                       : "saturation";
}

void runEps2Threshold(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto cav = cavityFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto eps2Grid = linearGrid(ctx.cfg.getOr("eps2_min_over_K", 1.5) * osc.K,
                                   ctx.cfg.getOr("eps2_max_over_K", 2.7) * osc.K,
                                   int(ctx.cfg.getOr("eps2_points", 11)));
  const composite::DissipationDrive drive{hzToAngular(ctx.cfg.getOr("g_diss_Hz", 166e3)), 0.0,
                                          {0, 1}};
  const bool effective = ctx.cfg.getOr("use_effective_model", 0.0) != 0.0;
  const auto th = protocols::thresholdFromTzCrossing(osc, cav, drive, eps2Grid, space, effective,
                                                     ctx.cfg.jobs);
  std::ostringstream csv;
  csv.precision(10);
  csv << "eps2_over_K,tz_with_s,tz_without_s\n";
  for (size_t k = 0; k < th.eps2Grid.size(); ++k)
    csv << th.eps2Grid[k] / osc.K << ',' << th.tzWith[k] << ',' << th.tzWithout[k] << '\n';
  ctx.csvFiles.emplace_back("eps2_threshold.csv", csv.str());
  ctx.results["eps2_th_over_K"] = th.eps2Th / osc.K;
  ctx.results["eps2_crossing_over_K"] = th.eps2Crossing / osc.K;
  ctx.results["model"] = effective ? "effective" : "full";

  const double isoHz = ctx.cfg.getOr("isoline_splitting_Hz", 60e3);
  try {
    const double iso = spectrum::splittingIsoline(hzToAngular(isoHz), osc.delta, osc, space,
                                                  eps2Grid.front(), eps2Grid.back());
    ctx.results["isoline_eps2_over_K"] = iso / osc.K;
  } catch (const Error& e) {
    ctx.diagnostics["isoline"] = e.what();
  }
}

void runInitRamp(RunContext& ctx) {
  auto osc = oscillatorFromConfig(ctx.cfg);
  osc.kappaA = 0;
  osc.nThA = 0;
  osc.g3 = 0;  // lossless Schroedinger evolution of the bare drive Hamiltonian
  const auto space = fockFromConfig(ctx.cfg);
  dynamics::RampProfile eps2Ramp{dynamics::RampProfile::Kind::gaussianRise,
                                 ctx.cfg.getOr("eps2_ramp_s", 1e-6),
                                 ctx.cfg.getOr("eps2_sigma_s", 200e-9), 0.0, osc.eps2};
  dynamics::RampProfile deltaRamp{dynamics::RampProfile::Kind::gaussianRise,
                                  ctx.cfg.getOr("delta_ramp_s", 5.6e-6),
                                  ctx.cfg.getOr("delta_sigma_s", 1.12e-6), 0.0, osc.delta};
  const double mode = ctx.cfg.getOr("with_detuning_ramp", -1.0);
  if (mode < 0 || mode == 1.0)
    ctx.results["fidelity_with_ramp"] =
        protocols::initializationRamp(osc, eps2Ramp, deltaRamp, true, space);
  if (mode < 0 || mode == 0.0)
    ctx.results["fidelity_without_ramp"] =
        protocols::initializationRamp(osc, eps2Ramp, deltaRamp, false, space);
}

void runGateFidelity(RunContext& ctx) {
  const auto osc = oscillatorFromConfig(ctx.cfg);
  const auto space = fockFromConfig(ctx.cfg);
  const auto spec = spectrum::analyzeOscillator(osc, space);
  const double k1 = hzToAngular(ctx.cfg.getOr("kappa1_eff_Hz", 4.2e3));
  const double kphi = hzToAngular(ctx.cfg.getOr("kappa_phi_eff_Hz", 21.2e3));
  const auto taus = linearGrid(ctx.cfg.getOr("tau_min_s", 140e-9),
                               ctx.cfg.getOr("tau_max_s", 144e-9),
                               int(ctx.cfg.getOr("tau_points", 2)));
  const int gateDim = int(ctx.cfg.getOr("gate_dim", 26));
  std::ostringstream csv;
  csv.precision(10);
  csv << "tau_s,fidelity\n";
  json fids = json::array();
  for (double tau : taus) {
    const double f = protocols::kerrGateFidelity(k1, kphi, tau, osc.K, spec, gateDim);
    csv << tau << ',' << f << '\n';
    fids.push_back({{"tau_s", tau}, {"fidelity", f}});
  }
  ctx.csvFiles.emplace_back("gate_fidelity.csv", csv.str());
  ctx.results["kerr_gate"] = fids;
  const double gamma = hzToAngular(ctx.cfg.getOr("gamma_rabi_Hz", 54697.0));
  const double tauZ = ctx.cfg.getOr("z_gate_tau_s", 100e-9);
  ctx.results["z_gate_error"] = protocols::zGateError(gamma, tauZ);
}

void runZroFidelity(RunContext& ctx) {
  const long shots = long(ctx.cfg.getOr("shots", 2e5));
  const double sep = ctx.cfg.getOr("separation_sigmas", 5.5);
  const double flipProb = ctx.cfg.getOr("flip_probability", 0.0);
  const double threshold = ctx.cfg.getOr("threshold", 0.0);
  std::mt19937_64 rng(ctx.cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution flip(flipProb);
  std::bernoulli_distribution half(0.5);
  std::vector<double> first, second;
  first.reserve(shots);
  second.reserve(shots);
  for (long k = 0; k < shots; ++k) {
    const bool plus = half(rng);
    const double mean = plus ? 0.5 * sep : -0.5 * sep;
    first.push_back(mean + noise(rng));
    const bool plus2 = flipProb > 0 && flip(rng) ? !plus : plus;
    second.push_back((plus2 ? 0.5 * sep : -0.5 * sep) + noise(rng));
  }
  const auto q = protocols::zroFidelityQnd(first, second, threshold);
  ctx.results["fidelity"] = q.fidelity;
  ctx.results["qndness"] = q.qndness;
}

void runRobustness(RunContext& ctx) {
  const auto rates = ratesFromConfig(ctx.cfg, ctx.cfg.getOr("kup_scale", 0.1));
  protocols::ReadoutContrasts m{ctx.cfg.getOr("m0", -3.14), ctx.cfg.getOr("m1", -4.05),
                                ctx.cfg.getOr("m2", -4.76), ctx.cfg.getOr("m3", -5.22)};
  const auto rep = protocols::excitationRobustnessStudy(rates, m);
  ctx.results["rel_err_k1_01"] = rep.relErrK1_01;
  ctx.results["rel_err_k1_12"] = rep.relErrK1_12;
  ctx.results["rel_err_kphi_01"] = rep.relErrKphi_01;
  ctx.results["rel_err_kphi_12"] = rep.relErrKphi_12;
  ctx.results["p1_true"] = rep.p1True;
  ctx.results["p1_by_ratio"] = rep.p1ByRatio;
  ctx.results["p1_by_model"] = rep.p1ByModel;
}

int runExperiment(RunContext& ctx) {
  const auto start = std::chrono::steady_clock::now();
  if (ctx.cfg.experiment == "spectrum") runSpectrum(ctx);
  else if (ctx.cfg.experiment == "wigner") runWigner(ctx);
  else if (ctx.cfg.experiment == "steady-leakage") runSteadyLeakage(ctx);
  else if (ctx.cfg.experiment == "kappa-diss") runKappaDiss(ctx);
  else if (ctx.cfg.experiment == "rabi-contrast") runRabiContrast(ctx);
  else if (ctx.cfg.experiment == "coherence-signals") runCoherenceSignals(ctx);
  else if (ctx.cfg.experiment == "spectroscopy-invert") runSpectroscopyInvert(ctx);
  else if (ctx.cfg.experiment == "tz-scan") runTzScan(ctx);
  else if (ctx.cfg.experiment == "eps2-threshold") runEps2Threshold(ctx);
  else if (ctx.cfg.experiment == "init-ramp") runInitRamp(ctx);
  else if (ctx.cfg.experiment == "gate-fidelity") runGateFidelity(ctx);
  else if (ctx.cfg.experiment == "zro-fidelity") runZroFidelity(ctx);
  else if (ctx.cfg.experiment == "robustness") runRobustness(ctx);
  else fail("unknown-experiment", ctx.cfg.experiment);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json record;
  record["schema"] = "kerrcat-run-record/1";
  record["protocol"] = ctx.cfg.experiment;
  record["seed"] = ctx.cfg.seed;
  record["jobs"] = ctx.cfg.jobs;
  json params;
  for (const auto& [k, v] : ctx.cfg.values) params[k] = v;
  record["params"] = params;
  record["results"] = ctx.results;
  record["diagnostics"] = ctx.diagnostics;
  record["wall_time_s"] = wall;

  std::filesystem::create_directories(ctx.cfg.outDir);
  io::writeFile(ctx.cfg.outDir + "/results.json", record.dump(2) + "\n");
  for (const auto& [name, contents] : ctx.csvFiles)
    io::writeFile(ctx.cfg.outDir + "/" + name, contents);
  std::cout << record["results"].dump(2) << "\n";
  return 0;
}

int listExperiments() {
  const auto& registry = io::experimentRegistry();
  std::cout << "experiment            figure        description\n";
  for (const auto& e : registry) {
    std::cout << e.name;
    for (size_t k = e.name.size(); k < 22; ++k) std::cout << ' ';
    std::cout << e.figure;
    for (size_t k = e.figure.size(); k < 14; ++k) std::cout << ' ';
    std::cout << e.description << "\n";
  }
  std::cout << registry.size() << " experiments\n";
  return 0;
}

int validate(const std::string& path, const std::string& experiment) {
  const auto diags = io::validateConfig(path, experiment);
  int errors = 0;
  for (const auto& d : diags) {
    std::cout << (d.level == io::Diagnostic::Level::error ? "error" : "warning") << ": "
              << d.key << ": " << d.message << "\n";
    if (d.level == io::Diagnostic::Level::error) ++errors;
  }
  if (diags.empty()) std::cout << "ok: no diagnostics\n";
  return errors ? 64 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kerr-cat oscillator simulator"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "print the experiment registry");

  std::string valConfig, valExperiment;
  auto* val = app.add_subcommand("validate", "check a config file without running");
  val->add_option("--config", valConfig, "config file")->required();
  val->add_option("--experiment", valExperiment, "experiment the config is for")->required();

  RunContext ctx;
  std::map<std::string, std::string> configPaths;
  std::vector<CLI::App*> runCmds;
  for (const auto& e : io::experimentRegistry()) {
    auto* cmd = app.add_subcommand(e.name, e.description);
    cmd->add_option("--config", configPaths[e.name], "config file")->required();
    cmd->add_option("--out", ctx.cfg.outDir, "output directory");
    cmd->add_option("--seed", ctx.cfg.seed, "random seed");
    cmd->add_option("--jobs", ctx.cfg.jobs, "parallel grid workers");
    cmd->add_option("--fock-dim", ctx.cfg.fockDim, "Fock truncation override");
    cmd->callback([&ctx, name = e.name] { ctx.cfg.experiment = name; });
    runCmds.push_back(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  try {
    if (list->parsed()) return listExperiments();
    if (val->parsed()) return validate(valConfig, valExperiment);
    ctx.cfg.values = io::parseConfigFile(configPaths[ctx.cfg.experiment]);
    // Reject unknown config keys before running.
    const auto& known = io::knownKeys(ctx.cfg.experiment);
    for (const auto& [key, value] : ctx.cfg.values)
      if (std::find(known.begin(), known.end(), key) == known.end())
        fail("unknown-key", key + " is not a config key of " + ctx.cfg.experiment);
    return runExperiment(ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string& code = e.code();
    if (code == "unknown-experiment" || code == "missing-key" || code == "unknown-key" ||
        code == "parse-error" || code == "file-not-found" || code == "invalid-params")
      return 64;
    if (code == "fit-failure" || code == "max-iterations" || code == "singular-Jacobian" ||
        code == "propagation-unreliable")
      return 3;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  }
}
