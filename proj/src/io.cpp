#include "kerrcat/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace kerrcat::io {

double RunConfig::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) fail("missing-key", "config key " + key + " is required");
  return it->second;
}

double RunConfig::getOr(const std::string& key, double fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

namespace {

const std::vector<std::string> kOscKeys = {
    "K_over_2pi_Hz", "eps2_over_K",   "delta_over_K", "g3_over_2pi_Hz",
    "kappa_a_Hz",    "n_th_a",        "fock_dim",
};

const std::vector<std::string> kCavKeys = {
    "kappa_b_out_Hz", "kappa_b_loss_Hz", "n_th_b", "chi_ab_Hz", "cavity_dim",
};

const std::vector<std::string> kDissKeys = {"g_diss_Hz", "delta_omega_diss_Hz"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> lists,
                                std::initializer_list<const char*> extra = {}) {
  std::vector<std::string> out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  for (const char* e : extra) out.push_back(e);
  return out;
}

}  // namespace

const std::vector<std::string>& knownKeys(const std::string& experiment) {
  static const std::map<std::string, std::vector<std::string>> table = [] {
    std::map<std::string, std::vector<std::string>> t;
    t["spectrum"] = concat({kOscKeys});
    t["wigner"] = concat({kOscKeys}, {"grid_halfwidth", "grid_points", "state"});
    t["steady-leakage"] =
        concat({kOscKeys, kCavKeys, kDissKeys},
               {"g_diss_max_Hz", "g_diss_points", "tau_delay_s", "dephasing_Hz"});
    t["kappa-diss"] = concat({kOscKeys, kCavKeys, kDissKeys}, {"g_diss_max_Hz", "g_diss_points"});
    t["rabi-contrast"] = concat(
        {kOscKeys, kCavKeys},
        {"p1_true", "p2_true", "p2_sigma", "k1_01_Hz", "k1_12_Hz", "kphi_01_Hz", "kphi_12_Hz",
         "amplitude_max", "amplitude_points", "mc_samples"});
    t["coherence-signals"] =
        concat({kOscKeys, kCavKeys},
               {"k1_01_Hz", "k1_12_Hz", "kphi_01_Hz", "kphi_12_Hz", "ramsey_detuning_Hz",
                "time_max_s", "time_points"});
    t["spectroscopy-invert"] =
        concat({kOscKeys, kCavKeys},
               {"pk01_mrad", "pk12_mrad", "pk23_mrad", "sigma01_mrad", "sigma12_mrad",
                "sigma23_mrad", "mc_samples"});
    t["tz-scan"] = concat({kOscKeys, kCavKeys, kDissKeys},
                          {"eps2_min_over_K", "eps2_max_over_K", "eps2_points",
                           "detuning_min_Hz", "detuning_max_Hz", "detuning_points",
                           "reference_detuning_Hz", "duration_s"});
    t["eps2-threshold"] =
        concat({kOscKeys, kCavKeys, kDissKeys},
               {"eps2_min_over_K", "eps2_max_over_K", "eps2_points", "use_effective_model",
                "isoline_splitting_Hz"});
    t["init-ramp"] = concat({kOscKeys},
                            {"eps2_ramp_s", "eps2_sigma_s", "delta_ramp_s", "delta_sigma_s",
                             "with_detuning_ramp"});
    t["gate-fidelity"] = concat({kOscKeys},
                                {"kappa1_eff_Hz", "kappa_phi_eff_Hz", "tau_min_s", "tau_max_s",
                                 "tau_points", "gamma_rabi_Hz", "z_gate_tau_s", "gate_dim"});
    t["zro-fidelity"] = concat({kOscKeys},
                               {"shots", "separation_sigmas", "flip_probability", "threshold"});
    t["robustness"] = concat({kCavKeys, kOscKeys},
                             {"k1_01_Hz", "k1_12_Hz", "kphi_01_Hz", "kphi_12_Hz",
                              "kup_scale", "m0", "m1", "m2"});
    return t;
  }();
  auto it = table.find(experiment);
  if (it == table.end()) fail("unknown-experiment", experiment);
  return it->second;
}

std::map<std::string, double> parseConfigFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("file-not-found", path);
  std::map<std::string, double> out;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail("parse-error", path + ":" + std::to_string(lineNo) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    try {
      size_t used = 0;
      out[key] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      fail("parse-error", path + ":" + std::to_string(lineNo) + ": bad numeric value for " + key);
    }
  }
  return out;
}

namespace {

int editDistance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = int(i);
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::vector<Diagnostic> validateConfig(const std::string& path, const std::string& experiment) {
  const auto& known = knownKeys(experiment);
  const auto values = parseConfigFile(path);
  std::vector<Diagnostic> out;
  for (const auto& [key, value] : values) {
    if (std::find(known.begin(), known.end(), key) != known.end()) {
      // Structural frequencies must be positive; rates and detunings may
      // legitimately be zero or negative.
      if ((key == "K_over_2pi_Hz" || key == "kappa_b_out_Hz" || key == "chi_ab_Hz") && value <= 0)
        out.push_back({Diagnostic::Level::error, key, "physical frequency must be positive"});
      continue;
    }
    std::string best;
    int bestDist = 1 << 20;
    for (const auto& k : known) {
      const int d = editDistance(key, k);
      if (d < bestDist) {
        bestDist = d;
        best = k;
      }
    }
    out.push_back({Diagnostic::Level::warning, key,
                   "unknown key; closest known key is '" + best + "'"});
  }
  for (const char* required : {"K_over_2pi_Hz"}) {
    if (experiment != "robustness" && experiment != "zro-fidelity" && !values.count(required))
      out.push_back({Diagnostic::Level::error, required, "required key missing"});
  }
  if ((experiment == "steady-leakage" || experiment == "kappa-diss" || experiment == "tz-scan" ||
       experiment == "eps2-threshold" || experiment == "rabi-contrast" ||
       experiment == "spectroscopy-invert") &&
      !values.count("kappa_b_out_Hz"))
    out.push_back({Diagnostic::Level::error, "kappa_b_out_Hz", "required key missing"});
  return out;
}

const std::vector<ExperimentInfo>& experimentRegistry() {
  static const std::vector<ExperimentInfo> registry = {
      {"spectrum", "Fig. 1c", "manifold energies, splittings and mean photon numbers"},
      {"wigner", "Fig. 1d", "Wigner maps of the qubit basis states"},
      {"steady-leakage", "Fig. 3b", "steady-state leakage population versus g_diss"},
      {"kappa-diss", "Fig. S8d", "1/e dissipation rate versus exchange rate"},
      {"rabi-contrast", "Fig. 2c", "Rabi-contrast traces and p1 extraction"},
      {"coherence-signals", "Fig. 2e-h", "relaxation and Ramsey readout signals"},
      {"spectroscopy-invert", "Fig. S7", "populations from incoherent spectroscopy contrasts"},
      {"tz-scan", "Fig. 4d", "Z-contrast change map versus eps2 and drive detuning"},
      {"eps2-threshold", "Fig. 4e", "dissipation-benefit threshold versus detuning"},
      {"init-ramp", "Fig. S4", "initialization fidelity with and without the detuning ramp"},
      {"gate-fidelity", "SI III.E", "Kerr-gate fidelity and Z-gate error"},
      {"zro-fidelity", "Fig. S5", "readout fidelity and QND-ness from synthetic shots"},
      {"robustness", "Tables S1-S2", "bias of heating-free fits and p1 estimators"},
  };
  return registry;
}

void writeFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) fail("io-error", "cannot open " + path + " for writing");
  out << contents;
}

}  // namespace kerrcat::io
