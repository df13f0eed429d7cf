#include "ubu/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ubu/couplings.hpp"
#include "ubu/diagnostics.hpp"
#include "ubu/inexact.hpp"
#include "ubu/integrators.hpp"
#include "ubu/rhmc.hpp"

namespace ubu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError(section + "." + key + ": unknown key");
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + ": wrong type");
  }
}

GradientMode mode_of(const std::string& method) {
  if (method == "ububu" || method == "rhmc") return GradientMode::Exact;
  if (method == "ububu-sg") return GradientMode::Svrg;
  if (method == "ububu-approx") return GradientMode::Approx;
  throw ConfigError("sampler.method: must be ububu, ububu-sg, ububu-approx or rhmc");
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw ConfigError(what + ": truncated file");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  check_keys(j, {"id", "seed", "output_dir", "model", "sampler", "diagnostics"}, "config");
  ExperimentConfig cfg;
  read_field(j, "id", cfg.id, "config");
  read_field(j, "seed", cfg.seed, "config");
  read_field(j, "output_dir", cfg.output_dir, "config");

  if (!j.contains("model")) throw ConfigError("config.model: required");
  const json& jm = j.at("model");
  check_keys(jm,
             {"kind", "d", "kappa", "images", "labels", "subsample", "downscale",
              "classes", "pixels", "n_data", "sigma0_sq", "matches", "teams", "rounds",
              "sigma_sq", "data_seed"},
             "model");
  ModelSection& m = cfg.model;
  read_field(jm, "kind", m.kind, "model");
  read_field(jm, "d", m.d, "model");
  read_field(jm, "kappa", m.kappa, "model");
  read_field(jm, "images", m.images_path, "model");
  read_field(jm, "labels", m.labels_path, "model");
  read_field(jm, "subsample", m.subsample, "model");
  read_field(jm, "downscale", m.downscale, "model");
  read_field(jm, "classes", m.classes, "model");
  read_field(jm, "pixels", m.pixels, "model");
  read_field(jm, "n_data", m.n_data, "model");
  read_field(jm, "sigma0_sq", m.sigma0_sq, "model");
  read_field(jm, "matches", m.matches_path, "model");
  read_field(jm, "teams", m.teams, "model");
  read_field(jm, "rounds", m.rounds, "model");
  read_field(jm, "sigma_sq", m.sigma_sq, "model");
  read_field(jm, "data_seed", m.data_seed, "model");
  if (m.kind != "gaussian" && m.kind != "multinomial" && m.kind != "poisson")
    throw ConfigError("model.kind: must be gaussian, multinomial or poisson");
  if (m.kind == "gaussian") {
    if (m.d < 1) throw ConfigError("model.d: must be >= 1");
    if (m.kappa < 1.0) throw ConfigError("model.kappa: must be >= 1");
  }
  if (m.kind == "multinomial") {
    if (m.classes < 2) throw ConfigError("model.classes: must be >= 2");
    if (!(m.sigma0_sq > 0.0)) throw ConfigError("model.sigma0_sq: must be > 0");
  }
  if (m.kind == "poisson") {
    if (m.teams < 2) throw ConfigError("model.teams: must be >= 2");
    if (m.rounds < 1) throw ConfigError("model.rounds: must be >= 1");
    if (!(m.sigma_sq > 0.0)) throw ConfigError("model.sigma_sq: must be > 0");
  }

  if (!j.contains("sampler")) throw ConfigError("config.sampler: required");
  const json& js = j.at("sampler");
  check_keys(js,
             {"method", "precondition", "h0", "gamma", "B0", "B", "K", "N", "c_N",
              "phi_N", "c_R", "tau", "N_b", "mu0", "rhmc_h", "rhmc_E_L", "rhmc_alpha",
              "rhmc_K", "rhmc_burn_in"},
             "sampler");
  SamplerSection& s = cfg.sampler;
  read_field(js, "method", s.method, "sampler");
  read_field(js, "precondition", s.precondition, "sampler");
  s.run.mode = mode_of(s.method);
  s.run.c_R = default_c_R(s.run.mode);
  if (s.run.mode == GradientMode::Svrg) {
    s.run.c_N = 1.0 / 64.0;
    s.run.tau = 10;
  } else if (s.run.mode == GradientMode::Approx) {
    s.run.c_N = 1.0 / 64.0;
    s.run.phi_N = 2.0 * std::sqrt(2.0);
    s.run.tau = 40;
  }
  read_field(js, "h0", s.run.h0, "sampler");
  read_field(js, "gamma", s.run.gamma, "sampler");
  read_field(js, "B0", s.run.B0, "sampler");
  read_field(js, "B", s.run.B, "sampler");
  read_field(js, "K", s.run.K, "sampler");
  read_field(js, "N", s.run.N, "sampler");
  read_field(js, "c_N", s.run.c_N, "sampler");
  read_field(js, "phi_N", s.run.phi_N, "sampler");
  read_field(js, "c_R", s.run.c_R, "sampler");
  read_field(js, "tau", s.run.tau, "sampler");
  read_field(js, "N_b", s.run.N_b, "sampler");
  std::string mu0 = "map";
  read_field(js, "mu0", mu0, "sampler");
  if (mu0 == "map")
    s.run.mu0 = InitDistribution::MapDirac;
  else if (mu0 == "gaussian")
    s.run.mu0 = InitDistribution::GaussianApprox;
  else
    throw ConfigError("sampler.mu0: must be map or gaussian");
  read_field(js, "rhmc_h", s.rhmc_h, "sampler");
  read_field(js, "rhmc_E_L", s.rhmc_E_L, "sampler");
  read_field(js, "rhmc_alpha", s.rhmc_alpha, "sampler");
  read_field(js, "rhmc_K", s.rhmc_K, "sampler");
  read_field(js, "rhmc_burn_in", s.rhmc_burn_in, "sampler");
  s.run.seed = cfg.seed;
  if (s.method != "rhmc") {
    try {
      s.run.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("sampler: ") + e.what());
    }
  } else {
    if (s.rhmc_K < 2) throw ConfigError("sampler.rhmc_K: must be >= 2");
    if (s.rhmc_burn_in < 0) throw ConfigError("sampler.rhmc_burn_in: must be >= 0");
    if (!(s.rhmc_alpha >= 0.0 && s.rhmc_alpha < 1.0))
      throw ConfigError("sampler.rhmc_alpha: must lie in [0, 1)");
  }

  if (j.contains("diagnostics")) {
    const json& jd = j.at("diagnostics");
    check_keys(jd, {"test_functions", "runs", "n_boot"}, "diagnostics");
    read_field(jd, "test_functions", cfg.diagnostics.test_functions, "diagnostics");
    read_field(jd, "runs", cfg.diagnostics.runs, "diagnostics");
    read_field(jd, "n_boot", cfg.diagnostics.n_boot, "diagnostics");
  }
  if (cfg.diagnostics.runs < 2) throw ConfigError("diagnostics.runs: must be >= 2");
  if (cfg.diagnostics.n_boot < 10) throw ConfigError("diagnostics.n_boot: must be >= 10");
  if (cfg.diagnostics.test_functions.empty())
    throw ConfigError("diagnostics.test_functions: must not be empty");
  return cfg;
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(17);
  const ModelSection& m = cfg.model;
  const SamplerSection& s = cfg.sampler;
  os << "id=" << cfg.id << ";seed=" << cfg.seed << ";kind=" << m.kind << ";d=" << m.d
     << ";kappa=" << m.kappa << ";images=" << m.images_path
     << ";labels=" << m.labels_path << ";subsample=" << m.subsample
     << ";downscale=" << m.downscale << ";classes=" << m.classes
     << ";pixels=" << m.pixels << ";n_data=" << m.n_data
     << ";sigma0_sq=" << m.sigma0_sq << ";matches=" << m.matches_path
     << ";teams=" << m.teams << ";rounds=" << m.rounds << ";sigma_sq=" << m.sigma_sq
     << ";data_seed=" << m.data_seed << ";method=" << s.method
     << ";precondition=" << s.precondition << ";h0=" << s.run.h0
     << ";gamma=" << s.run.gamma << ";B0=" << s.run.B0 << ";B=" << s.run.B
     << ";K=" << s.run.K << ";N=" << s.run.N << ";c_N=" << s.run.c_N
     << ";phi_N=" << s.run.phi_N << ";c_R=" << s.run.c_R << ";tau=" << s.run.tau
     << ";N_b=" << s.run.N_b << ";mu0=" << static_cast<int>(s.run.mu0)
     << ";rhmc_h=" << s.rhmc_h << ";rhmc_E_L=" << s.rhmc_E_L
     << ";rhmc_alpha=" << s.rhmc_alpha << ";rhmc_K=" << s.rhmc_K
     << ";rhmc_burn_in=" << s.rhmc_burn_in << ";runs=" << cfg.diagnostics.runs
     << ";n_boot=" << cfg.diagnostics.n_boot << ";fns=";
  for (const auto& f : cfg.diagnostics.test_functions) os << f << ",";
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(canonical_config(cfg));
}

// ---------------------------------------------------------------------------
// MNIST-style IDX ingestion.

MnistData ingest_mnist(const std::string& images_path, const std::string& labels_path,
                       long subsample, int downscale) {
  std::ifstream im(images_path, std::ios::binary);
  if (!im) throw ConfigError("images: cannot open " + images_path);
  if (read_be32(im, "images") != 0x00000803u)
    throw ConfigError("images: bad magic, expected 0x00000803");
  const long n_im = read_be32(im, "images");
  const int rows = static_cast<int>(read_be32(im, "images"));
  const int cols = static_cast<int>(read_be32(im, "images"));

  std::ifstream lb(labels_path, std::ios::binary);
  if (!lb) throw ConfigError("labels: cannot open " + labels_path);
  if (read_be32(lb, "labels") != 0x00000801u)
    throw ConfigError("labels: bad magic, expected 0x00000801");
  const long n_lb = read_be32(lb, "labels");
  if (n_lb != n_im) throw ConfigError("labels: count differs from image count");
  if (subsample < 1) throw ConfigError("subsample: must be >= 1");
  if (downscale < 1 || rows % downscale != 0 || cols % downscale != 0)
    throw ConfigError("downscale: must divide the image side lengths");

  MnistData out;
  out.rows = rows;
  out.cols = cols;
  const long n = std::min(subsample, n_im);
  out.raw_images.resize(static_cast<std::size_t>(n) * rows * cols);
  im.read(reinterpret_cast<char*>(out.raw_images.data()),
          static_cast<std::streamsize>(out.raw_images.size()));
  if (!im) throw ConfigError("images: truncated file");
  out.raw_labels.resize(static_cast<std::size_t>(n));
  lb.read(reinterpret_cast<char*>(out.raw_labels.data()),
          static_cast<std::streamsize>(n));
  if (!lb) throw ConfigError("labels: truncated file");

  const int pr = rows / downscale, pc = cols / downscale;
  out.X.resize(n, pr * pc + 1);
  out.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    const std::uint8_t lab = out.raw_labels[i];
    if (lab > 9) throw ConfigError("labels: value out of range 0..9");
    out.labels[i] = lab + 1;
    const std::uint8_t* img = out.raw_images.data() + static_cast<std::size_t>(i) * rows * cols;
    for (int r = 0; r < pr; ++r)
      for (int c = 0; c < pc; ++c) {
        double acc = 0.0;
        for (int dr = 0; dr < downscale; ++dr)
          for (int dc = 0; dc < downscale; ++dc)
            acc += img[(r * downscale + dr) * cols + (c * downscale + dc)];
        out.X(i, r * pc + c) = acc / (255.0 * downscale * downscale);
      }
    out.X(i, pr * pc) = 1.0;
  }
  return out;
}

void write_mnist(const std::string& images_path, const std::string& labels_path,
                 const MnistData& data) {
  const long n = static_cast<long>(data.raw_labels.size());
  std::ofstream im(images_path, std::ios::binary);
  if (!im) throw ConfigError("images: cannot write " + images_path);
  write_be32(im, 0x00000803u);
  write_be32(im, static_cast<std::uint32_t>(n));
  write_be32(im, static_cast<std::uint32_t>(data.rows));
  write_be32(im, static_cast<std::uint32_t>(data.cols));
  im.write(reinterpret_cast<const char*>(data.raw_images.data()),
           static_cast<std::streamsize>(data.raw_images.size()));
  std::ofstream lb(labels_path, std::ios::binary);
  if (!lb) throw ConfigError("labels: cannot write " + labels_path);
  write_be32(lb, 0x00000801u);
  write_be32(lb, static_cast<std::uint32_t>(n));
  lb.write(reinterpret_cast<const char*>(data.raw_labels.data()),
           static_cast<std::streamsize>(n));
}

std::uint64_t dataset_hash(const MnistData& data) {
  std::uint64_t h = fnv1a64(data.raw_images.data(), data.raw_images.size());
  h = fnv1a64(data.raw_labels.data(), data.raw_labels.size(), h);
  return h;
}

// ---------------------------------------------------------------------------
// Match CSV ingestion.

MatchData ingest_matches(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("matches: cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("matches: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "round,home,away,hg,ag")
    throw ConfigError("matches: header must be round,home,away,hg,ag, got " + line);

  MatchData out;
  std::vector<std::string> names;
  auto team_id = [&](const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    names.push_back(name);
    return static_cast<int>(names.size() - 1);
  };
  auto parse_int = [](const std::string& s, long row, const char* col) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("matches: row " + std::to_string(row) + ": bad integer in " +
                        col + ": " + s);
    }
  };
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5)
      throw ConfigError("matches: row " + std::to_string(row) + ": expected 5 columns");
    SoccerGame g;
    g.week = parse_int(cells[0], row, "round");
    g.home = team_id(cells[1]);
    g.away = team_id(cells[2]);
    g.home_goals = parse_int(cells[3], row, "hg");
    g.away_goals = parse_int(cells[4], row, "ag");
    if (g.week < 1)
      throw ConfigError("matches: row " + std::to_string(row) + ": round must be >= 1");
    if (g.home == g.away)
      throw ConfigError("matches: row " + std::to_string(row) + ": team plays itself");
    if (g.home_goals < 0 || g.away_goals < 0)
      throw ConfigError("matches: row " + std::to_string(row) + ": negative goals");
    out.n_weeks = std::max(out.n_weeks, g.week);
    out.games.push_back(g);
  }
  if (out.games.empty()) throw ConfigError("matches: no games");
  out.team_names = std::move(names);
  out.n_teams = static_cast<int>(out.team_names.size());
  return out;
}

void write_matches(const std::string& csv_path, const MatchData& data) {
  std::ofstream out(csv_path);
  if (!out) throw ConfigError("matches: cannot write " + csv_path);
  out << "round,home,away,hg,ag\n";
  for (const SoccerGame& g : data.games)
    out << g.week << "," << data.team_names[g.home] << "," << data.team_names[g.away]
        << "," << g.home_goals << "," << g.away_goals << "\n";
}

std::uint64_t dataset_hash(const MatchData& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (const SoccerGame& g : data.games) {
    h = fnv1a64(&g.week, sizeof g.week, h);
    const std::string& hn = data.team_names[g.home];
    const std::string& an = data.team_names[g.away];
    h = fnv1a64(hn.data(), hn.size(), h);
    h = fnv1a64(an.data(), an.size(), h);
    h = fnv1a64(&g.home_goals, sizeof g.home_goals, h);
    h = fnv1a64(&g.away_goals, sizeof g.away_goals, h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Model construction.

BuiltModel build_model(const ExperimentConfig& cfg) {
  const ModelSection& m = cfg.model;
  std::shared_ptr<const Potential> base;
  std::string name;
  if (m.kind == "gaussian") {
    base = std::make_shared<GaussianTarget>(m.d, m.kappa);
    name = "gaussian";
  } else if (m.kind == "multinomial") {
    if (!m.images_path.empty()) {
      MnistData data = ingest_mnist(m.images_path, m.labels_path, m.subsample, m.downscale);
      base = std::make_shared<MultinomialRegression>(data.X, data.labels, 10, m.sigma0_sq);
      name = "mnist";
    } else {
      base = make_synthetic_multinomial(m.classes, m.pixels, m.n_data, m.sigma0_sq,
                                        m.data_seed)
                 .model;
      name = "multinomial";
    }
  } else {
    if (!m.matches_path.empty()) {
      MatchData data = ingest_matches(m.matches_path);
      base = std::make_shared<PoissonSoccer>(data.games, data.n_teams, data.n_weeks,
                                             m.sigma_sq, m.sigma0_sq);
      name = "matches";
    } else {
      base = make_synthetic_poisson(m.teams, m.rounds, m.sigma_sq, m.sigma0_sq,
                                    m.data_seed)
                 .model;
      name = "poisson";
    }
  }
  BuiltModel out;
  out.name = name;
  HessianEig base_h = hessian_at_min(*base);
  out.kappa = base_h.M() / base_h.m();
  if (cfg.sampler.precondition && m.kind != "gaussian") {
    auto pre = std::make_shared<PreconditionedPotential>(base, base_h);
    out.hstar = hessian_at_min(*pre, Vec::Zero(pre->dim()));
    out.target = pre;
  } else {
    out.hstar = std::move(base_h);
    out.target = base;
  }
  return out;
}

TestSuite build_test_suite(const DiagnosticsSection& diag, int dim) {
  struct Entry {
    enum Kind { Coord, NormSq } kind;
    int index;
  };
  std::vector<Entry> entries;
  TestSuite suite;
  for (const std::string& name : diag.test_functions) {
    if (name == "coords") {
      for (int i = 0; i < dim; ++i) {
        entries.push_back({Entry::Coord, i});
        suite.names.push_back("x" + std::to_string(i + 1));
      }
    } else if (name == "norm_sq") {
      entries.push_back({Entry::NormSq, 0});
      suite.names.push_back("norm_sq");
    } else if (name.rfind("coord:", 0) == 0) {
      const int k = std::atoi(name.c_str() + 6);
      if (k < 1 || k > dim)
        throw ConfigError("diagnostics.test_functions: coordinate out of range in " + name);
      entries.push_back({Entry::Coord, k - 1});
      suite.names.push_back("x" + std::to_string(k));
    } else {
      throw ConfigError("diagnostics.test_functions: unknown function " + name);
    }
  }
  suite.f = [entries](const PhaseState& z) {
    Vec out(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i)
      out[i] = entries[i].kind == Entry::Coord ? z.x[entries[i].index]
                                               : z.x.squaredNorm();
    return out;
  };
  return suite;
}

// ---------------------------------------------------------------------------
// cmd_run.

namespace {

struct RowOut {
  std::string function;
  double s, var_s, ess, grads_per_ess, ci_lo, ci_hi, work, wall;
};

void write_results(const ExperimentConfig& cfg, const BuiltModel& model,
                   const std::vector<RowOut>& rows) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "results.csv");
  out << "# config_hash=" << std::hex << std::setw(16) << std::setfill('0')
      << config_hash(cfg) << std::dec << std::setfill(' ') << "\n";
  out << "# seed=" << cfg.seed << "\n";
  out << "experiment,model,mode,d,kappa,function,s,var_s,ess,grads_per_ess,ci_lo,ci_hi,"
         "work,wall_time,seed\n";
  for (const RowOut& r : rows)
    out << cfg.id << "," << model.name << "," << cfg.sampler.method << ","
        << model.target->dim() << "," << fmt(model.kappa) << "," << r.function << ","
        << fmt(r.s) << "," << fmt(r.var_s) << "," << fmt(r.ess) << ","
        << fmt(r.grads_per_ess) << "," << fmt(r.ci_lo) << "," << fmt(r.ci_hi) << ","
        << fmt(r.work) << "," << fmt(r.wall) << "," << cfg.seed << "\n";
}

void write_dlevels(const ExperimentConfig& cfg, const std::vector<EstimatorReport>& reps,
                   const std::vector<std::string>& names) {
  std::ofstream out(fs::path(cfg.output_dir) / "dlevels.csv");
  out << "# config_hash=" << std::hex << std::setw(16) << std::setfill('0')
      << config_hash(cfg) << std::dec << std::setfill(' ') << "\n";
  out << "run,kind,level,replicate,function,value\n";
  const std::size_t nc = names.size();
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const EstimatorReport& rep = reps[r];
    for (std::size_t i = 0; i < rep.d0.size(); ++i)
      for (std::size_t c = 0; c < nc; ++c)
        out << r << ",level0,0," << i << "," << names[c] << "," << fmt(rep.d0[i][c])
            << "\n";
    for (std::size_t l = 0; l < rep.d_pairs.size(); ++l)
      for (std::size_t i = 0; i < rep.d_pairs[l].size(); ++i)
        for (std::size_t c = 0; c < nc; ++c)
          out << r << ",pair," << l << "," << i << "," << names[c] << ","
              << fmt(rep.d_pairs[l][i][c]) << "\n";
    for (std::size_t l = 0; l < rep.d_tail.size(); ++l)
      for (std::size_t c = 0; c < nc; ++c)
        out << r << ",tail," << rep.schedule.L + static_cast<int>(l) << ",0,"
            << names[c] << "," << fmt(rep.d_tail[l][c]) << "\n";
  }
}

std::vector<RowOut> summarize_runs(const ExperimentConfig& cfg,
                                   const std::vector<std::string>& names,
                                   const std::vector<Vec>& per_run_s,
                                   const std::vector<double>& per_run_work,
                                   double wall_per_run) {
  const int nc = static_cast<int>(names.size());
  const int runs = static_cast<int>(per_run_s.size());
  const Vec mean_s = sample_mean(per_run_s);
  const Vec var_s = sample_var(per_run_s);
  double work = 0.0;
  for (double w : per_run_work) work += w;
  work /= runs;
  std::vector<RowOut> rows(nc);
  const auto mean_stat = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (int c = 0; c < nc; ++c) {
    // E[f^2] rides along in the upper half of the stacked test function; the
    // implied posterior variance feeds the effective sample size.
    const double var_pi = std::max(mean_s[nc + c] - mean_s[c] * mean_s[c], 1e-12);
    const double vs = var_s[c];
    const double ess = vs > 0.0 ? var_pi / vs : 0.0;
    std::vector<double> vals(runs);
    for (int r = 0; r < runs; ++r) vals[r] = per_run_s[r][c];
    const BootstrapCI ci =
        bootstrap_ci(vals, mean_stat, cfg.diagnostics.n_boot, 0.05,
                     cfg.seed ^ (0x5bull + static_cast<std::uint64_t>(c)));
    rows[c] = {names[c], mean_s[c], vs,  ess, ess > 0.0 ? work / ess : 0.0,
               ci.lo,    ci.hi,     work, wall_per_run};
  }
  return rows;
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
  const BuiltModel model = build_model(cfg);
  const TestSuite suite = build_test_suite(cfg.diagnostics, model.target->dim());
  const int nc = static_cast<int>(suite.names.size());
  const TestFn base_f = suite.f;
  const TestFn f = [base_f, nc](const PhaseState& z) {
    Vec out(2 * nc);
    out.head(nc) = base_f(z);
    out.tail(nc) = out.head(nc).cwiseProduct(out.head(nc));
    return out;
  };
  const int runs = cfg.diagnostics.runs;
  std::vector<Vec> per_run_s(runs);
  std::vector<double> per_run_work(runs);
  const auto t0 = std::chrono::steady_clock::now();

  if (cfg.sampler.method == "rhmc") {
    RhmcConfig rc;
    rc.alpha = cfg.sampler.rhmc_alpha;
    rc.K = cfg.sampler.rhmc_K;
    rc.burn_in = cfg.sampler.rhmc_burn_in;
    rc.seed = cfg.seed;
    if (cfg.sampler.rhmc_h > 0.0) {
      rc.h = cfg.sampler.rhmc_h;
      rc.E_L = cfg.sampler.rhmc_E_L > 0.0
                   ? cfg.sampler.rhmc_E_L
                   : std::max(1.0, 1.0 / (std::sqrt(model.hstar.m()) * rc.h));
    } else {
      const RhmcTuning tuned = tune_rhmc(*model.target, model.hstar, 0.0, cfg.seed);
      rc.h = tuned.h;
      rc.E_L = tuned.E_L;
    }
    for (int r = 0; r < runs; ++r) {
      const RhmcResult res =
          run_rhmc(*model.target, model.hstar, rc, stream_tag(Stream::Rhmc, r + 1), f);
      per_run_s[r] = res.mean_f;
      per_run_work[r] = res.work.data_passes(model.target->n_data());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                            .count() /
                        runs;
    write_results(cfg, model, summarize_runs(cfg, suite.names, per_run_s, per_run_work, wall));
    return 0;
  }

  std::vector<EstimatorReport> reports(runs);
  for (int r = 0; r < runs; ++r) {
    RunConfig rc = cfg.sampler.run;
    rc.seed = cfg.seed + static_cast<std::uint64_t>(r) * 7919u;
    reports[r] = run_estimator(*model.target, model.hstar, rc, f);
    per_run_s[r] = reports[r].s;
    per_run_work[r] = reports[r].work.data_passes(model.target->n_data());
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / runs;
  write_results(cfg, model, summarize_runs(cfg, suite.names, per_run_s, per_run_work, wall));
  write_dlevels(cfg, reports, suite.names);
  return 0;
}

// ---------------------------------------------------------------------------
// cmd_strong_order.

namespace {

struct GapTable {
  std::vector<double> hs;
  // gaps[rep][hi]: final-time phase-space distance of the coupled pair.
  std::vector<std::vector<double>> gaps;
};

double phase_gap(const PhaseState& a, const PhaseState& b) {
  return std::sqrt((a.x - b.x).squaredNorm() + (a.v - b.v).squaredNorm());
}

ChainParams pair_params(const ExperimentConfig& cfg, double h) {
  ChainParams p;
  p.h0 = h;
  p.gamma = cfg.sampler.run.gamma;
  p.B0 = 0;
  p.B = 0;
  p.K = 1;
  p.mode = GradientMode::Exact;
  p.tau = 2;
  p.N_b = 1;
  p.mu0 = InitDistribution::GaussianApprox;
  p.seed = cfg.seed;
  return p;
}

}  // namespace

int cmd_strong_order(const ExperimentConfig& cfg) {
  const BuiltModel model = build_model(cfg);
  const Potential& pot = *model.target;
  const int d = pot.dim();
  const std::vector<double> hs = {0.4, 0.2, 0.1, 0.05};
  const int reps = 200;
  const double T = 4.0;
  const long tau = 10;
  const long n_b = std::max<long>(1, pot.n_data() / 8);

  std::vector<std::string> kernels = {"ubu", "em"};
  if (pot.n_data() > 1) kernels.push_back("svrg-ubu");

  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "strong_order.csv");
  out << "# config_hash=" << std::hex << std::setw(16) << std::setfill('0')
      << config_hash(cfg) << std::dec << std::setfill(' ') << "\n";
  out << "# seed=" << cfg.seed << "\n";
  out << "kernel,record,h,value,ci_lo,ci_hi\n";

  for (const std::string& kernel : kernels) {
    GapTable table;
    table.gaps.assign(reps, {});
    for (double h : hs) {
      const long n = std::lround(T / h);
      const ChainParams p = pair_params(cfg, h);
      const OUCoeffs half_c = ou_coeffs(p.gamma, h / 2.0);
      const OUCoeffs half_f = ou_coeffs(p.gamma, h / 4.0);
      bool stable = true;
      std::vector<double> rep_gaps(reps);
      for (int r = 0; r < reps && stable; ++r) {
        const std::uint64_t tag =
            stream_tag(Stream::Generic, static_cast<std::int64_t>(1000 + r));
        PhaseState zc = draw_mu_g(model.hstar, cfg.seed, 0, tag, 0);
        PhaseState zf = zc;
        const NoiseTree noise(p, 0, 1, tag, d, {0});
        AnchorState anc_c, anc_f;
        WorkCounter scratch;
        for (long k = 0; k < n; ++k) {
          const NoiseQuad qc = noise.quad(0, k);
          const NoiseQuad q1 = noise.quad(1, 2 * k);
          const NoiseQuad q2 = noise.quad(1, 2 * k + 1);
          if (kernel == "ubu") {
            ubu_step(pot, zc, h, half_c, qc.xi1, qc.xi2, qc.xi3, qc.xi4);
            ubu_step(pot, zf, h / 2.0, half_f, q1.xi1, q1.xi2, q1.xi3, q1.xi4);
            ubu_step(pot, zf, h / 2.0, half_f, q2.xi1, q2.xi2, q2.xi3, q2.xi4);
          } else if (kernel == "em") {
            // Shared Brownian increments: the coarse step sums the two fine
            // unit normals.
            const Vec xc = (q1.xi1 + q2.xi1) / std::sqrt(2.0);
            em_step(pot, zc, h, p.gamma, xc);
            em_step(pot, zf, h / 2.0, p.gamma, q1.xi1);
            em_step(pot, zf, h / 2.0, p.gamma, q2.xi1);
          } else {
            const NoiseKey bk1{cfg.seed, 1, static_cast<std::int64_t>(tag), 2 * k,
                               kSlotBatch};
            const NoiseKey bk2{cfg.seed, 1, static_cast<std::int64_t>(tag), 2 * k + 1,
                               kSlotBatch};
            const std::vector<int> b1 = draw_batch(bk1, pot.n_data(), static_cast<int>(n_b));
            const std::vector<int> b2 = draw_batch(bk2, pot.n_data(), static_cast<int>(n_b));
            const NoiseKey ck{cfg.seed, 0, static_cast<std::int64_t>(tag), k, kSlotCoin};
            const std::vector<int>& bc = draw_coin(ck) ? b2 : b1;
            svrg_ubu_step(pot, zc, h, half_c, qc.xi1, qc.xi2, qc.xi3, qc.xi4, bc, anc_c,
                          k % tau == 0, &scratch);
            svrg_ubu_step(pot, zf, h / 2.0, half_f, q1.xi1, q1.xi2, q1.xi3, q1.xi4, b1,
                          anc_f, (2 * k) % tau == 0, &scratch);
            svrg_ubu_step(pot, zf, h / 2.0, half_f, q2.xi1, q2.xi2, q2.xi3, q2.xi4, b2,
                          anc_f, (2 * k + 1) % tau == 0, &scratch);
          }
        }
        rep_gaps[r] = phase_gap(zf, zc);
        if (!std::isfinite(rep_gaps[r])) stable = false;
      }
      if (!stable) {
        out << kernel << ",skipped," << fmt(h) << ",nan,,\n";
        continue;
      }
      table.hs.push_back(h);
      double ms = 0.0;
      for (int r = 0; r < reps; ++r) {
        table.gaps[r].push_back(rep_gaps[r]);
        ms += rep_gaps[r] * rep_gaps[r] / reps;
      }
      out << kernel << ",gap," << fmt(h) << "," << fmt(std::sqrt(ms)) << ",,\n";
    }
    if (table.hs.size() < 2) continue;
    const auto slope_of = [&](const std::vector<int>& idx) {
      std::vector<double> rms(table.hs.size(), 0.0);
      for (int r : idx)
        for (std::size_t i = 0; i < table.hs.size(); ++i)
          rms[i] += table.gaps[r][i] * table.gaps[r][i] / idx.size();
      for (double& v : rms) v = std::sqrt(v);
      return strong_order_fit(table.hs, rms);
    };
    std::vector<int> all(reps);
    for (int r = 0; r < reps; ++r) all[r] = r;
    const double slope = slope_of(all);
    // Bootstrap the slope over replicates.
    std::vector<double> boot(cfg.diagnostics.n_boot);
    const auto btag = static_cast<std::int64_t>(fnv1a64(kernel));
    for (int b = 0; b < cfg.diagnostics.n_boot; ++b) {
      std::vector<int> idx(reps);
      const NoiseKey key{cfg.seed, 0, btag, b, 0};
      for (int r = 0; r < reps; ++r)
        idx[r] = static_cast<int>(key_word(key, r) % reps);
      boot[b] = slope_of(idx);
    }
    std::sort(boot.begin(), boot.end());
    const auto pick = [&](double q) {
      return boot[static_cast<std::size_t>(q * (boot.size() - 1))];
    };
    out << kernel << ",slope,," << fmt(slope) << "," << fmt(pick(0.025)) << ","
        << fmt(pick(0.975)) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// cmd_ess_report.

int cmd_ess_report(const std::string& results_dir, const std::string& output_dir,
                   int n_boot) {
  struct Entry {
    std::string mode;
    double grads_per_ess;
  };
  std::vector<Entry> entries;
  if (!fs::is_directory(results_dir))
    throw ConfigError("ess-report: not a directory: " + results_dir);
  for (const auto& file : fs::recursive_directory_iterator(results_dir)) {
    if (!file.is_regular_file() || file.path().extension() != ".csv") continue;
    std::ifstream in(file.path());
    std::string line;
    bool ours = false;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '#') continue;
      if (!ours) {
        ours = line.rfind("experiment,", 0) == 0;
        if (!ours) break;
        std::stringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) header.push_back(cell);
        continue;
      }
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() != header.size()) continue;
      Entry e;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "mode") e.mode = cells[i];
        if (header[i] == "grads_per_ess") e.grads_per_ess = std::stod(cells[i]);
      }
      entries.push_back(e);
    }
  }
  if (entries.empty()) throw ConfigError("ess-report: no result rows under " + results_dir);

  std::vector<std::string> modes;
  for (const Entry& e : entries)
    if (std::find(modes.begin(), modes.end(), e.mode) == modes.end())
      modes.push_back(e.mode);
  std::sort(modes.begin(), modes.end());

  fs::create_directories(output_dir);
  std::ofstream hist(fs::path(output_dir) / "ess_histogram.csv");
  hist << "mode,bin_lo,bin_hi,count\n";
  std::ofstream summary(fs::path(output_dir) / "ess_summary.csv");
  summary << "mode,components,max_grads_per_ess,ci_lo,ci_hi\n";

  const auto max_stat = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end());
  };
  for (const std::string& mode : modes) {
    std::vector<double> vals;
    for (const Entry& e : entries)
      if (e.mode == mode) vals.push_back(e.grads_per_ess);
    const double lo = *std::min_element(vals.begin(), vals.end());
    const double hi = *std::max_element(vals.begin(), vals.end());
    const int nbins = hi > lo ? 12 : 1;
    const double w = hi > lo ? (hi - lo) / nbins : 1.0;
    std::vector<long> counts(nbins, 0);
    for (double v : vals) {
      int b = hi > lo ? static_cast<int>((v - lo) / w) : 0;
      if (b >= nbins) b = nbins - 1;
      ++counts[b];
    }
    for (int b = 0; b < nbins; ++b)
      hist << mode << "," << fmt(lo + b * w) << "," << fmt(lo + (b + 1) * w) << ","
           << counts[b] << "\n";
    const BootstrapCI ci = bootstrap_ci(vals, max_stat, n_boot, 0.05, fnv1a64(mode));
    summary << mode << "," << vals.size() << "," << fmt(hi) << "," << fmt(ci.lo) << ","
            << fmt(ci.hi) << "\n";
  }
  return 0;
}

}  // namespace ubu
