// hmaxwell: command-line driver for the edge-element Maxwell H-matrix experiments.
//
// Every command writes into <out>/<command>/ and finishes with manifest.json, which lists
// each emitted file with its CRC-32. Timings and the creation time live only in the manifest.

#include "hmaxwell/hmaxwell.hpp"
#include "hmaxwell/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <complex>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using hmx::io::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kCheckFailure = 1, kConfigError = 2, kResourceLimit = 3 };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double commuting = 1e-12;
  double dual_basis = 1e-12;
  double symmetry = 0.0;
  double curl_grad = 1e-12;
  double constraint = 1e-10;
  double pythagoras = 1e-10;
  double orthogonality = 1e-10;
  double gradient_part = 1e-9;
  double exact_sequence = 1e-10;
  double transfer = 1e-8;
  double bound_slack = 1.000001;
};

struct Config {
  int n = 4;
  double L = 1.0;
  double kappa_re = 1.0;
  double kappa_im = 0.0;
  double eta = 2.0;
  int n_leaf = 32;
  std::vector<int> ranks{1, 2, 4, 8, 12, 16, 20};
  std::uint64_t seed = 20240917;
  std::string out = "hmaxwell_out";
  int dense_limit = 8000;
  double R = 0.4;
  double eps = 0.5;
  bool dump_mesh = false;
  Tolerances tol;

  hmx::Complex kappa() const { return {kappa_re, kappa_im}; }
};

json tolerances_json(const Tolerances& t) {
  return {{"commuting", t.commuting},   {"dual_basis", t.dual_basis},       {"symmetry", t.symmetry},
          {"curl_grad", t.curl_grad},   {"constraint", t.constraint},       {"pythagoras", t.pythagoras},
          {"orthogonality", t.orthogonality}, {"gradient_part", t.gradient_part}, {"exact_sequence", t.exact_sequence},
          {"transfer", t.transfer},     {"bound_slack", t.bound_slack}};
}

json config_json(const Config& c) {
  return {{"n", c.n},
          {"L", c.L},
          {"kappa_re", c.kappa_re},
          {"kappa_im", c.kappa_im},
          {"eta", c.eta},
          {"n_leaf", c.n_leaf},
          {"ranks", c.ranks},
          {"seed", c.seed},
          {"out", c.out},
          {"dense_limit", c.dense_limit},
          {"R", c.R},
          {"eps", c.eps},
          {"tolerances", tolerances_json(c.tol)}};
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void merge_config_file(const fs::path& path, Config& c) {
  json j;
  try {
    j = json::parse(hmx::io::read_text(path));
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"n",    "L",   "kappa_re",   "kappa_im",    "eta", "n_leaf", "ranks",
                                           "seed", "out", "dense_limit", "R",          "eps", "dump_mesh",
                                           "tolerances"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  take(j, "n", c.n);
  take(j, "L", c.L);
  take(j, "kappa_re", c.kappa_re);
  take(j, "kappa_im", c.kappa_im);
  take(j, "eta", c.eta);
  take(j, "n_leaf", c.n_leaf);
  take(j, "ranks", c.ranks);
  take(j, "seed", c.seed);
  take(j, "out", c.out);
  take(j, "dense_limit", c.dense_limit);
  take(j, "R", c.R);
  take(j, "eps", c.eps);
  take(j, "dump_mesh", c.dump_mesh);
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    if (!t.is_object()) throw ConfigError("'tolerances' must be an object");
    static const std::set<std::string> tkeys{"commuting",     "dual_basis", "symmetry",       "curl_grad",
                                             "constraint",    "pythagoras", "orthogonality",  "gradient_part",
                                             "exact_sequence", "transfer",  "bound_slack"};
    for (const auto& [k, v] : t.items())
      if (!tkeys.count(k)) throw ConfigError("unknown tolerance '" + k + "'");
    take(t, "commuting", c.tol.commuting);
    take(t, "dual_basis", c.tol.dual_basis);
    take(t, "symmetry", c.tol.symmetry);
    take(t, "curl_grad", c.tol.curl_grad);
    take(t, "constraint", c.tol.constraint);
    take(t, "pythagoras", c.tol.pythagoras);
    take(t, "orthogonality", c.tol.orthogonality);
    take(t, "gradient_part", c.tol.gradient_part);
    take(t, "exact_sequence", c.tol.exact_sequence);
    take(t, "transfer", c.tol.transfer);
    take(t, "bound_slack", c.tol.bound_slack);
  }
}

void validate(const Config& c) {
  if (c.n < 1) throw ConfigError("n must be >= 1");
  if (!(c.L > 0.0)) throw ConfigError("L must be positive");
  if (c.kappa_re == 0.0 && c.kappa_im == 0.0) throw ConfigError("kappa must be nonzero");
  if (!std::isfinite(c.kappa_re) || !std::isfinite(c.kappa_im)) throw ConfigError("kappa must be finite");
  if (!(c.eta > 0.0)) throw ConfigError("eta must be positive");
  if (c.n_leaf < 1) throw ConfigError("n_leaf must be >= 1");
  if (c.ranks.empty()) throw ConfigError("ranks must not be empty");
  for (int r : c.ranks)
    if (r < 0) throw ConfigError("ranks must be >= 0");
  if (c.dense_limit < 1) throw ConfigError("dense_limit must be >= 1");
  if (!(c.R > 0.0) || !(c.eps > 0.0)) throw ConfigError("R and eps must be positive");
  if (c.out.empty()) throw ConfigError("out must not be empty");
}

/// Output directory of one command, with the file inventory and phase timings for the manifest.
class Run {
 public:
  Run(const Config& cfg, std::string command) : cfg_(cfg), command_(std::move(command)), dir_(fs::path(cfg.out) / command_) {
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& text) {
    hmx::io::write_text(dir_ / name, text);
    files_.push_back(name);
  }
  void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  template <class F>
  auto phase(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings_[name] = seconds_since(t0);
    } else {
      auto r = f();
      timings_[name] = seconds_since(t0);
      return r;
    }
  }

  void finish(int exit_code) {
    json files = json::array();
    for (const auto& f : files_)
      files.push_back({{"path", f}, {"bytes", fs::file_size(dir_ / f)}, {"crc32", hmx::io::crc32_hex(dir_ / f)}});
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json m{{"tool", "hmaxwell"},      {"version", kVersion}, {"command", command_},   {"exit_code", exit_code},
           {"config", config_json(cfg_)}, {"timings_s", timings_}, {"files", std::move(files)}, {"created_utc", stamp}};
    hmx::io::write_json(dir_ / "manifest.json", m);
  }

  const fs::path& dir() const { return dir_; }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  const Config& cfg_;
  std::string command_;
  fs::path dir_;
  std::vector<std::string> files_;
  json timings_ = json::object();
};

json complex_json(hmx::Complex z) { return json::array({z.real(), z.imag()}); }

void require_dense(const hmx::Discretization& d, const Config& c) {
  if (d.size() > c.dense_limit)
    throw ResourceLimit("N = " + std::to_string(d.size()) + " exceeds the dense limit " + std::to_string(c.dense_limit) +
                        "; lower n or raise dense_limit");
}

// ---------------------------------------------------------------------------------------------
// Commands

int cmd_mesh_info(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  const auto& m = d.mesh;
  std::size_t boundary_edges = 0;
  for (bool b : m.boundary_edge()) boundary_edges += b;
  double volume = 0.0;
  for (int t = 0; t < static_cast<int>(m.num_tets()); ++t) volume += m.geometry(t).volume();
  json info{{"n", c.n},
            {"L", c.L},
            {"N", d.size()},
            {"h", m.h()},
            {"vertices", m.num_vertices()},
            {"edges", m.num_edges()},
            {"tets", m.num_tets()},
            {"boundary_edges", boundary_edges},
            {"interior_vertices", d.nodal.size()},
            {"shape_regularity", m.shape_regularity()},
            {"volume", volume}};
  run.write("mesh_info.json", info);
  if (c.dump_mesh) run.write("mesh.json", hmx::io::mesh_json(m));
  std::cout << "N " << d.size() << "\nh " << hmx::io::fmt(m.h()) << "\nvertices " << m.num_vertices() << "\nedges "
            << m.num_edges() << "\ntets " << m.num_tets() << "\nboundary_edges " << boundary_edges
            << "\ninterior_vertices " << d.nodal.size() << "\nshape_regularity " << hmx::io::fmt(m.shape_regularity())
            << "\n";
  return kOk;
}

template <class S>
int cmd_assemble(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  const auto sys = run.phase("assemble", [&] { return hmx::assemble_system<S>(d.mesh, d.dofs, c.kappa()); });
  run.write("matrix.coo", hmx::io::matrix_coo<S>(sys.A));
  run.write("matrix.json", json{{"N", d.size()},
                                {"kappa", complex_json(c.kappa())},
                                {"h", d.h()},
                                {"n", c.n},
                                {"nnz", sys.A.nonZeros()},
                                {"scalar", hmx::is_complex_v<S> ? "complex" : "real"},
                                {"symmetric", hmx::exactly_symmetric<S>(sys.A)}});
  std::cout << "N " << d.size() << "\nnnz " << sys.A.nonZeros() << "\n";
  return kOk;
}

hmx::PowerIterationOptions sweep_power_options(const Config& c) {
  hmx::PowerIterationOptions opt;
  opt.tol = 1e-10;
  opt.max_iter = 2000;
  opt.seed = c.seed;
  return opt;
}

template <class S>
int cmd_rank_sweep(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  require_dense(d, c);
  const auto sys = run.phase("assemble", [&] { return hmx::assemble_system<S>(d.mesh, d.dofs, c.kappa()); });
  const auto B = run.phase("invert", [&] { return hmx::dense_inverse<S>(sys.A); });
  const auto tree = run.phase("cluster", [&] { return hmx::build_cluster_tree(d.mesh, d.dofs, c.n_leaf); });
  const auto part = hmx::build_block_partition(tree, c.eta);
  const auto sweep = run.phase("sweep", [&] { return hmx::rank_sweep<S>(B, tree, part, c.ranks, sweep_power_options(c)); });

  std::vector<double> r, e;
  for (const auto& row : sweep.rows) {
    r.push_back(row.rank);
    e.push_back(row.rel_err);
  }
  hmx::DecayFit fit;
  try {
    fit = hmx::fit_decay(r, e);
  } catch (const std::invalid_argument& ex) {
    fit.notice = ex.what();
  }
  run.write("sweep.csv", hmx::io::sweep_csv(sweep));
  json meta{{"n", c.n},
            {"N", d.size()},
            {"h", d.h()},
            {"kappa", complex_json(c.kappa())},
            {"eta", c.eta},
            {"n_leaf", c.n_leaf},
            {"depth", tree.depth()},
            {"sparsity_constant", hmx::sparsity_constant(part)},
            {"far_blocks", part.far.size()},
            {"near_blocks", part.near.size()},
            {"inverse_norm", sweep.inverse_norm},
            {"power_iteration_seed", c.seed},
            {"fit_target", "rel_err"},
            {"fit", hmx::io::fit_json(fit)}};
  run.write("fit.json", meta);
  run.write("sweep.svg", hmx::io::sweep_svg(sweep, fit));
  run.write("partition.json", hmx::io::partition_json(tree, part));
  const int rmax = *std::max_element(c.ranks.begin(), c.ranks.end());
  const auto H = hmx::compress_dense<S>(B, tree, part, rmax);
  run.write("hmatrix.json", hmx::io::hmatrix_manifest(H, "partition.json"));

  std::cout << "r,rel_err,bound_value\n";
  for (const auto& row : sweep.rows)
    std::cout << row.rank << ',' << hmx::io::fmt(row.rel_err) << ',' << hmx::io::fmt(row.bound_value) << '\n';
  if (fit.fitted)
    std::cout << "fit q " << hmx::io::fmt(fit.q) << " b " << hmx::io::fmt(fit.b) << "\n";
  else
    std::cout << "fit: " << fit.notice << "\n";
  return kOk;
}

template <class S>
int cmd_block_svd(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  require_dense(d, c);
  const auto sys = run.phase("assemble", [&] { return hmx::assemble_system<S>(d.mesh, d.dofs, c.kappa()); });
  const auto B = run.phase("invert", [&] { return hmx::dense_inverse<S>(sys.A); });
  const auto tree = hmx::build_cluster_tree(d.mesh, d.dofs, c.n_leaf);
  const auto part = hmx::build_block_partition(tree, c.eta);
  const auto rep = run.phase("svd", [&] { return hmx::decay_report<S>(B, tree, part); });
  json blocks = json::array();
  for (const auto& b : rep.blocks)
    blocks.push_back({{"tau", b.tau},
                      {"sigma", b.sigma},
                      {"rows", b.rows},
                      {"cols", b.cols},
                      {"singular_values", std::vector<double>(b.singular_values.begin(), b.singular_values.end())},
                      {"fit", hmx::io::fit_json(b.fit)}});
  run.write("block_svd.json", json{{"n", c.n}, {"N", d.size()}, {"eta", c.eta}, {"n_leaf", c.n_leaf}, {"blocks", blocks}});
  std::cout << "far blocks " << rep.blocks.size() << "\n";
  for (const auto& b : rep.blocks)
    std::cout << "(" << b.tau << "," << b.sigma << ") " << b.rows << "x" << b.cols << " sigma_1 "
              << hmx::io::fmt(b.singular_values.size() ? b.singular_values(0) : 0.0) << "\n";
  return kOk;
}

std::vector<std::pair<std::string, hmx::ConcentricPair>> experiment_pairs(const Config& c) {
  return {{"interior", {hmx::Point3::Constant(0.5 * c.L), c.R * c.L, c.eps}},
          {"boundary", {hmx::Point3(0.1 * c.L, 0.5 * c.L, 0.5 * c.L), c.R * c.L, c.eps}}};
}

json caccioppoli_json(const hmx::CaccioppoliResult& r, const hmx::ConcentricPair& p) {
  return {{"variant", hmx::to_string(r.variant)},
          {"center", hmx::io::point_json(p.center)},
          {"R", p.R},
          {"eps", p.eps},
          {"ratio", r.ratio},
          {"normalized", r.normalized},
          {"dimension", r.dimension},
          {"constraint_residual", r.constraint_residual},
          {"inner_tets", r.inner_tets},
          {"outer_tets", r.outer_tets},
          {"h_over_R", r.h_over_R},
          {"hypothesis_holds", r.hypothesis_holds},
          {"regularized", r.regularized}};
}

template <class S>
int cmd_caccioppoli(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  const auto sys = hmx::assemble_system<S>(d.mesh, d.dofs, c.kappa());
  json results = json::array();
  int status = kOk;
  run.phase("eigen", [&] {
    for (const auto& [label, pair] : experiment_pairs(c))
      for (auto v : {hmx::HarmonicVariant::curl, hmx::HarmonicVariant::grad}) {
        const auto r = hmx::caccioppoli_ratio<S>(d, sys, pair, v);
        json j = caccioppoli_json(r, pair);
        j["pair"] = label;
        results.push_back(j);
        if (r.constraint_residual > c.tol.constraint) status = kCheckFailure;
        std::cout << label << ' ' << hmx::to_string(v) << " ratio " << hmx::io::fmt(r.ratio) << " normalized "
                  << hmx::io::fmt(r.normalized) << " dim " << r.dimension << " h/R<eps/4 "
                  << (r.hypothesis_holds ? "yes" : "no") << "\n";
      }
  });
  run.write("caccioppoli.json", json{{"n", c.n}, {"h", d.h()}, {"kappa", complex_json(c.kappa())}, {"results", results}});
  return status;
}

template <class S>
hmx::VectorT<S> random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  hmx::VectorT<S> v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if constexpr (hmx::is_complex_v<S>)
      v(i) = S(normal(rng), normal(rng));
    else
      v(i) = normal(rng);
  }
  return v;
}

struct HelmholtzOutcome {
  json report;
  double pythagoras = 0.0, orthogonality = 0.0, gradient_part = 0.0, constraint = 0.0;
};

template <class S>
HelmholtzOutcome helmholtz_experiment(const Config& c, const hmx::Discretization& d, const hmx::GalerkinSystem<S>& sys) {
  HelmholtzOutcome out;
  std::mt19937_64 rng(c.seed);
  json rows = json::array();
  for (const auto& [label, pair] : experiment_pairs(c)) {
    // Harmonic on B_{(1+2eps)R}; split on its mesh-conforming region.
    const hmx::Box3 box = hmx::Box3::cube(pair.center, (1.0 + 2.0 * pair.eps) * pair.R);
    const hmx::Region region = hmx::make_region(d, hmx::tets_intersecting(d.mesh, box));
    const auto e = random_vector<S>(d.size(), rng);
    const auto split = hmx::local_helmholtz<S>(d, region, e);
    const auto space = hmx::harmonic_space<S>(d, sys, box, hmx::HarmonicVariant::curl, region.edge_dofs);
    double worst = 0.0;
    for (int j = 0; j < space.local_dimension(); ++j)
      worst = std::max(worst, hmx::gradient_part_harmonic_check<S>(d, region, box, space.global_column(j)));
    const double control = hmx::gradient_part_harmonic_check<S>(d, region, box, e);
    const auto tested = hmx::vertex_dofs_supported_in(d.mesh, d.nodal, box).size();
    out.pythagoras = std::max(out.pythagoras, split.pythagoras_defect);
    out.orthogonality = std::max(out.orthogonality, split.orthogonality_residual);
    out.gradient_part = std::max(out.gradient_part, worst);
    out.constraint = std::max(out.constraint, space.constraint_residual);
    rows.push_back({{"pair", label},
                    {"box", hmx::io::box_json(box)},
                    {"region_tets", region.tets.size()},
                    {"tested_vertices", tested},
                    {"touches_boundary", region.touches_boundary},
                    {"norm_sq_E", split.norm_sq_e},
                    {"norm_sq_z", split.norm_sq_z},
                    {"norm_sq_grad_p", split.norm_sq_grad},
                    {"pythagoras_defect", split.pythagoras_defect},
                    {"orthogonality_residual", split.orthogonality_residual},
                    {"harmonic_dimension", space.local_dimension()},
                    {"constraint_rows", space.rows.size()},
                    {"constraint_residual", space.constraint_residual},
                    {"gradient_part_residual", worst},
                    {"random_field_residual", control}});
  }
  out.report = {{"n", c.n}, {"seed", c.seed}, {"regions", rows}};
  return out;
}

template <class S>
int cmd_helmholtz(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  const auto sys = hmx::assemble_system<S>(d.mesh, d.dofs, c.kappa());
  const auto out = run.phase("helmholtz", [&] { return helmholtz_experiment<S>(c, d, sys); });
  run.write("helmholtz.json", out.report);
  std::cout << "pythagoras " << hmx::io::fmt(out.pythagoras) << "\northogonality " << hmx::io::fmt(out.orthogonality)
            << "\ngradient_part " << hmx::io::fmt(out.gradient_part) << "\n";
  const bool ok = out.pythagoras <= c.tol.pythagoras && out.orthogonality <= c.tol.orthogonality &&
                  out.gradient_part <= c.tol.gradient_part && out.constraint <= c.tol.constraint;
  return ok ? kOk : kCheckFailure;
}

int cmd_commuting(const Config& c, Run& run) {
  const auto res = run.phase("check", [&] { return hmx::commuting_suite(50, 3, c.seed); });
  run.write("commuting.json", json{{"tets", res.tets},
                                   {"fields", res.fields},
                                   {"max_degree", 3},
                                   {"seed", c.seed},
                                   {"max_residual", res.max_residual},
                                   {"tolerance", c.tol.commuting}});
  std::cout << "max_residual " << hmx::io::fmt(res.max_residual) << "\n";
  return res.max_residual <= c.tol.commuting ? kOk : kCheckFailure;
}

int cmd_dual_basis(const Config& c, Run& run) {
  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  const auto basis = hmx::dual_basis(d.mesh, d.dofs);
  const double defect = hmx::dual_biorthogonality_defect(d.mesh, d.dofs, basis);
  const double scaled = hmx::max_dual_norm(basis) * std::sqrt(d.h());
  run.write("dual_basis.json", json{{"n", c.n},
                                    {"N", d.size()},
                                    {"h", d.h()},
                                    {"biorthogonality_defect", defect},
                                    {"max_norm_times_sqrt_h", scaled},
                                    {"tolerance", c.tol.dual_basis}});
  std::cout << "biorthogonality_defect " << hmx::io::fmt(defect) << "\nmax_norm_times_sqrt_h " << hmx::io::fmt(scaled)
            << "\n";
  return defect <= c.tol.dual_basis ? kOk : kCheckFailure;
}

template <class S>
int cmd_verify(const Config& c, Run& run) {
  json checks = json::array();
  std::vector<std::string> failures;
  const auto record = [&](const std::string& name, double value, double tol, bool pass, json extra = json::object()) {
    json j{{"check", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}};
    for (auto& [k, v] : extra.items()) j[k] = v;
    checks.push_back(j);
    if (!pass) failures.push_back(name);
    std::cout << (pass ? "PASS " : "FAIL ") << name << " value " << hmx::io::fmt(value) << " tol " << hmx::io::fmt(tol)
              << "\n";
  };

  const hmx::Discretization d = run.phase("mesh", [&] { return hmx::Discretization(c.n, c.L); });
  const auto sys = run.phase("assemble", [&] { return hmx::assemble_system<S>(d.mesh, d.dofs, c.kappa()); });

  run.phase("structure", [&] {
    const bool sym = hmx::exactly_symmetric<S>(sys.A);
    record("symmetry", sym ? 0.0 : 1.0, c.tol.symmetry, sym);
    const double cg = hmx::curl_grad_defect(d, sys.K, 5, c.seed);
    record("curl_grad", cg, c.tol.curl_grad, cg <= c.tol.curl_grad);
  });

  run.phase("commuting", [&] {
    const auto res = hmx::commuting_suite(50, 3, c.seed);
    record("commuting_diagram", res.max_residual, c.tol.commuting, res.max_residual <= c.tol.commuting);
  });

  run.phase("dual_basis", [&] {
    const auto basis = hmx::dual_basis(d.mesh, d.dofs);
    const double defect = hmx::dual_biorthogonality_defect(d.mesh, d.dofs, basis);
    record("dual_biorthogonality", defect, c.tol.dual_basis, defect <= c.tol.dual_basis);
  });

  run.phase("helmholtz", [&] {
    const auto out = helmholtz_experiment<S>(c, d, sys);
    record("pythagoras", out.pythagoras, c.tol.pythagoras, out.pythagoras <= c.tol.pythagoras);
    record("projection_orthogonality", out.orthogonality, c.tol.orthogonality, out.orthogonality <= c.tol.orthogonality);
    record("harmonic_constraints", out.constraint, c.tol.constraint, out.constraint <= c.tol.constraint);
    record("gradient_part_harmonic", out.gradient_part, c.tol.gradient_part, out.gradient_part <= c.tol.gradient_part);
  });

  run.phase("exact_sequence", [&] {
    const auto pairs = experiment_pairs(c);
    double worst = 0.0;
    for (const auto& [label, pair] : pairs) {
      const auto region = hmx::make_region(d, hmx::tets_intersecting(d.mesh, pair.outer()));
      if (region.vertex_dofs.empty()) continue;
      const auto t = hmx::exact_sequence_trials(d, region, 10, c.seed);
      worst = std::max({worst, t.max_residual, t.max_mismatch});
    }
    record("exact_sequence", worst, c.tol.exact_sequence, worst <= c.tol.exact_sequence);
  });

  run.phase("caccioppoli", [&] {
    double worst = 0.0;
    bool finite = true;
    for (const auto& [label, pair] : experiment_pairs(c))
      for (auto v : {hmx::HarmonicVariant::curl, hmx::HarmonicVariant::grad}) {
        const auto r = hmx::caccioppoli_ratio<S>(d, sys, pair, v);
        worst = std::max(worst, r.constraint_residual);
        finite = finite && std::isfinite(r.normalized);
      }
    record("caccioppoli_constraints", worst, c.tol.constraint, finite && worst <= c.tol.constraint);
  });

  if (d.size() <= c.dense_limit) {
    run.phase("block_bound", [&] {
      const auto B = hmx::dense_inverse<S>(sys.A);
      const auto tree = hmx::build_cluster_tree(d.mesh, d.dofs, c.n_leaf);
      const auto part = hmx::build_block_partition(tree, c.eta);
      const bool tiles = hmx::partition_tiles_exactly(tree, part);
      record("partition_tiling", tiles ? 0.0 : 1.0, 0.0, tiles);
      const auto sweep = hmx::rank_sweep<S>(B, tree, part, c.ranks, sweep_power_options(c));
      const double floor = std::sqrt(static_cast<double>(d.size())) * std::numeric_limits<double>::epsilon() *
                           sweep.inverse_norm;
      double worst = 0.0;  // max of measured / allowed
      for (const auto& row : sweep.rows) {
        const double allowed = c.tol.bound_slack * row.bound_value + floor;
        worst = std::max(worst, allowed > 0.0 ? row.abs_err / allowed : (row.abs_err > 0.0 ? 2.0 : 0.0));
      }
      record("block_to_global_bound", worst, 1.0, worst <= 1.0, {{"rounding_floor", floor}});

      hmx::DualBasis basis = hmx::dual_basis(d.mesh, d.dofs);
      hmx::TransferCheck<S> transfer(d, sys, basis);
      double disc = 0.0, load = 0.0;
      for (const auto& [t, s] : part.far) {
        const auto r = transfer.check(B, tree[t].indices, tree[s].indices, 3, c.seed);
        disc = std::max(disc, r.max_rel_discrepancy);
        load = std::max(load, r.max_load_deviation);
      }
      record("transfer_identity", std::max(disc, load), c.tol.transfer, std::max(disc, load) <= c.tol.transfer,
             {{"far_blocks", part.far.size()}});
    });
  } else {
    std::cout << "SKIP block_to_global_bound, transfer_identity: N exceeds dense limit\n";
  }

  run.write("verify.json", json{{"n", c.n}, {"seed", c.seed}, {"checks", checks}, {"failures", failures}});
  if (!failures.empty()) {
    std::cerr << "verify: " << failures.size() << " check(s) failed:";
    for (const auto& f : failures) std::cerr << ' ' << f;
    std::cerr << "\n";
    return kCheckFailure;
  }
  return kOk;
}

template <template <class> class Cmd>
int dispatch(const Config& c, Run& run) {
  if (c.kappa_im == 0.0) return Cmd<double>::run(c, run);
  return Cmd<hmx::Complex>::run(c, run);
}

template <class S>
struct Assemble {
  static int run(const Config& c, Run& r) { return cmd_assemble<S>(c, r); }
};
template <class S>
struct RankSweep {
  static int run(const Config& c, Run& r) { return cmd_rank_sweep<S>(c, r); }
};
template <class S>
struct BlockSvd {
  static int run(const Config& c, Run& r) { return cmd_block_svd<S>(c, r); }
};
template <class S>
struct Caccioppoli {
  static int run(const Config& c, Run& r) { return cmd_caccioppoli<S>(c, r); }
};
template <class S>
struct Helmholtz {
  static int run(const Config& c, Run& r) { return cmd_helmholtz<S>(c, r); }
};
template <class S>
struct Verify {
  static int run(const Config& c, Run& r) { return cmd_verify<S>(c, r); }
};

struct Flags {
  std::optional<int> n, n_leaf;
  std::optional<double> L, kappa_re, kappa_im, eta;
  std::optional<std::vector<int>> ranks;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string config;
  bool dump_mesh = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--n", f.n, "subdivisions per axis (default 4)");
  sub->add_option("--L", f.L, "box side length (default 1)");
  sub->add_option("--kappa-re", f.kappa_re, "real part of kappa (default 1)");
  sub->add_option("--kappa-im", f.kappa_im, "imaginary part of kappa (default 0; nonzero selects complex arithmetic)");
  sub->add_option("--eta", f.eta, "admissibility parameter (default 2)");
  sub->add_option("--n-leaf", f.n_leaf, "leaf size of the cluster tree (default 32)");
  sub->add_option("--ranks", f.ranks, "block ranks for the sweep (default 1,2,4,8,12,16,20)")->delimiter(',');
  sub->add_option("--seed", f.seed, "seed for random fields and power iteration (default 20240917)");
  sub->add_option("--out", f.out, "output directory (default hmaxwell_out); files go to <out>/<command>/");
  sub->add_option("--config", f.config, "JSON config file; command-line flags take precedence");
}

Config resolve(const Flags& f) {
  Config c;
  if (!f.config.empty()) merge_config_file(f.config, c);
  if (f.n) c.n = *f.n;
  if (f.L) c.L = *f.L;
  if (f.kappa_re) c.kappa_re = *f.kappa_re;
  if (f.kappa_im) c.kappa_im = *f.kappa_im;
  if (f.eta) c.eta = *f.eta;
  if (f.n_leaf) c.n_leaf = *f.n_leaf;
  if (f.ranks) c.ranks = *f.ranks;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.dump_mesh) c.dump_mesh = true;
  validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-element Maxwell discretization, H-matrix compression of its inverse, and property checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Flags flags;

  struct Verb {
    const char* name;
    const char* help;
    std::function<int(const Config&, Run&)> fn;
  };
  const std::vector<Verb> verbs{
      {"mesh-info", "mesh counts and mesh width", cmd_mesh_info},
      {"assemble", "assemble A = K - kappa M and write it in coordinate format", dispatch<Assemble>},
      {"rank-sweep", "compress the inverse at each rank; CSV, fits and SVG plot", dispatch<RankSweep>},
      {"block-svd", "singular values and decay fits of every far block", dispatch<BlockSvd>},
      {"caccioppoli", "Caccioppoli ratios on harmonic spaces (interior and boundary pairs)", dispatch<Caccioppoli>},
      {"helmholtz", "local discrete Helmholtz split and gradient-part harmonicity", dispatch<Helmholtz>},
      {"commuting-check", "interpolation commuting diagram on random tets and fields", cmd_commuting},
      {"dual-basis-check", "biorthogonality and scaling of the dual basis", cmd_dual_basis},
      {"verify", "run every property check; exit 1 if any fails", dispatch<Verify>},
  };
  std::vector<CLI::App*> subs;
  for (const auto& v : verbs) {
    auto* sub = app.add_subcommand(v.name, v.help);
    add_common(sub, flags);
    if (std::string(v.name) == "mesh-info") sub->add_flag("--dump-mesh", flags.dump_mesh, "also write mesh.json");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  Config cfg;
  try {
    cfg = resolve(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  for (std::size_t i = 0; i < verbs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    Run run(cfg, verbs[i].name);
    int code = kOk;
    try {
      code = verbs[i].fn(cfg, run);
    } catch (const ResourceLimit& e) {
      std::cerr << "resource limit: " << e.what() << "\n";
      code = kResourceLimit;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      code = kCheckFailure;
    }
    run.finish(code);
    return code;
  }
  return kConfigError;
}
