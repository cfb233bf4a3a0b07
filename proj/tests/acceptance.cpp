// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
// Exits nonzero when any criterion fails.

#include "hmaxwell/hmaxwell.hpp"
#include "hmaxwell/io.hpp"

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace hmx;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string f(double x) { return io::fmt(x); }

// Frozen from the first oracle run: relative spectral error of the n=5 sweep.
struct Baseline {
  int rank;
  double rel_err;
};
constexpr Baseline kSweepBaseline[] = {{1, 3.7685412001346936e-4}, {2, 3.7685412001374073e-4}, {4, 5.4357575e-5},
                                       {8, 9.667e-7},              {12, 1.6198e-8},             {16, 1.5194e-11},
                                       {20, 7.786e-17}};
// Errors at or below this are rounding noise and are compared only against the floor.
constexpr double kNoiseFloor = 1e-14;

// Frozen normalized Caccioppoli constants (largest value seen over n in {4, 6, 8}).
constexpr double kCaccioppoliCurl = 0.575747;
constexpr double kCaccioppoliGrad = 0.501686;

const Box3 kInteriorBox = Box3::cube(Point3::Constant(0.5), 0.5);
const Box3 kBoundaryBox = Box3::cube(Point3(0.1, 0.5, 0.5), 0.5);

Outcome criterion_sweep() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Discretization d(5, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 32);
  const auto part = build_block_partition(tree, 2.0);
  const std::vector<int> ranks{1, 2, 4, 8, 12, 16, 20};
  const auto sweep = rank_sweep<double>(B, tree, part, ranks, {1e-10, 2000, 20240917});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  o.note("N " + std::to_string(d.size()) + " depth " + std::to_string(tree.depth()) + " far " +
         std::to_string(part.far.size()) + " C_sp " + std::to_string(sparsity_constant(part)));
  std::vector<double> r, e;
  for (const auto& row : sweep.rows) {
    o.note("r " + std::to_string(row.rank) + " rel_err " + f(row.rel_err) + " converged " +
           (row.converged ? "yes" : "no"));
    r.push_back(row.rank);
    e.push_back(row.rel_err);
  }
  for (std::size_t i = 1; i < e.size(); ++i) {
    // 1e-6 relative resolution: far above the power-iteration tolerance, far below real decay.
    const bool dec = e[i] < e[i - 1] * (1.0 - 1e-6);
    if (!dec)
      o.check(false, "strict decrease r=" + std::to_string(ranks[i - 1]) + "->" + std::to_string(ranks[i]) + ": " +
                         f(e[i - 1]) + " -> " + f(e[i]));
  }
  if (o.pass) o.check(true, "relative error strictly decreasing");
  const double span = std::log10(e.front() / std::max(e.back(), std::numeric_limits<double>::min()));
  o.check(span >= 5.0, "span " + f(span) + " orders of magnitude (need >= 5)");

  const auto fit = fit_decay(r, e);
  o.note("plain exponential q " + f(fit.q) + " rms " + f(fit.rms_exp));
  o.check(fit.fitted && fit.b > 0.0, "root-exponential b " + f(fit.b) + " > 0 (fit rms " + f(fit.rms_root) + ")");

  bool baseline_ok = true;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const double ref = kSweepBaseline[i].rel_err;
    const bool ok = ref <= kNoiseFloor ? e[i] <= kNoiseFloor : std::abs(e[i] - ref) <= 0.05 * ref;
    if (!ok) o.check(false, "baseline r=" + std::to_string(ranks[i]) + " got " + f(e[i]) + " frozen " + f(ref));
    baseline_ok = baseline_ok && ok;
  }
  if (baseline_ok) o.check(true, "all ranks within 5% of frozen baseline");
  o.check(seconds < 600.0, "runtime " + f(seconds) + " s (target < 600 s)");
  return o;
}

Outcome criterion_block_to_global() {
  Outcome o;
  const Discretization d(5, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 32);
  const auto part = build_block_partition(tree, 2.0);
  const std::vector<int> ranks{1, 2, 4, 8, 12, 16, 20};
  const auto sweep = rank_sweep<double>(B, tree, part, ranks, {1e-10, 2000, 20240917});
  // Measured errors are themselves computed in floating point; below this level they are noise.
  const double floor = std::sqrt(static_cast<double>(d.size())) * std::numeric_limits<double>::epsilon() *
                       sweep.inverse_norm;
  o.note("rounding floor sqrt(N) eps |B| = " + f(floor));
  for (const auto& row : sweep.rows) {
    const double allowed = row.bound_value * 1.000001 + floor;
    o.check(row.abs_err <= allowed, "r " + std::to_string(row.rank) + " error " + f(row.abs_err) + " <= bound " +
                                        f(row.bound_value) + " (C_sp " + std::to_string(row.sparsity) + ", depth " +
                                        std::to_string(row.depth) + ")");
  }
  return o;
}

Outcome criterion_eckart_young() {
  Outcome o;
  std::mt19937_64 rng(20240917);
  std::uniform_int_distribution<int> dim(5, 40);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd A(dim(rng), dim(rng));
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, j) = normal(rng);
    const Eigen::Index m = std::min(A.rows(), A.cols());
    const Eigen::Index r = std::uniform_int_distribution<Eigen::Index>(0, m - 1)(rng);
    const auto lr = truncated_svd<double>(A, r);
    const Eigen::VectorXd sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues();
    const Eigen::MatrixXd E = A - lr.X * lr.Y.adjoint();
    const double err = Eigen::JacobiSVD<Eigen::MatrixXd>(E).singularValues()(0);
    worst = std::max(worst, std::abs(err - sigma(r)));
  }
  o.check(worst <= 1e-10, "max |block error - sigma_{r+1}| over 20 matrices " + f(worst));
  return o;
}

Outcome criterion_commuting() {
  Outcome o;
  const auto res = commuting_suite(50, 3, 20240917);
  o.check(res.max_residual <= 1e-12, std::to_string(res.fields) + " fields on " + std::to_string(res.tets) +
                                         " tets, max residual " + f(res.max_residual));
  return o;
}

Outcome criterion_dual_basis() {
  Outcome o;
  for (int n : {2, 3, 4}) {
    const Discretization d(n, 1.0);
    const double defect = dual_biorthogonality_defect(d.mesh, d.dofs, dual_basis(d.mesh, d.dofs));
    o.check(defect <= 1e-12, "n " + std::to_string(n) + " biorthogonality defect " + f(defect));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int n : {2, 3, 4, 6}) {
    const Discretization d(n, 1.0);
    const double s = max_dual_norm(dual_basis(d.mesh, d.dofs)) * std::sqrt(d.h());
    o.note("n " + std::to_string(n) + " max |lambda| h^{1/2} " + f(s));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  o.check(hi / lo <= 2.0, "scaled norm varies by factor " + f(hi / lo));
  return o;
}

Outcome criterion_caccioppoli() {
  Outcome o;
  const ConcentricPair pair;
  for (const auto variant : {HarmonicVariant::curl, HarmonicVariant::grad}) {
    const double C = variant == HarmonicVariant::curl ? kCaccioppoliCurl : kCaccioppoliGrad;
    double largest = 0.0;
    bool within = true;
    for (int n : {4, 6, 8}) {
      const Discretization d(n, 1.0);
      const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
      const auto res = caccioppoli_ratio<double>(d, sys, pair, variant);
      o.note(std::string(to_string(variant)) + " n " + std::to_string(n) + " normalized " + f(res.normalized) +
             " dim " + std::to_string(res.dimension) + " inner tets " + std::to_string(res.inner_tets) +
             " h/R<eps/4 " + (res.hypothesis_holds ? "yes" : "no"));
      within = within && res.normalized <= 1.25 * C && std::isfinite(res.normalized);
      largest = std::max(largest, res.normalized);
    }
    o.check(within && largest >= 0.75 * C, std::string(to_string(variant)) + " values <= 1.25 C and max " + f(largest) +
                                               " >= 0.75 C, frozen C " + f(C));
  }
  return o;
}

Outcome criterion_exact_sequence() {
  Outcome o;
  for (int n : {3, 4})
    for (const auto& [name, box] : {std::pair{"center (0.5,0.5,0.5)", kInteriorBox},
                                    std::pair{"center (0.1,0.5,0.5)", kBoundaryBox}}) {
      const Discretization d(n, 1.0);
      const Region region = make_region(d, tets_intersecting(d.mesh, box));
      const auto res = exact_sequence_trials(d, region, 10, 20240917);
      const double worst = std::max(res.max_residual, res.max_mismatch);
      o.check(worst <= 1e-10, "n " + std::to_string(n) + " " + name +
                                  (region.touches_boundary ? " (region meets the boundary)" : "") +
                                  ", 10 instances, residual " + f(worst));
    }
  return o;
}

Outcome criterion_helmholtz() {
  Outcome o;
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  std::mt19937_64 rng(20240917);
  std::normal_distribution<double> normal;
  // B_{(1+2eps)R} around both pair centers, a box whose region stays off the boundary, and a
  // larger boundary-touching box holding more than one vertex support.
  const std::vector<std::pair<std::string, Box3>> boxes{
      {"center (0.5,0.5,0.5) side 0.5", kInteriorBox},
      {"center (0.5,0.5,0.5)", Box3::cube(Point3(0.5, 0.5, 0.5), 0.8)},
      {"center (0.1,0.5,0.5)", Box3::cube(Point3(0.1, 0.5, 0.5), 0.8)},
      {"center (0.3,0.5,0.5) side 1", Box3::cube(Point3(0.3, 0.5, 0.5), 1.0)}};
  bool saw_interior = false, saw_boundary = false;
  for (const auto& [name, box] : boxes) {
    const Region region = make_region(d, tets_intersecting(d.mesh, box));
    (region.touches_boundary ? saw_boundary : saw_interior) = true;
    const std::string label = name + (region.touches_boundary ? " (region meets the boundary)" : "");
    Eigen::VectorXd e(d.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
    const auto split = local_helmholtz<double>(d, region, e);
    o.check(split.pythagoras_defect <= 1e-10, label + " Pythagoras defect " + f(split.pythagoras_defect));
    const auto space = harmonic_space<double>(d, sys, box, HarmonicVariant::curl, region.edge_dofs);
    double worst = 0.0;
    for (int j = 0; j < space.local_dimension(); ++j)
      worst = std::max(worst, gradient_part_harmonic_check<double>(d, region, box, space.global_column(j)));
    const auto tested = vertex_dofs_supported_in(d.mesh, d.nodal, box).size();
    o.check(space.local_dimension() > 0 && tested > 0 && worst <= 1e-9,
            label + " gradient parts of " + std::to_string(space.local_dimension()) + " harmonic columns at " +
                std::to_string(tested) + " vertices, residual " + f(worst));
    o.note(label + " control on a random field " + f(gradient_part_harmonic_check<double>(d, region, box, e)));
  }
  o.check(saw_interior && saw_boundary, "both interior and boundary-touching regions covered");
  return o;
}

Outcome criterion_transfer() {
  Outcome o;
  const Discretization d(4, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  const auto basis = dual_basis(d.mesh, d.dofs);
  const Eigen::MatrixXd B = dense_inverse<double>(sys.A);
  // n_leaf 32 leaves no admissible pair at n=4; 8 does.
  const auto tree = build_cluster_tree(d.mesh, d.dofs, 8);
  const auto part = build_block_partition(tree, 2.0);
  const TransferCheck<double> check(d, sys, basis);
  double worst = 0.0, load = 0.0;
  std::uint64_t seed = 20240917;
  for (const auto& [t, s] : part.far) {
    const auto res = check.check(B, tree[t].indices, tree[s].indices, 10, seed++);
    worst = std::max(worst, res.max_rel_discrepancy);
    load = std::max(load, res.max_load_deviation);
  }
  o.check(!part.far.empty(), std::to_string(part.far.size()) + " admissible pairs (n_leaf 8, eta 2)");
  o.check(worst <= 1e-8, "max relative discrepancy over 10 samples per pair " + f(worst));
  o.note("max load deviation from b " + f(load));
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HMX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_structure() {
  Outcome o;
  const Discretization d(5, 1.0);
  const auto sys = assemble_system<double>(d.mesh, d.dofs, Complex(1.0));
  o.check(exactly_symmetric(sys.A), "A == A^T bit for bit (n 5, real kappa)");
  const auto csys = assemble_system<Complex>(d.mesh, d.dofs, Complex(1.0, 0.5));
  o.check(exactly_symmetric(csys.A), "A == A^T bit for bit (n 5, complex kappa)");
  const double cg = curl_grad_defect(d, sys.K, 10, 20240917);
  o.check(cg <= 1e-12, "|K G p| / (|K| |G p|) " + f(cg));
  for (const auto& [n, n_leaf] : {std::pair{5, 32}, std::pair{4, 8}, std::pair{4, 16}}) {
    const Discretization dd(n, 1.0);
    const auto tree = build_cluster_tree(dd.mesh, dd.dofs, n_leaf);
    o.check(partition_tiles_exactly(tree, build_block_partition(tree, 2.0)),
            "partition tiles I x I (n " + std::to_string(n) + ", n_leaf " + std::to_string(n_leaf) + ")");
  }

  const fs::path scratch = fs::temp_directory_path() / "hmaxwell_acceptance";
  fs::remove_all(scratch);
  bool same = true;
  int files = 0;
  for (const std::string cmd : {"rank-sweep --n 4 --n-leaf 8", "verify --n 3", "block-svd --n 4 --n-leaf 8"}) {
    const std::string verb = cmd.substr(0, cmd.find(' '));
    const int a = run_cli(cmd + " --seed 11 --out " + (scratch / "a").string());
    const int b = run_cli(cmd + " --seed 11 --out " + (scratch / "b").string());
    same = same && a == 0 && b == 0;
    for (const auto& entry : fs::directory_iterator(scratch / "a" / verb)) {
      // The manifest records wall-clock timings and a timestamp; everything else must match.
      if (entry.path().filename() == "manifest.json") continue;
      ++files;
      same = same && io::read_text(entry.path()) == io::read_text(scratch / "b" / verb / entry.path().filename());
    }
  }
  o.check(same && files > 0, "CLI reruns byte-identical under a fixed seed (" + std::to_string(files) + " files)");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 root-exponential approximability sweep", criterion_sweep},
      {"2 block-to-global bound", criterion_block_to_global},
      {"3 Eckart-Young oracle", criterion_eckart_young},
      {"4 commuting diagram", criterion_commuting},
      {"5 dual basis", criterion_dual_basis},
      {"6 Caccioppoli constants", criterion_caccioppoli},
      {"7 local exact sequence", criterion_exact_sequence},
      {"8 Helmholtz orthogonality and harmonic gradient parts", criterion_helmholtz},
      {"9 transfer identity", criterion_transfer},
      {"10 structural invariants", criterion_structure}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << "criterion " << name << "\n";
    for (const auto& line : o.details) std::cout << "    " << line << "\n";
    std::cout.flush();
    failed += o.pass ? 0 : 1;
  }
  std::cout << (10 - failed) << "/10 criteria passed\n";
  return failed == 0 ? 0 : 1;
}
