// Command-line harness for permutation identity tracking on the hypersphere:
// observation-noise calibration, synthetic static-permutation inference,
// proximity-swap trajectory tracking, and an embedding self-test.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "permsphere/permsphere.hpp"

namespace {

using namespace permsphere;

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

struct CalibrateArgs {
  int n = 25;
  double nu = 0.1;
  std::uint64_t seed = 1;
  int draws = 0;
  std::string basis_cache;
  std::string out;
};

int run_calibrate(const CalibrateArgs& a) {
  EmbeddingBasis basis = load_or_build_basis(a.n, opt_path(a.basis_cache));
  const double kappa = calibrate_kappa(basis, a.nu, a.seed, a.draws);
  std::printf("%.12g\n", kappa);
  if (!a.out.empty()) {
    std::ofstream os(a.out, std::ios::trunc | std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file: " + a.out);
    char buf[160];
    std::snprintf(buf, sizeof buf, "n,nu,kappa,draws,seed\n%d,%g,%.12g,%d,%llu\n",
                  a.n, a.nu, kappa,
                  a.draws > 0 ? a.draws : detail::default_calibration_draws(a.n),
                  static_cast<unsigned long long>(a.seed));
    os << buf;
  }
  return 0;
}

struct SyntheticArgs {
  SyntheticConfig cfg;
  double kappa_tr = -1.0;  // negative = static (predict skipped)
  std::string basis_cache;
  std::string out;
};

int run_synthetic_cmd(const SyntheticArgs& a) {
  SyntheticConfig cfg = a.cfg;
  if (a.kappa_tr >= 0.0) cfg.kappa_tr = a.kappa_tr;
  EmbeddingBasis basis = load_or_build_basis(cfg.n, opt_path(a.basis_cache));
  ErrorReport report = run_synthetic(cfg, basis);
  report.write_csv(a.out);
  std::printf("final mean error %.9f (wrote %s)\n",
              report.summary().mean_error, a.out.c_str());
  return 0;
}

struct TrackArgs {
  std::string data;
  std::vector<int> generate;  // objects,frames
  double pswap = 0.1;
  double scale = 0.1;
  double nu = 0.3;
  double missing = 0.0;
  double kappa_tr = -1.0;  // negative = matched-diffusion default
  int repeats = 10;
  std::uint64_t seed = 1;
  int draws = 0;
  std::string basis_cache;
  std::string out;
  std::string export_data;
};

int run_track_cmd(const TrackArgs& a) {
  TrackDataset dataset;
  if (!a.data.empty()) {
    dataset = ingest_trajectories(a.data);
  } else {
    if (a.generate.size() != 2)
      throw std::runtime_error("--generate expects objects,frames");
    std::mt19937_64 rng = make_stream(a.seed, stream::kTrajectories);
    dataset = generate_trajectories(a.generate[0], a.generate[1], rng);
  }
  if (!a.export_data.empty()) export_trajectories(a.export_data, dataset);

  SwapModelParams params{a.pswap, a.scale};
  std::optional<double> kappa_tr;
  if (a.kappa_tr >= 0.0) kappa_tr = a.kappa_tr;
  EmbeddingBasis basis =
      load_or_build_basis(dataset.objects, opt_path(a.basis_cache));
  ErrorReport report = run_tracking(dataset, params, a.nu, a.missing, kappa_tr,
                                    a.repeats, a.seed, basis, a.draws);
  report.write_csv(a.out);
  std::printf("mean tracking error %.9f over %d frames (wrote %s)\n",
              report.summary().mean_error, dataset.frame_count(),
              a.out.c_str());
  return 0;
}

struct RoundtripArgs {
  int n = 6;
  int samples = 1000;
  std::string basis_cache;
};

int run_roundtrip_check(const RoundtripArgs& a) {
  EmbeddingBasis basis = load_or_build_basis(a.n, opt_path(a.basis_cache));
  const int n = a.n;
  const int m = basis.sphere_dim();
  bool ok = true;
  const auto report = [&ok](bool pass, const std::string& what) {
    std::printf("%s %s\n", pass ? "ok:  " : "FAIL:", what.c_str());
    ok = ok && pass;
  };

  const double ortho_err =
      (basis.Q().transpose() * basis.Q() - Eigen::MatrixXd::Identity(m, m))
          .cwiseAbs()
          .maxCoeff();
  report(ortho_err <= 1e-10, "Q^T Q = I (max deviation " +
                                 std::to_string(ortho_err) + ")");

  double normal_err = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd row_normal = Eigen::VectorXd::Zero(n * n);
    Eigen::VectorXd col_normal = Eigen::VectorXd::Zero(n * n);
    for (int j = 0; j < n; ++j) {
      row_normal[static_cast<Eigen::Index>(i) * n + j] = 1.0;
      col_normal[static_cast<Eigen::Index>(j) * n + i] = 1.0;
    }
    normal_err = std::max(normal_err,
                          (basis.Q().transpose() * row_normal).cwiseAbs().maxCoeff());
    normal_err = std::max(normal_err,
                          (basis.Q().transpose() * col_normal).cwiseAbs().maxCoeff());
  }
  report(normal_err <= 1e-10, "columns orthogonal to all 2n constraint normals");

  std::mt19937_64 rng = make_stream(12345);
  double radius_err = 0.0;
  int roundtrip_failures = 0;
  int checked = 0;
  const auto check_one = [&](const PermutationMatrix& p) {
    radius_err = std::max(
        radius_err,
        std::abs((p.ambient_vector() - basis.center()).norm() - basis.radius()));
    if (!(from_sphere(to_sphere(p, basis), basis) == p)) ++roundtrip_failures;
    ++checked;
  };
  if (n <= 6) {
    std::vector<int> map(static_cast<std::size_t>(n));
    std::iota(map.begin(), map.end(), 0);
    do {
      check_one(PermutationMatrix{std::vector<int>(map)});
    } while (std::next_permutation(map.begin(), map.end()));
  } else {
    for (int i = 0; i < a.samples; ++i) check_one(random_permutation(n, rng));
  }
  report(radius_err <= 1e-10,
         "embedding radius sqrt(n-1) across " + std::to_string(checked) +
             " permutations");
  report(roundtrip_failures == 0,
         "from_sphere(to_sphere(P)) = P (" + std::to_string(roundtrip_failures) +
             " failures)");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"permutation identity tracking on a hypersphere embedding"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  CLI::App* c = app.add_subcommand(
      "calibrate", "find kappa for a target misobservation fraction nu");
  c->set_config("--config");
  c->add_option("--n", cal.n, "number of objects")->required();
  c->add_option("--nu", cal.nu, "target misobservation fraction in (0,1)")
      ->required();
  c->add_option("--seed", cal.seed, "RNG seed");
  c->add_option("--draws", cal.draws, "Monte-Carlo draws per estimate (0 = auto)");
  c->add_option("--basis-cache", cal.basis_cache, "basis cache file");
  c->add_option("--out", cal.out, "optional CSV output");

  SyntheticArgs syn;
  CLI::App* s = app.add_subcommand(
      "synthetic", "infer a static hidden permutation from noisy observations");
  s->set_config("--config");
  s->add_option("--n", syn.cfg.n, "number of objects")->required();
  s->add_option("--steps", syn.cfg.steps, "observation count");
  s->add_option("--nu", syn.cfg.nu, "misobservation fraction in [0,1)")
      ->required();
  s->add_option("--missing", syn.cfg.missing_frac,
                "fraction of hidden identities in [0,1)");
  s->add_option("--repeats", syn.cfg.repeats, "independent runs");
  s->add_option("--seed", syn.cfg.seed, "RNG seed");
  s->add_option("--kappa-tr", syn.kappa_tr,
                "transition concentration (omit for a static target)");
  s->add_option("--draws", syn.cfg.calibration_draws,
                "calibration draws (0 = auto)");
  s->add_option("--basis-cache", syn.basis_cache, "basis cache file");
  s->add_option("--out", syn.out, "output CSV")->required();

  TrackArgs trk;
  CLI::App* t = app.add_subcommand(
      "track", "track identities along trajectories with proximity swaps");
  t->set_config("--config");
  CLI::Option* data_opt =
      t->add_option("--data", trk.data, "trajectory CSV (frame,object,x,y)");
  CLI::Option* gen_opt = t->add_option("--generate", trk.generate,
                                       "generate a dataset: objects,frames")
                             ->delimiter(',')
                             ->expected(2);
  data_opt->excludes(gen_opt);
  t->add_option("--pswap", trk.pswap, "swap model strength");
  t->add_option("--scale", trk.scale, "swap model length scale");
  t->add_option("--nu", trk.nu, "misobservation fraction in [0,1)")->required();
  t->add_option("--missing", trk.missing, "fraction of hidden identities");
  t->add_option("--kappa-tr", trk.kappa_tr,
                "transition concentration (omit for the matched default)");
  t->add_option("--repeats", trk.repeats, "independent runs");
  t->add_option("--seed", trk.seed, "RNG seed");
  t->add_option("--draws", trk.draws, "calibration draws (0 = auto)");
  t->add_option("--basis-cache", trk.basis_cache, "basis cache file");
  t->add_option("--out", trk.out, "output CSV")->required();
  t->add_option("--export-data", trk.export_data,
                "write the (possibly generated) dataset to this CSV");

  RoundtripArgs rt;
  CLI::App* r = app.add_subcommand("roundtrip-check",
                                   "embedding self-test for a given n");
  r->set_config("--config");
  r->add_option("--n", rt.n, "number of objects")->required();
  r->add_option("--samples", rt.samples,
                "random permutations to check when n > 6");
  r->add_option("--basis-cache", rt.basis_cache, "basis cache file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c) return run_calibrate(cal);
    if (*s) return run_synthetic_cmd(syn);
    if (*t) return run_track_cmd(trk);
    if (*r) return run_roundtrip_check(rt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
