// psdcert: certify nonclassical collective-magnetization states from
// photon-counting records.
//
// Subcommands: simulate, reconstruct, moments, certify, sweep, emit-plot.
// Every knob is settable from a config file (--config, or env PSDCERT_CONFIG)
// and from dotted flags mirroring the config keys; flags win.  Exit codes:
// 0 success (certify: classical-consistent), 10 nonclassical verdict,
// 2 any error.  Exit codes are the machine contract; text may change.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psdcert/channel.hpp"
#include "psdcert/core.hpp"
#include "psdcert/criterion.hpp"
#include "psdcert/io.hpp"
#include "psdcert/moments.hpp"
#include "psdcert/pipeline.hpp"
#include "psdcert/reconstruct.hpp"
#include "psdcert/rng.hpp"
#include "psdcert/synthetic.hpp"

namespace {

using namespace psdcert;

constexpr int kExitOk = 0;
constexpr int kExitError = 2;
constexpr int kExitNonclassical = 10;

struct CliState {
  PipelineConfig config;
  std::string weighting = "by_count";
  std::string route = "factorial";
  int exit_code = kExitOk;

  PipelineConfig resolved() const {
    PipelineConfig c = config;
    c.weighting = (weighting == "equal_angle") ? PoolWeighting::equal_angle
                                               : PoolWeighting::by_count;
    c.route = parse_moment_route(route);
    c.validate();
    return c;
  }
};

std::vector<PulseRecord> load_records(const std::string& path) {
  return io::parse_records(io::read_file(path), path);
}

std::string config_snapshot(const PipelineConfig& c) {
  std::ostringstream angles;
  for (std::size_t i = 0; i < c.angles.size(); ++i)
    angles << (i ? "," : "") << io::detail::fmt(c.angles[i]);
  return io::format_meta({
      {"detection.q", io::detail::fmt(c.detection.q)},
      {"detection.n_in", io::detail::fmt(c.detection.n_in)},
      {"detection.phi", io::detail::fmt(c.detection.phi)},
      {"detection.lambda", io::detail::fmt(c.detection.lambda())},
      {"angles", angles.str()},
      {"pool.weighting",
       c.weighting == PoolWeighting::equal_angle ? "equal_angle" : "by_count"},
      {"route", to_string(c.route)},
      {"deconvolution.grid_half_width",
       io::detail::fmt(c.resolved_deconvolution().grid_half_width)},
      {"deconvolution.grid_points", std::to_string(c.resolved_deconvolution().grid_points)},
      {"deconvolution.regularization",
       io::detail::fmt(c.resolved_deconvolution().regularization)},
      {"deconvolution.frequency_cutoff",
       io::detail::fmt(c.resolved_deconvolution().frequency_cutoff)},
      {"deconvolution.normalization_bound",
       io::detail::fmt(c.resolved_deconvolution().normalization_bound)},
      {"pilot.sigma_sq", io::detail::fmt(c.sigma_sq_pilot)},
      {"moments.tail_tol", io::detail::fmt(c.tail_tol)},
      {"sweep.n_cutoff_max", std::to_string(c.n_cutoff_max)},
      {"sweep.z", io::detail::fmt(c.z)},
      {"bootstrap.replicates", std::to_string(c.replicates)},
      {"bootstrap.seed", std::to_string(c.seed)},
  });
}

double cfg_double(const std::string& value, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(what + ": cannot parse number from '" + value + "'");
  }
}

long long cfg_int(const std::string& value, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(what + ": cannot parse integer from '" + value + "'");
  }
}

/// Applies a key = value config document to the run state.  Keys mirror the
/// dotted flag paths one to one, so a report's config.txt replays as-is;
/// detection.lambda is derived and therefore ignored on input.
void apply_config_file(CliState& cli, const std::string& path) {
  const auto entries = io::parse_meta(io::read_file(path));
  for (const auto& [key, value] : entries) {
    const std::string what = path + ": " + key;
    if (key == "detection.q") {
      cli.config.detection.q = cfg_double(value, what);
    } else if (key == "detection.n_in") {
      cli.config.detection.n_in = cfg_double(value, what);
    } else if (key == "detection.phi") {
      cli.config.detection.phi = cfg_double(value, what);
    } else if (key == "detection.lambda") {
      // derived from q, n_in, phi
    } else if (key == "angles") {
      std::vector<double> angles;
      for (const std::string& field : io::detail::split_fields(value))
        angles.push_back(cfg_double(field, what));
      cli.config.angles = std::move(angles);
    } else if (key == "pool.weighting") {
      if (value != "by_count" && value != "equal_angle")
        throw std::runtime_error(what + ": expected by_count or equal_angle, got '" + value +
                                 "'");
      cli.weighting = value;
    } else if (key == "route") {
      parse_moment_route(value);
      cli.route = value;
    } else if (key == "deconvolution.grid_half_width") {
      cli.config.deconvolution.grid_half_width = cfg_double(value, what);
    } else if (key == "deconvolution.grid_points") {
      cli.config.deconvolution.grid_points =
          static_cast<std::size_t>(cfg_int(value, what));
    } else if (key == "deconvolution.regularization") {
      cli.config.deconvolution.regularization = cfg_double(value, what);
    } else if (key == "deconvolution.frequency_cutoff") {
      cli.config.deconvolution.frequency_cutoff = cfg_double(value, what);
    } else if (key == "deconvolution.normalization_bound") {
      cli.config.deconvolution.normalization_bound = cfg_double(value, what);
    } else if (key == "pilot.sigma_sq") {
      cli.config.sigma_sq_pilot = cfg_double(value, what);
    } else if (key == "moments.tail_tol") {
      cli.config.tail_tol = cfg_double(value, what);
    } else if (key == "sweep.n_cutoff_max") {
      cli.config.n_cutoff_max = static_cast<int>(cfg_int(value, what));
    } else if (key == "sweep.z") {
      cli.config.z = cfg_double(value, what);
    } else if (key == "bootstrap.replicates") {
      cli.config.replicates = static_cast<int>(cfg_int(value, what));
    } else if (key == "bootstrap.seed") {
      const long long seed = cfg_int(value, what);
      if (seed < 0) throw std::runtime_error(what + ": seed must be non-negative");
      cli.config.seed = static_cast<std::uint64_t>(seed);
    } else {
      throw std::runtime_error(path + ": unknown config key '" + key + "'");
    }
  }
}

/// The config file is applied before flag parsing so that flags always win;
/// the last --config on the command line takes effect, the env variable is
/// the fallback.
std::string config_path_from(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      path = argv[++i];
    else if (arg.rfind("--config=", 0) == 0)
      path = arg.substr(9);
  }
  if (path.empty())
    if (const char* env = std::getenv("PSDCERT_CONFIG")) path = env;
  return path;
}

// --------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string state_spec;
  std::int64_t pulses = 0;
  std::string out;
  std::uint64_t seed = 1;
  bool via_histogram = false;
  std::int64_t n_max = 0;  ///< 0 = auto (via-histogram path only)
};

std::vector<PulseRecord> simulate_via_histogram(const SyntheticState& state,
                                                const PipelineConfig& cfg,
                                                const SimulateArgs& args) {
  // rotational symmetry makes every angle's count law equal the pooled law
  std::int64_t n_max = args.n_max;
  if (n_max <= 0) {
    const double m2 = exact_axis_moments(state, 1).values[0];
    n_max = default_n_max(cfg.detection, std::max(m2, 1.0), 1e-9) + 32;
  }
  PooledHistogram law{};
  for (int attempt = 0;; ++attempt) {
    try {
      law = exact_pooled_histogram(state, cfg.detection, n_max, 1e-9);
      break;
    } catch (const std::runtime_error&) {
      if (args.n_max > 0 || attempt >= 6) throw;
      n_max *= 2;
    }
  }
  std::vector<double> cdf(law.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < law.probs.size(); ++i) {
    acc += law.probs[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;

  RngStream master(args.seed);
  std::vector<PulseRecord> records;
  records.reserve(cfg.angles.size() * static_cast<std::size_t>(args.pulses));
  for (std::size_t a = 0; a < cfg.angles.size(); ++a) {
    RngStream angle_stream = master.substream(a);
    for (std::int64_t i = 0; i < args.pulses; ++i) {
      RngStream s = angle_stream.substream(static_cast<std::uint64_t>(i));
      const double u = s.next_uniform();
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      records.push_back(
          PulseRecord{cfg.angles[a], static_cast<std::int64_t>(it - cdf.begin())});
    }
  }
  return records;
}

int run_simulate(const CliState& cli, const SimulateArgs& args) {
  const PipelineConfig cfg = cli.resolved();
  const SyntheticState state = parse_state_spec(args.state_spec);
  std::vector<PulseRecord> records;
  if (args.via_histogram) {
    records = simulate_via_histogram(state, cfg, args);
  } else if (state.sampleable()) {
    records = simulate_experiment(state, cfg.angles, args.pulses, cfg.detection, args.seed);
  } else {
    throw std::runtime_error(
        "state '" + args.state_spec +
        "' has a negative planar quasi-density and no record-level sampler; rerun with "
        "--via-histogram to draw counts from its exact pooled count distribution");
  }
  const std::string content = io::format_records(records);
  io::write_file(args.out, content);
  std::cout << "seed = " << args.seed << "\n"
            << "records = " << records.size() << "\n"
            << "digest = " << io::digest_hex(content) << "\n"
            << "out = " << args.out << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------------
// reconstruct

struct ReconstructArgs {
  std::string records_path;
  std::string out_marginal = "marginal.csv";
  std::string out_roundtrip = "roundtrip.csv";
};

int run_reconstruct(const CliState& cli, const ReconstructArgs& args) {
  const PipelineConfig cfg = cli.resolved();
  const std::vector<PulseRecord> records = load_records(args.records_path);
  const PooledHistogram pooled =
      pool_angles(validate_records(records, cfg.angles), cfg.weighting);
  const DeconvolutionSettings settings = cfg.resolved_deconvolution();
  const auto [marginal, prediction] = reconstruct_marginal(pooled, cfg.detection, settings);

  io::write_marginal_with_meta(args.out_marginal, marginal, cfg.detection, settings);
  std::ostringstream rt;
  rt << "n,g_input,g_predicted\n";
  for (std::size_t n = 0; n < pooled.probs.size(); ++n)
    rt << n << "," << io::detail::fmt(pooled.probs[n]) << ","
       << io::detail::fmt(n < prediction.probs.size() ? prediction.probs[n] : 0.0) << "\n";
  io::write_file(args.out_roundtrip, rt.str());

  double tv = 0.0;
  for (std::size_t n = 0; n < pooled.probs.size(); ++n)
    tv += std::abs(pooled.probs[n] -
                   (n < prediction.probs.size() ? prediction.probs[n] : 0.0));
  tv = 0.5 * (tv + prediction.truncation_mass);
  std::cout << "normalization = " << io::detail::fmt(marginal.normalization) << "\n"
            << "roundtrip_tv = " << io::detail::fmt(tv) << "\n"
            << "marginal = " << args.out_marginal << "\n"
            << "roundtrip = " << args.out_roundtrip << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------------
// moments

struct MomentsArgs {
  std::string records_path;
  std::string state_spec;
  int k_max = 8;
  std::string out_dir;
};

void write_moments_file(const std::string& dir, const std::string& name,
                        const std::string& body, const std::string& route) {
  const std::string path = (std::filesystem::path(dir) / name).string();
  io::write_file(path, body);
  io::write_file(io::meta_path_for(path), io::format_meta({{"route", route}}));
}

int run_moments(const CliState& cli, const MomentsArgs& args) {
  const PipelineConfig cfg = cli.resolved();
  if (args.records_path.empty() == args.state_spec.empty())
    throw std::runtime_error("moments: pass exactly one of --records and --state");
  if (args.k_max < 1) throw std::runtime_error("moments: k-max must be >= 1");

  if (!args.state_spec.empty()) {
    const SyntheticState state = parse_state_spec(args.state_spec);
    const AxisMoments axis = exact_axis_moments(state, args.k_max);
    const RadialMoments radial = radial_from_axis(axis);
    std::cout << "k,axis_exact,radial_exact\n";
    for (int k = 1; k <= args.k_max; ++k)
      std::cout << k << "," << io::detail::fmt(axis.values[static_cast<std::size_t>(k - 1)])
                << "," << io::detail::fmt(radial.values[static_cast<std::size_t>(k - 1)])
                << "\n";
    if (!args.out_dir.empty()) {
      std::filesystem::create_directories(args.out_dir);
      write_moments_file(args.out_dir, "axis_exact.csv", io::format_moments(axis), axis.route);
      write_moments_file(args.out_dir, "radial_exact.csv", io::format_moments(radial),
                         radial.route);
    }
    return kExitOk;
  }

  const std::vector<PulseRecord> records = load_records(args.records_path);
  const PooledHistogram pooled =
      pool_angles(validate_records(records, cfg.angles), cfg.weighting);

  const AxisMoments axis_f = axis_moments_factorial(pooled, cfg.detection, args.k_max);
  const RadialMoments radial_f = radial_from_axis(axis_f);

  // the regularized route is reported best-effort alongside the unbiased one
  std::optional<AxisMoments> axis_d;
  std::optional<RadialMoments> radial_d;
  std::string deconv_note;
  try {
    const DeconvolutionSettings settings = cfg.resolved_deconvolution();
    const MarginalDistribution marginal =
        deconvolve(g_to_G(pooled, cfg.detection, settings.make_grid()), settings);
    axis_d = axis_moments_from_marginal(marginal, args.k_max, cfg.tail_tol);
    radial_d = radial_from_axis(*axis_d);
  } catch (const std::exception& e) {
    deconv_note = e.what();
  }

  std::cout << "k,axis_factorial,axis_deconvolution,radial_factorial,radial_deconvolution\n";
  for (int k = 1; k <= args.k_max; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    std::cout << k << "," << io::detail::fmt(axis_f.values[i]) << ",";
    if (axis_d) std::cout << io::detail::fmt(axis_d->values[i]);
    std::cout << "," << io::detail::fmt(radial_f.values[i]) << ",";
    if (radial_d) std::cout << io::detail::fmt(radial_d->values[i]);
    std::cout << "\n";
  }
  if (!deconv_note.empty())
    std::cout << "# deconvolution route unavailable: " << deconv_note << "\n";

  if (!args.out_dir.empty()) {
    std::filesystem::create_directories(args.out_dir);
    write_moments_file(args.out_dir, "axis_factorial.csv", io::format_moments(axis_f),
                       axis_f.route);
    write_moments_file(args.out_dir, "radial_factorial.csv", io::format_moments(radial_f),
                       radial_f.route);
    if (axis_d) {
      write_moments_file(args.out_dir, "axis_deconvolution.csv", io::format_moments(*axis_d),
                         axis_d->route);
      write_moments_file(args.out_dir, "radial_deconvolution.csv",
                         io::format_moments(*radial_d), radial_d->route);
    }
  }
  return kExitOk;
}

// --------------------------------------------------------------------------
// certify

struct CertifyArgs {
  std::string records_path;
  std::string report_base = "reports";
};

int run_certify(const CliState& cli, const CertifyArgs& args) {
  const PipelineConfig cfg = cli.resolved();
  const std::string content = io::read_file(args.records_path);
  const std::vector<PulseRecord> records = io::parse_records(content, args.records_path);

  const SweepResult sweep = bootstrap_sweep(records, cfg, cfg.replicates, cfg.seed);

  const std::string dir = io::next_report_dir(args.report_base);
  io::write_file((std::filesystem::path(dir) / "config.txt").string(), config_snapshot(cfg));
  io::write_file((std::filesystem::path(dir) / "inputs.txt").string(),
                 io::format_meta({{"records", args.records_path},
                                  {"records_digest", io::digest_hex(content)},
                                  {"records_count", std::to_string(records.size())}}));
  io::write_file((std::filesystem::path(dir) / "sweep.csv").string(), io::format_sweep(sweep));

  // full-data moments by both routes, best effort for the regularized one
  const PooledHistogram pooled =
      pool_angles(validate_records(records, cfg.angles), cfg.weighting);
  const AxisMoments axis_f = axis_moments_factorial(pooled, cfg.detection, cfg.n_cutoff_max);
  write_moments_file(dir, "axis_factorial.csv", io::format_moments(axis_f), axis_f.route);
  write_moments_file(dir, "radial_factorial.csv", io::format_moments(radial_from_axis(axis_f)),
                     "factorial");
  try {
    const DeconvolutionSettings settings = cfg.resolved_deconvolution();
    const MarginalDistribution marginal =
        deconvolve(g_to_G(pooled, cfg.detection, settings.make_grid()), settings);
    const AxisMoments axis_d =
        axis_moments_from_marginal(marginal, cfg.n_cutoff_max, cfg.tail_tol);
    write_moments_file(dir, "axis_deconvolution.csv", io::format_moments(axis_d), axis_d.route);
    write_moments_file(dir, "radial_deconvolution.csv",
                       io::format_moments(radial_from_axis(axis_d)), "deconvolution");
  } catch (const std::exception& e) {
    io::write_file((std::filesystem::path(dir) / "deconvolution_route.txt").string(),
                   std::string("unavailable: ") + e.what() + "\n");
  }

  std::cout << "report = " << dir << "\n"
            << "plateau = " << io::detail::fmt(sweep.plateau) << " +/- "
            << io::detail::fmt(sweep.plateau_std) << " (N_c = "
            << sweep.entries.back().n_cutoff << ")\n"
            << "verdict = " << to_string(sweep.verdict) << "\n";
  return sweep.verdict == Verdict::nonclassical ? kExitNonclassical : kExitOk;
}

// --------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string moments_path;
  std::string state_spec;
  std::string out;
};

int run_sweep(const CliState& cli, const SweepArgs& args) {
  const PipelineConfig cfg = cli.resolved();
  if (args.moments_path.empty() == args.state_spec.empty())
    throw std::runtime_error("sweep: pass exactly one of --moments and --state");
  RadialMoments radial;
  if (!args.state_spec.empty()) {
    const SyntheticState state = parse_state_spec(args.state_spec);
    radial = radial_from_axis(exact_axis_moments(state, cfg.n_cutoff_max));
  } else {
    radial = RadialMoments::from_values(
        io::parse_moment_values(io::read_file(args.moments_path), args.moments_path), "file");
    // the squared trial polynomial of degree N_c needs radial orders k <= N_c
    if (radial.k_max < cfg.n_cutoff_max)
      throw std::runtime_error("sweep: moments file reaches k = " +
                               std::to_string(radial.k_max) + " but sweep.n_cutoff_max = " +
                               std::to_string(cfg.n_cutoff_max) + " needs k <= " +
                               std::to_string(cfg.n_cutoff_max));
  }
  const SweepResult sweep = sweep_cutoff(radial, cfg.n_cutoff_max, cfg.z);
  const std::string body = io::format_sweep(sweep);
  std::cout << body;
  if (!args.out.empty()) io::write_file(args.out, body);
  return kExitOk;
}

// --------------------------------------------------------------------------
// emit-plot

struct EmitPlotArgs {
  std::string input;
  std::string out;
  std::string pm_out;  ///< optional P(M) display transform (marginal inputs)
};

int run_emit_plot(const EmitPlotArgs& args) {
  const std::string content = io::read_file(args.input);
  std::istringstream in(content);
  std::string first;
  while (std::getline(in, first)) {
    const std::string t = io::detail::trim(first);
    if (!t.empty() && t[0] != '#') {
      first = t;
      break;
    }
  }
  const std::vector<std::string> head = io::detail::split_fields(first);

  if (head.size() >= 3 && head[0] == "N_c" && head[1] == "f_mean") {
    std::ostringstream os;
    os << "N_c,f_mean,std\n";
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = io::detail::trim(line);
      if (t.empty() || t[0] == '#') break;  // summary block ends the table
      const std::vector<std::string> f = io::detail::split_fields(t);
      if (f.size() < 3) throw std::runtime_error("emit-plot: malformed sweep row: " + t);
      os << f[0] << "," << f[1] << "," << f[2] << "\n";
    }
    io::write_file(args.out, os.str());
    std::cout << "wrote " << args.out << " (sweep series)\n";
    return kExitOk;
  }

  if (head.size() >= 2 && head[0] == "M_sq" && head[1] == "density") {
    const MarginalDistribution marginal = io::parse_marginal(content, args.input);
    std::ostringstream os;
    os << "M_sq,density\n";
    for (std::size_t i = 0; i < marginal.grid.size(); ++i)
      os << io::detail::fmt(marginal.grid[i]) << "," << io::detail::fmt(marginal.density[i])
         << "\n";
    io::write_file(args.out, os.str());
    std::cout << "wrote " << args.out << " (marginal series)\n";
    if (!args.pm_out.empty()) {
      // symmetric display law P(M) = |M| F(M^2), normalized assuming <M> = 0
      std::ostringstream pm;
      pm << "M,P\n";
      for (std::size_t i = marginal.grid.size(); i-- > 1;) {
        const double m = std::sqrt(marginal.grid[i]);
        pm << io::detail::fmt(-m) << "," << io::detail::fmt(m * marginal.density[i]) << "\n";
      }
      for (std::size_t i = 0; i < marginal.grid.size(); ++i) {
        const double m = std::sqrt(marginal.grid[i]);
        pm << io::detail::fmt(m) << "," << io::detail::fmt(m * marginal.density[i]) << "\n";
      }
      io::write_file(args.pm_out, pm.str());
      std::cout << "wrote " << args.pm_out << " (P(M) display transform)\n";
    }
    return kExitOk;
  }

  throw std::runtime_error("emit-plot: unknown input schema (header '" + first +
                           "'); expected a sweep or marginal file");
}

}  // namespace

int main(int argc, char** argv) {
  CliState cli;
  try {
    const std::string config_path = config_path_from(argc, argv);
    if (!config_path.empty()) apply_config_file(cli, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  CLI::App app{"photon-counting nonclassicality certification"};
  app.require_subcommand(1);
  std::string config_path_display;
  app.add_option("--config", config_path_display,
                 "config file (key = value; dotted keys mirror these flags; env "
                 "PSDCERT_CONFIG is the fallback; flags win)");

  app.add_option("--detection.q", cli.config.detection.q, "detector quantum efficiency")
      ->capture_default_str();
  app.add_option("--detection.n_in", cli.config.detection.n_in, "input photons per pulse")
      ->capture_default_str();
  app.add_option("--detection.phi", cli.config.detection.phi,
                 "rotation angle per unit magnetization (rad)")
      ->capture_default_str();
  app.add_option("--angles", cli.config.angles, "analysis angles (rad)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--pool.weighting", cli.weighting, "angle pooling weight")
      ->check(CLI::IsMember({"by_count", "equal_angle"}))
      ->capture_default_str();
  app.add_option("--route", cli.route, "moment route feeding the criterion")
      ->check(CLI::IsMember({"factorial", "deconvolution"}))
      ->capture_default_str();
  app.add_option("--deconvolution.grid_half_width", cli.config.deconvolution.grid_half_width,
                 "magnetization grid half width (0 = auto from pilot)")
      ->capture_default_str();
  app.add_option("--deconvolution.grid_points", cli.config.deconvolution.grid_points,
                 "grid points (power of two)")
      ->capture_default_str();
  app.add_option("--deconvolution.regularization", cli.config.deconvolution.regularization,
                 "Wiener floor epsilon")
      ->capture_default_str();
  app.add_option("--deconvolution.frequency_cutoff", cli.config.deconvolution.frequency_cutoff,
                 "hard frequency cutoff (0 = off)")
      ->capture_default_str();
  app.add_option("--deconvolution.normalization_bound",
                 cli.config.deconvolution.normalization_bound,
                 "max tolerated |normalization - 1|")
      ->capture_default_str();
  app.add_option("--pilot.sigma_sq", cli.config.sigma_sq_pilot,
                 "pilot <M^2> scale for automatic grids")
      ->capture_default_str();
  app.add_option("--moments.tail_tol", cli.config.tail_tol,
                 "marginal-route moment tail tolerance")
      ->capture_default_str();
  app.add_option("--sweep.n_cutoff_max", cli.config.n_cutoff_max, "largest cutoff order N_c")
      ->capture_default_str();
  app.add_option("--sweep.z", cli.config.z, "verdict z-threshold")->capture_default_str();
  app.add_option("--bootstrap.replicates", cli.config.replicates, "bootstrap replicates")
      ->capture_default_str();
  app.add_option("--bootstrap.seed", cli.config.seed, "bootstrap seed")->capture_default_str();

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "draw synthetic pulse records");
  c_sim->fallthrough();
  c_sim->add_option("--state", sim.state_spec, "state spec, e.g. gaussian(sigma2=1500)")
      ->required();
  c_sim->add_option("--pulses", sim.pulses, "pulses per angle")->required();
  c_sim->add_option("--out", sim.out, "output record file")->required();
  c_sim->add_option("--seed", sim.seed, "simulation seed")->capture_default_str();
  c_sim->add_flag("--via-histogram", sim.via_histogram,
                  "draw counts from the exact pooled count distribution (required for "
                  "nonclassical states)");
  c_sim->add_option("--n-max", sim.n_max, "count truncation for --via-histogram (0 = auto)")
      ->capture_default_str();
  c_sim->callback([&] { cli.exit_code = run_simulate(cli, sim); });

  ReconstructArgs rec;
  CLI::App* c_rec = app.add_subcommand("reconstruct", "reconstruct the marginal distribution");
  c_rec->fallthrough();
  c_rec->add_option("records", rec.records_path, "record or histogram file")->required();
  c_rec->add_option("--out-marginal", rec.out_marginal, "marginal output file")
      ->capture_default_str();
  c_rec->add_option("--out-roundtrip", rec.out_roundtrip, "round-trip histogram output file")
      ->capture_default_str();
  c_rec->callback([&] { cli.exit_code = run_reconstruct(cli, rec); });

  MomentsArgs mom;
  CLI::App* c_mom = app.add_subcommand("moments", "even moments by both routes");
  c_mom->fallthrough();
  c_mom->add_option("--records", mom.records_path, "record or histogram file");
  c_mom->add_option("--state", mom.state_spec, "state spec for exact moments");
  c_mom->add_option("--k-max", mom.k_max, "highest moment order")->capture_default_str();
  c_mom->add_option("--out-dir", mom.out_dir, "directory for moment files");
  c_mom->callback([&] { cli.exit_code = run_moments(cli, mom); });

  CertifyArgs cert;
  CLI::App* c_cert = app.add_subcommand("certify", "bootstrap sweep and verdict");
  c_cert->fallthrough();
  c_cert->add_option("records", cert.records_path, "record or histogram file")->required();
  c_cert->add_option("--report-dir", cert.report_base, "append-only report base directory")
      ->capture_default_str();
  c_cert->callback([&] { cli.exit_code = run_certify(cli, cert); });

  SweepArgs swp;
  CLI::App* c_swp = app.add_subcommand("sweep", "cutoff sweep from moments");
  c_swp->fallthrough();
  c_swp->add_option("--moments", swp.moments_path, "radial moments file (k,value)");
  c_swp->add_option("--state", swp.state_spec, "state spec for exact moments");
  c_swp->add_option("--out", swp.out, "sweep output file");
  c_swp->callback([&] { cli.exit_code = run_sweep(cli, swp); });

  EmitPlotArgs plot;
  CLI::App* c_plot = app.add_subcommand("emit-plot", "plain plot columns from a result file");
  c_plot->fallthrough();
  c_plot->add_option("input", plot.input, "sweep or marginal file")->required();
  c_plot->add_option("out", plot.out, "output file")->required();
  c_plot->add_option("--pm-out", plot.pm_out, "also write the P(M) display transform here");
  c_plot->callback([&] { cli.exit_code = run_emit_plot(plot); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return cli.exit_code;
}
