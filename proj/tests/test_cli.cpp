// End-to-end tests of the psdcert command-line tool, driven as a subprocess.
// Each case works in a fresh scratch directory; produced files are parsed
// back with the library's own readers so the formats round-trip.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <psdcert/io.hpp>

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
  if (const char* env = std::getenv("PSDCERT_BIN")) return env;
  return PSDCERT_BIN_PATH;
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Fresh working directory per case; commands run inside it through /bin/sh
/// so the test can use relative paths and environment prefixes.
struct Scratch {
  fs::path dir;

  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() /
          ("psdcert_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }

  CmdResult run(const std::string& args, const std::string& env_prefix = "") const {
    const fs::path out = dir / "_stdout";
    const fs::path err = dir / "_stderr";
    const std::string cmd = "cd '" + dir.string() + "' && " + env_prefix + "'" + binary_path() +
                            "' " + args + " > _stdout 2> _stderr";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string read(const std::string& rel) const { return slurp(dir / rel); }
  bool exists(const std::string& rel) const { return fs::exists(dir / rel); }

  void write(const std::string& rel, const std::string& content) const {
    std::ofstream f(dir / rel, std::ios::binary);
    f << content;
  }
};

/// Value of a "key = value" line printed on stdout.
std::string stdout_field(const std::string& out, const std::string& key) {
  const auto meta = psdcert::io::parse_meta(out);
  const auto it = meta.find(key);
  return it == meta.end() ? std::string{} : it->second;
}

/// Rows between the header and the first comment line (a sweep's summary
/// block starts with "# summary").
int data_rows(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  int rows = 0;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') break;
    if (header) {
      header = false;
      continue;
    }
    ++rows;
  }
  return rows;
}

}  // namespace

TEST_CASE("simulate writes the record format deterministically") {
  Scratch s;
  const auto r1 = s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 100 --out g.csv "
                        "--seed 5");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(s.exists("g.csv"));

  const std::string content = s.read("g.csv");
  CHECK(content.rfind("beta_rad,n", 0) == 0);
  CHECK(data_rows(content) == 400);

  const auto records = psdcert::io::parse_records(content, "g.csv");
  REQUIRE(records.size() == 400);

  CHECK(stdout_field(r1.out, "records") == "400");
  CHECK(stdout_field(r1.out, "seed") == "5");
  const std::string digest = stdout_field(r1.out, "digest");
  CHECK(digest.size() == 16);

  const auto r2 = s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 100 --out g2.csv "
                        "--seed 5");
  REQUIRE(r2.exit_code == 0);
  CHECK(stdout_field(r2.out, "digest") == digest);
  CHECK(s.read("g2.csv") == content);

  const auto r3 = s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 100 --out g3.csv "
                        "--seed 6");
  REQUIRE(r3.exit_code == 0);
  CHECK(stdout_field(r3.out, "digest") != digest);
}

TEST_CASE("simulate refuses non-sampleable states without the histogram path") {
  Scratch s;
  const auto fail =
      s.run("simulate --state 'single_excitation(m2=1500)' --pulses 10 --out se.csv --seed 1");
  CHECK(fail.exit_code == 2);
  CHECK(fail.err.find("--via-histogram") != std::string::npos);
  CHECK_FALSE(s.exists("se.csv"));

  const auto ok = s.run("simulate --state 'single_excitation(m2=1500)' --pulses 200 "
                        "--out se.csv --seed 1 --via-histogram");
  REQUIRE(ok.exit_code == 0);
  const auto again = s.run("simulate --state 'single_excitation(m2=1500)' --pulses 200 "
                           "--out se2.csv --seed 1 --via-histogram");
  REQUIRE(again.exit_code == 0);
  CHECK(stdout_field(ok.out, "digest") == stdout_field(again.out, "digest"));
  CHECK(psdcert::io::parse_records(s.read("se.csv"), "se.csv").size() == 800);
}

TEST_CASE("certify separates classical from nonclassical data by exit code") {
  Scratch s;
  REQUIRE(s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 2500 --out g.csv --seed 11")
              .exit_code == 0);
  const auto sim = s.run("simulate --state 'single_excitation(m2=1500)' --pulses 25000 "
                         "--out se.csv --seed 3 --via-histogram");
  REQUIRE(sim.exit_code == 0);

  const auto classical = s.run("certify g.csv --sweep.n_cutoff_max 8 --bootstrap.seed 2");
  CHECK(classical.exit_code == 0);
  REQUIRE(s.exists("reports/run-0000/sweep.csv"));
  REQUIRE(s.exists("reports/run-0000/config.txt"));
  REQUIRE(s.exists("reports/run-0000/inputs.txt"));
  CHECK(s.read("reports/run-0000/sweep.csv").find("verdict = classical-consistent") !=
        std::string::npos);

  const auto nonclassical = s.run("certify se.csv --sweep.n_cutoff_max 8 --bootstrap.seed 2");
  CHECK(nonclassical.exit_code == 10);
  CHECK(nonclassical.out.find("plateau") != std::string::npos);
  CHECK(nonclassical.out.find("verdict = nonclassical") != std::string::npos);

  // reports append, never overwrite
  REQUIRE(s.exists("reports/run-0001/sweep.csv"));
  CHECK(s.read("reports/run-0001/sweep.csv").find("verdict = nonclassical") !=
        std::string::npos);

  // the report records the input digest printed by simulate
  const auto inputs = psdcert::io::parse_meta(s.read("reports/run-0001/inputs.txt"));
  CHECK(inputs.at("records_digest") == stdout_field(sim.out, "digest"));
  CHECK(inputs.at("records_count") == "100000");

  // both moment routes are written alongside the sweep
  CHECK(s.exists("reports/run-0001/radial_factorial.csv"));
  CHECK(s.exists("reports/run-0001/radial_deconvolution.csv"));

  // determinism: identical input and config reproduce the sweep byte for byte
  const auto repeat = s.run("certify se.csv --sweep.n_cutoff_max 8 --bootstrap.seed 2");
  CHECK(repeat.exit_code == 10);
  CHECK(s.read("reports/run-0002/sweep.csv") == s.read("reports/run-0001/sweep.csv"));

  CHECK(s.run("certify missing.csv").exit_code == 2);
}

TEST_CASE("reconstruct writes the marginal, its sidecar, and the round trip") {
  Scratch s;
  REQUIRE(s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 5000 --out g.csv --seed 11")
              .exit_code == 0);
  const auto r = s.run("reconstruct g.csv --out-marginal m.csv --out-roundtrip rt.csv");
  REQUIRE(r.exit_code == 0);

  const auto marginal = psdcert::io::parse_marginal(s.read("m.csv"), "m.csv");
  CHECK(marginal.grid.size() == 2048);

  const auto meta = psdcert::io::parse_meta(s.read("m.csv.meta"));
  CHECK(meta.at("schema") == "marginal");
  CHECK(std::stod(meta.at("lambda")) == Catch::Approx(8.64e-3));
  const double normalization = std::stod(meta.at("normalization"));
  CHECK(std::abs(normalization - 1.0) < 0.2);

  const std::string rt = s.read("rt.csv");
  CHECK(rt.rfind("n,g_input,g_predicted", 0) == 0);
  CHECK(data_rows(rt) > 10);
  CHECK(stdout_field(r.out, "roundtrip_tv") != "");

  CHECK(s.run("reconstruct g.csv --deconvolution.regularization -1").exit_code == 2);
}

TEST_CASE("moments prints exact tables and writes per-route files") {
  Scratch s;
  const auto exact = s.run("moments --state 'gaussian(sigma2=1500)' --k-max 2");
  REQUIRE(exact.exit_code == 0);
  std::istringstream lines(exact.out);
  std::string header, k1, k2;
  std::getline(lines, header);
  std::getline(lines, k1);
  std::getline(lines, k2);
  CHECK(header == "k,axis_exact,radial_exact");
  CHECK(k1 == "1,1500,3000");
  CHECK(k2.rfind("2,6750000,18000000", 0) == 0);

  REQUIRE(s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 2500 --out g.csv --seed 7")
              .exit_code == 0);
  const auto sampled = s.run("moments --records g.csv --k-max 2 --out-dir out");
  REQUIRE(sampled.exit_code == 0);
  for (const std::string route : {"factorial", "deconvolution"}) {
    for (const std::string kind : {"axis_", "radial_"}) {
      const std::string base = "out/" + kind + route + ".csv";
      REQUIRE(s.exists(base));
      const auto values = psdcert::io::parse_moment_values(s.read(base), base);
      REQUIRE(values.size() == 2);
      CHECK(psdcert::io::parse_meta(s.read(base + ".meta")).at("route") == route);
    }
  }
  const auto factorial =
      psdcert::io::parse_moment_values(s.read("out/radial_factorial.csv"), "f");
  CHECK(factorial[0] == Catch::Approx(3000.0).epsilon(0.10));

  CHECK(s.run("moments").exit_code == 2);
  CHECK(s.run("moments --records g.csv --state 'gaussian(sigma2=1)'").exit_code == 2);
}

TEST_CASE("sweep reproduces the Gaussian curve and reads moment files") {
  Scratch s;
  const auto exact = s.run("sweep --state 'gaussian(sigma2=1600)' --sweep.n_cutoff_max 8");
  REQUIRE(exact.exit_code == 0);
  std::istringstream lines(exact.out);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "N_c,f_mean,std,condition");
  for (int n_c = 2; n_c <= 8; n_c += 2) {
    REQUIRE(std::getline(lines, line));
    const auto fields = psdcert::io::detail::split_fields(line);
    REQUIRE(fields.size() == 4);
    CHECK(std::stod(fields[0]) == n_c);
    CHECK(std::stod(fields[1]) == Catch::Approx(2.0 / (n_c + 2)).epsilon(1e-9));
    CHECK(std::stod(fields[2]) == 0.0);
  }
  CHECK(exact.out.find("verdict = classical-consistent") != std::string::npos);

  REQUIRE(s.run("moments --state 'single_excitation(m2=1500)' --k-max 3 --out-dir se")
              .exit_code == 0);
  const auto from_file = s.run("sweep --moments se/radial_exact.csv --sweep.n_cutoff_max 6 "
                               "--out sw.csv");
  REQUIRE(from_file.exit_code == 0);
  CHECK(from_file.out.find("verdict = nonclassical") != std::string::npos);
  CHECK(s.read("sw.csv") == from_file.out);

  // file holds k <= 3 but the sweep needs k <= 4
  const auto short_file = s.run("sweep --moments se/radial_exact.csv --sweep.n_cutoff_max 8");
  CHECK(short_file.exit_code == 2);
  CHECK(short_file.err.find("k") != std::string::npos);
}

TEST_CASE("emit-plot lifts result files to plain plot columns") {
  Scratch s;
  REQUIRE(s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 2500 --out g.csv --seed 7")
              .exit_code == 0);
  REQUIRE(s.run("certify g.csv --sweep.n_cutoff_max 6 --bootstrap.seed 1").exit_code == 0);
  REQUIRE(s.run("reconstruct g.csv --out-marginal m.csv --out-roundtrip rt.csv").exit_code ==
          0);

  REQUIRE(s.run("emit-plot reports/run-0000/sweep.csv sweep_plot.csv").exit_code == 0);
  const std::string sweep_plot = s.read("sweep_plot.csv");
  CHECK(sweep_plot.rfind("N_c,f_mean,std", 0) == 0);
  CHECK(data_rows(sweep_plot) == 3);

  REQUIRE(s.run("emit-plot m.csv marginal_plot.csv --pm-out pm.csv").exit_code == 0);
  CHECK(s.read("marginal_plot.csv").rfind("M_sq,density", 0) == 0);
  const std::string pm = s.read("pm.csv");
  CHECK(pm.rfind("M,P", 0) == 0);
  CHECK(data_rows(pm) == 2 * 2048 - 1);

  s.write("junk.csv", "a,b\n1,2\n");
  const auto junk = s.run("emit-plot junk.csv out.csv");
  CHECK(junk.exit_code == 2);
  CHECK(junk.err.find("schema") != std::string::npos);
}

TEST_CASE("config file, env fallback, and flag precedence") {
  Scratch s;
  s.write("cfg.ini", "sweep.n_cutoff_max = 6\nbootstrap.seed = 77\n");

  const auto from_file = s.run("--config cfg.ini sweep --state 'gaussian(sigma2=1600)'");
  REQUIRE(from_file.exit_code == 0);
  CHECK(data_rows(from_file.out) == 3);

  const auto flag_wins =
      s.run("--config cfg.ini sweep --state 'gaussian(sigma2=1600)' --sweep.n_cutoff_max 4");
  REQUIRE(flag_wins.exit_code == 0);
  CHECK(data_rows(flag_wins.out) == 2);

  const auto from_env =
      s.run("sweep --state 'gaussian(sigma2=1600)'", "PSDCERT_CONFIG=cfg.ini ");
  REQUIRE(from_env.exit_code == 0);
  CHECK(data_rows(from_env.out) == 3);

  s.write("bad.ini", "sweep.bogus = 1\n");
  const auto bad = s.run("--config bad.ini sweep --state 'gaussian(sigma2=1600)'");
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("sweep.bogus") != std::string::npos);

  // a report's config snapshot replays as a config file
  REQUIRE(s.run("simulate --state 'gaussian(sigma2=1500)' --pulses 500 --out g.csv --seed 1")
              .exit_code == 0);
  REQUIRE(s.run("--config cfg.ini certify g.csv --sweep.n_cutoff_max 4").exit_code == 0);
  const auto replay =
      s.run("--config reports/run-0000/config.txt sweep --state 'gaussian(sigma2=1600)'");
  REQUIRE(replay.exit_code == 0);
  CHECK(data_rows(replay.out) == 2);
  const auto sweep_meta = psdcert::io::parse_meta(s.read("reports/run-0000/sweep.csv"));
  CHECK(sweep_meta.at("seed") == "77");
}
