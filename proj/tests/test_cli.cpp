// test_cli.cpp: configuration parsing, subcommands in-process and through the binary

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "oracles.hpp"
#include "stoclim/cli.hpp"

using namespace stoclim;
using cli::json;

namespace {

const char* kTwoLevel = R"({
  "system": {"hamiltonian": [[0, 0], [0, 1]], "couplings": [[[0, 1], [1, 0]]]},
  "bath": {"beta": 1.0}
})";

cli::RunConfig config(const std::string& text) { return cli::parse_config(json::parse(text)); }

std::string config_error(const std::string& text) {
    try {
        config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::filesystem::path scratch_dir() {
    auto p = std::filesystem::temp_directory_path() / "stoclim_cli_test";
    std::filesystem::create_directories(p);
    return p;
}

std::filesystem::path write_file(const std::string& name, const std::string& text) {
    const auto p = scratch_dir() / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the binary; returns its exit status.
int run(const std::string& args, const std::filesystem::path& out = {}) {
    std::string cmd = std::string(STOCLIM_CLI) + " " + args;
    cmd += out.empty() ? " > /dev/null" : " > '" + out.string() + "'";
    cmd += " 2> '" + (scratch_dir() / "stderr.txt").string() + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_stderr() { return slurp(scratch_dir() / "stderr.txt"); }

}  // namespace

TEST(Config, MissingHamiltonianNamesField) {
    const auto msg = config_error(R"({"system": {"couplings": []}, "bath": {"beta": 1}})");
    EXPECT_NE(msg.find("'system.hamiltonian'"), std::string::npos) << msg;
}

TEST(Config, FieldPathsInErrors) {
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[0, 0], [0]]}})").find("system.hamiltonian[1]"), std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[0, "x"], [0, 1]]}})").find("system.hamiltonian[0][1]"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[1]], "couplings": [[[1, 0], [0, 1]]]}})").find("system.couplings[0]"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[1]]}, "bath": {"beta": "hot"}})").find("bath.beta"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[1]]}, "bath": {"kernel": "x"}})").find("bath.kernel"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"spin_chain": {"sites": 3}}})").find("system.spin_chain.J"), std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"spin_chain": {"sites": 3, "J": 1, "boundary": "x"}}})")
                  .find("system.spin_chain.boundary"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[1]], "spin_chain": {"sites": 2, "J": 1}}})").find("not both"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"hamiltonian": [[1]]}, "bath": {"lamb_shift": true}})").find("'bath'"),
              std::string::npos);
}

TEST(Config, ParsesBathAndChain) {
    const auto cfg = config(R"({
      "system": {"spin_chain": {"sites": 4, "J": [1, 2, 3, 4], "boundary": "periodic", "convention": "full"}},
      "bath": {"beta": "inf", "dos": "physical", "filter": {"omega_max": 0.5}, "spontaneous_emission": false,
               "form_factor": 2.0}
    })");
    ASSERT_TRUE(cfg.system.chain.has_value());
    EXPECT_EQ(cfg.system.chain->couplings, (std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(cfg.system.chain->convention, BondConvention::Full);
    EXPECT_EQ(cfg.system.hamiltonian.rows(), 16);
    EXPECT_TRUE(std::isinf(cfg.bath.beta));
    EXPECT_EQ(cfg.bath.dos, DosConvention::Physical);
    EXPECT_EQ(cfg.bath.filter->omega_max, 0.5);
    EXPECT_FALSE(cfg.bath.spontaneous_emission);
    EXPECT_EQ(cfg.bath.form_factor(0, 3.0), 2.0);
    // shorthand at the system level
    const auto s = config(R"({"system": {"sites": 2, "J": 1.0}})");
    EXPECT_EQ(s.system.chain->boundary, Boundary::Open);
    // classical-only chains keep no Hamiltonian
    const auto big = config(R"({"system": {"sites": 10, "J": 1.0}})");
    EXPECT_EQ(big.system.hamiltonian.size(), 0);
    EXPECT_THROW(cli::system_hamiltonian(big), ConfigError);
}

TEST(Config, TabulatedFormFactor) {
    write_file("g.csv", "0,1\n10,0\n");
    std::ofstream(scratch_dir() / "cfg_tab.json") << R"({"system": {"hamiltonian": [[0, 0], [0, 1]],
      "couplings": [[[0, 1], [1, 0]]]}, "bath": {"kernel": "radial_quadrature", "form_factor": "g.csv", "uv_cutoff": 10}})";
    const auto cfg = cli::load_config((scratch_dir() / "cfg_tab.json").string());
    EXPECT_NEAR(cfg.bath.form_factor(0, 5.0), 0.5, 1e-15);
    std::ofstream(scratch_dir() / "cfg_bad.json") << R"({"system": {"hamiltonian": [[1]]}, "bath": {"form_factor": "none.csv"}})";
    try {
        cli::load_config((scratch_dir() / "cfg_bad.json").string());
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bath.form_factor"), std::string::npos) << e.what();
    }
}

TEST(Spectrum, TwoLevelReport) {
    std::ostringstream out;
    cli::GlobalOptions g;
    g.json_output = true;
    EXPECT_EQ(cli::cmd_spectrum(config(kTwoLevel), g, out), cli::kOk);
    const json j = json::parse(out.str());
    EXPECT_EQ(j["levels"].size(), 2u);
    EXPECT_EQ(j["bohr_frequencies"], (json{-1.0, 0.0, 1.0}));
    EXPECT_TRUE(j["generic"].get<bool>());
}

TEST(Spectrum, RingDegeneracyFlagged) {
    std::ostringstream out;
    cli::GlobalOptions g;
    g.json_output = true;
    cli::cmd_spectrum(config(R"({"system": {"spin_chain": {"sites": 3, "J": 1, "boundary": "periodic"}}})"), g, out);
    const json j = json::parse(out.str());
    EXPECT_FALSE(j["generic"].get<bool>());
    EXPECT_EQ(j["levels"].size(), 2u);
    EXPECT_EQ(j["levels"][0]["degeneracy"], 2);
    EXPECT_EQ(j["levels"][1]["degeneracy"], 6);
}

TEST(Spectrum, JsonRoundTripIsBitIdentical) {
    std::mt19937_64 rng(3);
    const Matrix h = oracle::random_hermitian(rng, 4);
    json cfg;
    cfg["system"]["hamiltonian"] = json::array();
    for (Index r = 0; r < 4; ++r) {
        json row = json::array();
        for (Index c = 0; c < 4; ++c) row.push_back({h(r, c).real(), h(r, c).imag()});
        cfg["system"]["hamiltonian"].push_back(row);
    }
    std::ostringstream out;
    cli::GlobalOptions g;
    g.json_output = true;
    cli::cmd_spectrum(cli::parse_config(cfg), g, out);
    const json j = json::parse(out.str());
    const auto spec = spectral_decompose(HermitianOperator(h));
    ASSERT_EQ(j["levels"].size(), static_cast<std::size_t>(spec.num_levels()));
    for (std::size_t k = 0; k < j["levels"].size(); ++k) {
        EXPECT_EQ(j["levels"][k]["energy"].get<double>(), spec.levels()[k].energy);
    }
}

TEST(Rates, TwoLevelRows) {
    std::ostringstream out;
    cli::cmd_rates(config(kTwoLevel), {}, out);
    const auto rows = csv(out.str());
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"omega", "i", "j", "re_minus", "im_minus", "re_plus", "im_plus"}));
    for (const auto& r : rows) {
        if (r[0] == "omega") continue;
        const double w = std::stod(r[0]);
        if (w < 0) {
            EXPECT_EQ(std::stod(r[3]), 0.0);
            EXPECT_EQ(std::stod(r[5]), 0.0);
        }
        if (w == 1.0) {
            EXPECT_NEAR(std::stod(r[3]), oracle::re_minus(1, 1), 1e-10);
            EXPECT_NEAR(std::stod(r[5]), oracle::re_plus(1, 1), 1e-10);
            EXPECT_NEAR(std::stod(r[3]), 62.4530, 1e-3);  // printed approximations
            EXPECT_NEAR(std::stod(r[5]), 22.9747, 1e-3);
        }
    }
}

TEST(Rates, PhysicalDosScalesByOmega) {
    const std::string text = R"({"system": {"hamiltonian": [[0, 0], [0, 2.5]], "couplings": [[[0, 1], [1, 0]]]}})";
    std::ostringstream a;
    std::ostringstream b;
    cli::cmd_rates(config(text), {}, a);
    auto cfg = config(text);
    cli::GlobalOptions g;
    g.dos = DosConvention::Physical;
    cli::apply_globals(cfg, g);
    cli::cmd_rates(cfg, g, b);
    const auto ra = csv(a.str());
    const auto rb = csv(b.str());
    for (std::size_t k = 1; k < ra.size(); ++k) {
        if (std::stod(ra[k][0]) == 2.5) EXPECT_NEAR(std::stod(rb[k][3]) / std::stod(ra[k][3]), 2.5, 1e-14);
    }
}

TEST(Generator, DenseBinaryRoundTrip) {
    const auto path = (scratch_dir() / "dense.bin").string();
    std::ostringstream out;
    EXPECT_EQ(cli::cmd_generator(config(kTwoLevel), {}, out, path), cli::kOk);
    const json j = json::parse(out.str());
    EXPECT_EQ(j["dim"], 2);
    EXPECT_EQ(j["channels"].size(), 1u);
    const Matrix l = cli::read_dense(path);
    const auto sys = cli::open_system(config(kTwoLevel), DenseMode::Always);
    EXPECT_EQ(linalg::max_abs(l - sys.generator.dense()), 0.0);
    EXPECT_EQ(std::filesystem::file_size(path), 8u + 16u * 16u);
}

TEST(Evolve, CsvMatchesLibrary) {
    auto cfg = config(kTwoLevel);
    std::ostringstream out;
    cli::cmd_evolve(cfg, {}, out, 0.02, 4);
    const auto rows = csv(out.str());
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows[0].size(), 9u);
    const double down = 2 * oracle::re_minus(1, 1);
    const double up = 2 * oracle::re_plus(1, 1);
    const double t = std::stod(rows[5][0]);
    EXPECT_NEAR(t, 0.02, 1e-16);
    EXPECT_NEAR(std::stod(rows[5][7]), oracle::two_state_excited(1.0, down, up, t), 1e-10);  // re_1_1
}

TEST(Evolve, InitialStates) {
    const auto spec = spectral_decompose(HermitianOperator((Matrix(2, 2) << 0, 0, 0, 1).finished()));
    EXPECT_EQ(cli::initial_state(json{{"initial", "ground"}}, spec, 1.0)(0, 0), 1.0);
    EXPECT_NEAR(cli::initial_state(json{{"initial", json{{"coherent", {0, 1}}}}}, spec, 1.0)(0, 1).real(), 0.5, 1e-15);
    EXPECT_THROW(cli::initial_state(json{{"initial", 7}}, spec, 1.0), ConfigError);
    EXPECT_THROW(cli::initial_state(json{{"initial", json{{"matrix", {{0.7, 0}, {0, 0.7}}}}}}, spec, 1.0), ConfigError);
}

TEST(Glauber, ClassicalAndQuantumAgreeOnOpenChain) {
    // distinct couplings, so no two flips share a frequency
    const auto cfg = config(R"({"system": {"spin_chain": {"sites": 3, "J": [1.0, 1.37]}}, "bath": {"beta": 1}})");
    cli::GlauberArgs a;
    a.t_max = 0.02;
    a.points = 4;
    a.initial = "+-+";
    std::ostringstream c;
    std::ostringstream q;
    cli::cmd_glauber(cfg, a, {}, c);
    a.mode = "quantum";
    cli::cmd_glauber(cfg, a, {}, q);
    const auto rc = csv(c.str());
    const auto rq = csv(q.str());
    ASSERT_EQ(rc.size(), rq.size());
    EXPECT_EQ(rq[0].back(), "offdiag_l1");
    for (std::size_t k = 1; k < rc.size(); ++k) {
        EXPECT_NEAR(std::stod(rc[k][1]), std::stod(rq[k][1]), 1e-8);
        EXPECT_NEAR(std::stod(rc[k][2]), std::stod(rq[k][2]), 1e-8);
        EXPECT_NEAR(std::stod(rq[k][3]), 0.0, 1e-8);
    }
    a.initial = "++";
    EXPECT_THROW(cli::cmd_glauber(cfg, a, {}, q), ConfigError);
}

TEST(Check, LeibnizPasses) {
    std::ostringstream out;
    EXPECT_EQ(cli::cmd_check(config(kTwoLevel), "leibniz", {}, out), cli::kOk);
    EXPECT_TRUE(json::parse(out.str())["pass"].get<bool>());
}

TEST(Check, CorruptedDetailedBalanceFails) {
    std::ostringstream ok;
    EXPECT_EQ(cli::cmd_check(config(kTwoLevel), "detailed-balance", {}, ok), cli::kOk);
    auto cfg = config(kTwoLevel);
    cfg.run["corrupt_rate"] = {{"from", 1}, {"to", 0}, {"factor", 3.0}};
    std::ostringstream out;
    EXPECT_EQ(cli::cmd_check(cfg, "detailed-balance", {}, out), cli::kCheckFailed);
    const json j = json::parse(out.str());
    EXPECT_FALSE(j["pass"].get<bool>());
    EXPECT_EQ(j["offending_pair"]["from"].get<int>() + j["offending_pair"]["to"].get<int>(), 1);
}

TEST(Check, ScalingPassesWithSlope) {
    auto cfg = config(R"({"system": {"spin_chain": {"sites": 3, "J": 1, "boundary": "periodic"}}, "bath": {"beta": 1}})");
    cfg.run["sizes"] = {2, 3, 4};
    std::ostringstream out;
    EXPECT_EQ(cli::cmd_check(cfg, "scaling", {}, out), cli::kOk);
    const json j = json::parse(out.str());
    EXPECT_NEAR(j["slope"].get<double>(), 2 * oracle::re_plus(1.0, 2.0), 1e-9);
}

TEST(Check, UnknownSuite) {
    std::ostringstream out;
    EXPECT_THROW(cli::cmd_check(config(kTwoLevel), "nope", {}, out), ConfigError);
}

TEST(Binary, ExitCodes) {
    const auto missing = write_file("missing.json", R"({"system": {"couplings": []}})");
    EXPECT_EQ(run("--config '" + missing.string() + "' spectrum"), 2);
    EXPECT_NE(last_stderr().find("system.hamiltonian"), std::string::npos) << last_stderr();
    EXPECT_EQ(run("--config " STOCLIM_DEMOS "/two_level.json spectrum"), 0);
    EXPECT_EQ(run("--config " STOCLIM_DEMOS "/two_level.json check --suite nope"), 2);
    EXPECT_EQ(run("--config " STOCLIM_DEMOS "/two_level.json check --suite leibniz"), 0);
    EXPECT_EQ(run("--bogus"), 2);
    const auto corrupt = write_file("corrupt.json", R"({"system": {"hamiltonian": [[0, 0], [0, 1]],
      "couplings": [[[0, 1], [1, 0]]]}, "run": {"corrupt_rate": {"from": 0, "to": 1}}})");
    const auto report = scratch_dir() / "corrupt_out.json";
    EXPECT_EQ(run("--config '" + corrupt.string() + "' check --suite detailed-balance", report), 1);
    EXPECT_TRUE(json::parse(slurp(report)).contains("offending_pair"));
}

TEST(Binary, CsvOutputIsDeterministic) {
    const auto a = scratch_dir() / "evolve_a.csv";
    const auto b = scratch_dir() / "evolve_b.csv";
    ASSERT_EQ(run("--config " STOCLIM_DEMOS "/two_level.json evolve --t-max 0.05 --points 10", a), 0);
    ASSERT_EQ(run("--config " STOCLIM_DEMOS "/two_level.json --out '" + b.string() + "' evolve --t-max 0.05 --points 10"), 0);
    EXPECT_FALSE(slurp(a).empty());
    EXPECT_EQ(slurp(a), slurp(b));
    const auto r1 = scratch_dir() / "rates_1.csv";
    const auto r2 = scratch_dir() / "rates_2.csv";
    run("--config " STOCLIM_DEMOS "/ring3.json rates", r1);
    run("--config " STOCLIM_DEMOS "/ring3.json rates", r2);
    EXPECT_EQ(slurp(r1), slurp(r2));
}

TEST(Binary, GlauberAndCoherenceControl) {
    const auto g = scratch_dir() / "glauber.csv";
    EXPECT_EQ(run("glauber --sites 4 --coupling 1.0 --beta 0.5 --boundary periodic --mode classical --t-max 0.1 --points 5", g), 0);
    EXPECT_EQ(csv(slurp(g)).size(), 7u);
    EXPECT_EQ(run("glauber --sites 4 --mode nope"), 2);
    const auto c = scratch_dir() / "coh.json";
    EXPECT_EQ(run("--config " STOCLIM_DEMOS "/filtered.json check --suite coherence-control", c), 0);
    EXPECT_TRUE(json::parse(slurp(c))["pass"].get<bool>());
}
