#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sdbc/io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "sdbc_cli_test";

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kRoot);
    const auto p = kRoot / (name + ".cfg");
    std::ofstream(p) << text;
    return p;
}

int run(const std::string& args, std::string* err = nullptr) {
    const auto log = kRoot / "stderr.txt";
    const std::string cmd = std::string(SDBC_CLI_PATH) + " " + args + " >/dev/null 2>" + log.string();
    const int status = std::system(cmd.c_str());
    if (err) *err = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cmd(const std::string& sub, const fs::path& cfg, const std::string& out) {
    return sub + " --config " + cfg.string() + " --out " + (kRoot / out).string();
}

const char* kExample = "p = 1\nq = 15\nn_max = 32\ngrid_size = 201\n";

}  // namespace

TEST(Config, ParsesCommentsAndLists) {
    const auto c = sdbc::io::Config::parse("a = 1 # x\n# full\n\nb = 2, 3.5\nname = hi\n");
    EXPECT_EQ(c.num("a"), 1.0);
    EXPECT_EQ(c.list("b"), (std::vector<double>{2.0, 3.5}));
    EXPECT_EQ(c.str("name"), "hi");
    EXPECT_THROW(c.num("name"), sdbc::Error);
    EXPECT_THROW(sdbc::io::Config::parse("novalue\n"), sdbc::Error);
    EXPECT_EQ(sdbc::io::Config::parse("b=1\na=2").canonical(), "a=2\nb=1\n");
}

TEST(Csv, SeventeenDigitsAndEmptyNaN) {
    sdbc::io::Csv c({"a", "b"});
    c.row({0.1, std::nan("")});
    EXPECT_EQ(c.str(), "a,b\n0.10000000000000001,\n");
}

TEST(Cli, EigenWritesSpectrum) {
    const auto cfg = write_config("eigen", kExample);
    ASSERT_EQ(run(cmd("eigen", cfg, "eigen")), 0);
    const auto csv = slurp(kRoot / "eigen" / "eigen.csv");
    EXPECT_EQ(csv.rfind("n,lambda,phi1,dphi1,g_n\n1,-5.13039559891", 0), 0u);
    EXPECT_TRUE(fs::exists(kRoot / "eigen" / "eigenfunctions" / "phi_0032.csv"));
    EXPECT_TRUE(fs::exists(kRoot / "eigen" / "manifest.json"));
}

TEST(Cli, EigenShootingPathReportsResiduals) {
    const auto cfg = write_config("robin", "p = 1\nq = 0\na2 = 1\nn_max = 4\ngrid_size = 201\n");
    ASSERT_EQ(run(cmd("eigen", cfg, "robin")), 0);
    const auto rep = slurp(kRoot / "robin" / "eigen_report.json");
    EXPECT_NE(rep.find("\"ode_residual\""), std::string::npos);
    EXPECT_NE(rep.find("\"method\": \"shooting\""), std::string::npos);
}

TEST(Cli, EmptyModeCountIsUsageError) {
    const auto cfg = write_config("empty", "p = 1\nq = 15\nn_max =\n");
    EXPECT_EQ(run(cmd("eigen", cfg, "empty")), 64);
    EXPECT_EQ(run("eigen"), 64);
    EXPECT_EQ(run("frobnicate"), 64);
}

TEST(Cli, DesignReduced) {
    const auto cfg = write_config("design", std::string(kExample) + "controller.type = reduced\n");
    ASSERT_EQ(run(cmd("design", cfg, "design")), 0);
    const auto j = slurp(kRoot / "design" / "controller.json");
    EXPECT_NE(j.find("\"m\": 1"), std::string::npos);
    EXPECT_NE(j.find("\"T_star\": 0.0390246631856"), std::string::npos);
}

TEST(Cli, DesignBacksteppingRejectsNegativeShift) {
    const auto cfg = write_config("bad_c", "p = 1\nq = -5\nn_max = 8\ncontroller.type = backstepping\ncontroller.c = 1\n");
    std::string err;
    EXPECT_EQ(run(cmd("design", cfg, "bad_c"), &err), 2);
    EXPECT_NE(err.find("c >= max(0, -q)"), std::string::npos) << err;
}

TEST(Cli, DesignNone) {
    const auto cfg = write_config("none", kExample);
    EXPECT_EQ(run(cmd("design", cfg, "none")), 0);
    EXPECT_NE(slurp(kRoot / "none" / "controller.json").find("\"type\": \"none\""), std::string::npos);
}

TEST(Cli, SimulateIsDeterministic) {
    const auto cfg = write_config("sim", std::string(kExample) +
                                             "controller.type = reduced\nschedule.kind = jittered\nschedule.T = auto\n"
                                             "sim.t_end = 1\nsim.output_dt = 0.05\n");
    ASSERT_EQ(run(cmd("simulate", cfg, "sim1") + " --seed 9"), 0);
    ASSERT_EQ(run(cmd("simulate", cfg, "sim2") + " --seed 9"), 0);
    ASSERT_EQ(run(cmd("simulate", cfg, "sim3") + " --seed 10"), 0);
    const auto a = slurp(kRoot / "sim1" / "trace.csv");
    EXPECT_EQ(a, slurp(kRoot / "sim2" / "trace.csv"));
    EXPECT_NE(a, slurp(kRoot / "sim3" / "trace.csv"));
    EXPECT_EQ(a.rfind("t,norm_r,u,v,w\n", 0), 0u);
    EXPECT_EQ(slurp(kRoot / "sim1" / "manifest.json"), slurp(kRoot / "sim2" / "manifest.json"));
}

TEST(Cli, SimulateZeroHorizon) {
    const auto cfg = write_config("zero", std::string(kExample) + "schedule.T = 0.1\nsim.t_end = 0\n");
    ASSERT_EQ(run(cmd("simulate", cfg, "zero")), 0);
    const auto t = slurp(kRoot / "zero" / "trace.csv");
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 2);
    EXPECT_EQ(t.find("t,norm_r,u,v,w\n0,"), 0u);
}

TEST(Cli, SimulateWithOracle) {
    const auto cfg = write_config("oracle", std::string(kExample) +
                                                "controller.type = reduced\nschedule.T = 0.04\nsim.t_end = 0.2\n"
                                                "oracle.M = 100\noracle.dt = 1e-3\n");
    ASSERT_EQ(run(cmd("simulate", cfg, "oracle") + " --oracle"), 0);
    EXPECT_TRUE(fs::exists(kRoot / "oracle" / "trace_fd.csv"));
    EXPECT_NE(slurp(kRoot / "oracle" / "comparison.json").find("max_snapshot_rel"), std::string::npos);
}

TEST(Cli, SweepRows) {
    const auto cfg = write_config("sweep", std::string(kExample) + "controller.type = reduced\nsweep.horizon = 4\n");
    ASSERT_EQ(run(cmd("sweep", cfg, "sw1") + " --T 0.02"), 0);
    const auto one = slurp(kRoot / "sw1" / "sweep.csv");
    EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 2);
    EXPECT_EQ(one.rfind("T,stable,c_est,G_est,ratio\n0.02,1,", 0), 0u);

    ASSERT_EQ(run(cmd("sweep", cfg, "sw2") + " --T 0.02,0.1,0.3,0.6"), 0);
    ASSERT_EQ(run(cmd("sweep", cfg, "sw3") + " --T 0.02,0.1,0.3,0.6"), 0);
    const auto multi = slurp(kRoot / "sw2" / "sweep.csv");
    EXPECT_EQ(multi, slurp(kRoot / "sw3" / "sweep.csv"));
    std::istringstream in(multi);
    std::string line;
    std::getline(in, line);
    std::string flags;
    while (std::getline(in, line)) flags += line.substr(line.find(',') + 1, 1);
    EXPECT_EQ(flags.front(), '1');
    EXPECT_EQ(flags.back(), '0');
    EXPECT_EQ(flags.find("01"), std::string::npos);
}

TEST(Cli, UnknownKeyAndBadValues) {
    EXPECT_EQ(run(cmd("eigen", write_config("unk", "p = 1\nbogus = 2\n"), "unk")), 64);
    EXPECT_EQ(run(cmd("eigen", write_config("neg", "p = -1\n"), "neg")), 2);
    EXPECT_EQ(run(cmd("design", write_config("ctl", "controller.type = lqr\n"), "ctl")), 2);
}
