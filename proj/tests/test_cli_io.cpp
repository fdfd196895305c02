#include "dlcox/config.hpp"
#include "dlcox/error.hpp"
#include "dlcox/manifest.hpp"
#include "dlcox/serialize.hpp"
#include "dlcox/sim_engine.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace dlcox;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("dlcox_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + DLCOX_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path sample_csv(const fs::path& dir, Eigen::Index n = 200, Eigen::Index p = 6) {
    SimConfig cfg;
    cfg.n = n;
    cfg.p = p;
    cfg.beta0 = Vector::Zero(p);
    cfg.beta0[0] = 0.8;
    cfg.beta0[1] = -0.5;
    cfg.seed = 11;
    const fs::path path = dir / "data.csv";
    write_csv(generate_dataset(cfg), path);
    return path;
}


ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no dlcox::Error thrown");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("cli_io") {

TEST_CASE("config tables") {
    const auto t = ConfigTable::parse(R"(# scenario
top = 3
[data]
n = 500          # trailing comment
name = "a # b"
flag = true
grid = [0.1, 2e-3, -4]
names = ["x1", "x2"]
)");
    CHECK(t.integer("top", 0) == 3);
    CHECK(t.integer("data.n", 0) == 500);
    CHECK(t.string("data.name", "") == "a # b");
    CHECK(t.boolean("data.flag", false));
    CHECK(t.numbers("data.grid") == std::vector<double>{0.1, 2e-3, -4.0});
    CHECK(t.strings("data.names") == std::vector<std::string>{"x1", "x2"});
    CHECK(t.number("data.missing", 7.5) == 7.5);
    CHECK(t.unused_keys().empty());
    CHECK(code_of([] { ConfigTable::parse("n = \n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { ConfigTable::parse("[data\nn = 1\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { t.integer("data.name", 0); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { ConfigTable::load("/nonexistent/dlcox.toml"); }) == ErrorCode::FileNotFound);
}

TEST_CASE("experiment from config") {
    const auto spec = experiment_from_config(ConfigTable::load(DLCOX_SOURCE_DIR "/configs/fig2_p50.toml"));
    CHECK(spec.config.n == 500);
    CHECK(spec.config.p == 50);
    CHECK(spec.config.censoring == CensoringKind::uniform);
    CHECK(spec.config.uniform_a == 1.0);
    CHECK(spec.config.uniform_b == 20.0);
    CHECK(spec.config.beta0 == beta0_benchmark(50, 1.0));
    CHECK(spec.methods.size() == 4);
    REQUIRE(spec.targets.size() == 1);
    CHECK(spec.targets[0].c == Vector::Unit(50, 0));

    CHECK(code_of([] { experiment_from_config(ConfigTable::parse("n = 50\np = 5\nbogus = 1\n")); }) ==
          ErrorCode::ConfigError);
    CHECK(code_of([] { experiment_from_config(ConfigTable::parse("methods = [\"nw\"]\n")); }) ==
          ErrorCode::ConfigError);
}

TEST_CASE("contrast parsing") {
    const std::vector<std::string> names{"x1", "x2", "x3", "age"};
    auto c = parse_contrast("x2 - x3 = 0", names);
    CHECK(c.c == (Vector(4) << 0, 1, -1, 0).finished());
    CHECK(c.a0 == 0.0);
    c = parse_contrast("0.5*x1 + 2e-1*age = 1.5", names);
    CHECK(c.c == (Vector(4) << 0.5, 0, 0, 0.2).finished());
    CHECK(c.a0 == 1.5);
    c = parse_contrast("-x1+x1+x3", names);
    CHECK(c.c == (Vector(4) << 0, 0, 1, 0).finished());
    CHECK(code_of([&] { parse_contrast("x9", names); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { parse_contrast("x1 +", names); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { parse_contrast("x1 + - x2", names); }) == ErrorCode::InvalidArgument);

    const Matrix a = parse_joint("x2, age", names);
    REQUIRE(a.rows() == 2);
    CHECK(a.row(0) == (Vector(4) << 0, 1, 0, 0).finished().transpose());
    CHECK(a.row(1) == (Vector(4) << 0, 0, 0, 1).finished().transpose());
    CHECK(code_of([&] { parse_joint("x2,nope", names); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("manifest digest") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    RunManifest a;
    a.command = "fit";
    a.config["lambda"] = 0.1;
    a.seeds["folds"] = 3;
    RunManifest b = a;
    b.argv = {"dlcox", "fit", "x.csv"};
    b.timings.emplace_back("fit", 1.25);
    CHECK(a.digest() == b.digest());
    b.config["lambda"] = 0.2;
    CHECK(a.digest() != b.digest());
    RunManifest c = a;
    c.seeds["folds"] = 4;
    CHECK(a.digest() != c.digest());
    CHECK(a.to_json().at("library_version") == library_version());
    CHECK(a.to_json().at("manifest_digest") == a.digest());
}

TEST_CASE("double formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("cli exit codes") {
    const auto dir = scratch("codes");
    const auto log = dir / "log.txt";
    CHECK(run_cli("fit /nonexistent/data.csv --lambda 0.1 --out " + dir.string(), log) == 2);
    std::ofstream(dir / "bad.csv") << "time,status,x1\n1,1,abc\n2,0,1\n";
    CHECK(run_cli("fit " + (dir / "bad.csv").string() + " --lambda 0.1 --out " + dir.string(), log) == 2);
    std::ofstream(dir / "neg.csv") << "time,status,x1\n-1,1,0.5\n2,1,1\n3,0,2\n";
    CHECK(run_cli("fit " + (dir / "neg.csv").string() + " --lambda 0.1 --out " + dir.string(), log) == 3);
    // The validation report goes to stderr as JSON lines.
    CHECK(slurp(log).find("\"code\":\"NegativeTime\"") != std::string::npos);
    std::ofstream(dir / "const.csv") << "time,status,x1,x2\n1,1,0.5,1\n2,1,1,1\n3,0,2,1\n";
    CHECK(run_cli("fit " + (dir / "const.csv").string() + " --standardize zscore --lambda 0.1 --out " + dir.string(),
                  log) == 3);
    CHECK(run_cli("frobnicate", log) == 2);
    std::ofstream(dir / "bad.toml") << "n = 50\nwhat = 1\n";
    CHECK(run_cli("simulate " + (dir / "bad.toml").string() + " --out " + dir.string(), log) == 3);
}

TEST_CASE("cli fit") {
    const auto dir = scratch("fit");
    const auto csv = sample_csv(dir);
    REQUIRE(run_cli("fit " + csv.string() + " --lambda 0.1 --out " + dir.string(), dir / "log.txt") == 0);
    const json j = json::parse(slurp(dir / "fit.json"));
    CHECK(j.at("schema_version") == kSchemaVersion);
    CHECK(j.at("lambda").get<double>() == 0.1);
    CHECK(j.at("beta").size() == 6);
    const json m = json::parse(slurp(dir / "manifest.json"));
    CHECK(m.at("manifest_digest") == j.at("manifest_digest"));
    CHECK(m.at("input_digests").begin().value() == sha256_file(csv));

    // Same inputs, same digest; the fit itself is a pure function of them.
    const auto dir2 = scratch("fit2");
    fs::copy_file(csv, dir2 / "data.csv");
    REQUIRE(run_cli("fit " + csv.string() + " --lambda 0.1 --out " + dir2.string(), dir2 / "log.txt") == 0);
    CHECK(slurp(dir2 / "fit.json") == slurp(dir / "fit.json"));
}

TEST_CASE("cli infer with contrasts and a joint test") {
    const auto dir = scratch("infer");
    const auto csv = sample_csv(dir, 300, 6);
    REQUIRE(run_cli("infer " + csv.string() + " --lambda 0.05 --gamma 0.2 --contrast \"x2-x3=0\" --joint x2,x3 "
                    "--write-theta --out " + dir.string(), dir / "log.txt") == 0);
    const json j = json::parse(slurp(dir / "inference.json"));
    const double n = j.at("n").get<double>();
    Matrix theta(6, 6);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) theta(r, c) = j.at("theta").at("matrix").at(r).at(c).get<double>();
    Vector b(6);
    for (const auto& row : j.at("coefficients")) {
        const int k = std::stoi(row.at("label").get<std::string>().substr(1)) - 1;
        b[k] = row.at("estimate").get<double>();
        CHECK(row.at("se").get<double>() == doctest::Approx(std::sqrt(theta(k, k) / n)).epsilon(1e-12));
    }

    const json lin = j.at("linear_tests").at(0);
    const double est = b[1] - b[2];
    const Vector c = (Vector(6) << 0, 1, -1, 0, 0, 0).finished();
    const double se = std::sqrt(c.dot(theta * c) / n);
    CHECK(lin.at("estimate").get<double>() == doctest::Approx(est).epsilon(1e-12));
    CHECK(lin.at("se").get<double>() == doctest::Approx(se).epsilon(1e-12));
    const boost::math::normal_distribution<double> z;
    CHECK(lin.at("p_value").get<double>() ==
          doctest::Approx(2.0 * boost::math::cdf(boost::math::complement(z, std::abs(est / se)))).epsilon(1e-10));

    const json joint = j.at("joint_tests").at(0);
    CHECK(joint.at("df") == 2);
    Matrix a = Matrix::Zero(2, 6);
    a(0, 1) = 1.0;
    a(1, 2) = 1.0;
    const Vector ab = a * b;
    const Matrix f = a * theta * a.transpose();
    const double stat = n * ab.dot(f.lu().solve(ab));
    CHECK(joint.at("statistic").get<double>() == doctest::Approx(stat).epsilon(1e-10));
    const boost::math::chi_squared_distribution<double> chi2(2.0);
    CHECK(joint.at("p_value").get<double>() ==
          doctest::Approx(boost::math::cdf(boost::math::complement(chi2, stat))).epsilon(1e-10));

    const std::string coef = slurp(dir / "coefficients.csv");
    CHECK(coef.rfind("# manifest_digest=" + j.at("manifest_digest").get<std::string>(), 0) == 0);

    CHECK(run_cli("infer " + csv.string() + " --lambda 0.05 --gamma 0.2 --contrast \"x9=0\" --out " + dir.string(),
                  dir / "log2.txt") == 2);
}

TEST_CASE("cli simulate is reproducible") {
    const auto dir = scratch("sim");
    std::ofstream(dir / "s.toml") << "n = 120\np = 5\nbeta0 = \"benchmark\"\nseed = 5\n"
                                     "methods = [\"oracle\", \"mple\"]\nreplications = 4\n";
    const auto a = dir / "a";
    const auto b = dir / "b";
    REQUIRE(run_cli("simulate " + (dir / "s.toml").string() + " --threads 1 --out " + a.string(), dir / "l1") == 0);
    REQUIRE(run_cli("simulate " + (dir / "s.toml").string() + " --threads 2 --out " + b.string(), dir / "l2") == 0);
    for (const char* f : {"summary.json", "summary.csv", "replications.csv"}) CHECK(slurp(a / f) == slurp(b / f));
    const json s = json::parse(slurp(a / "summary.json"));
    CHECK(s.at("replications") == 4);
    CHECK(s.at("rows").size() == 2);
    // One header comment, one column header, and 2 methods x 4 replications.
    const std::string reps = slurp(a / "replications.csv");
    CHECK(std::count(reps.begin(), reps.end(), '\n') == 10);
}

TEST_CASE("cli bench qp") {
    const auto dir = scratch("bench");
    REQUIRE(run_cli("bench qp --p-grid 10 --gamma-multipliers 1 --repetitions 2 --n 100 --out " + dir.string(),
                    dir / "log.txt") == 0);
    const std::string csv = slurp(dir / "bench_qp.csv");
    CHECK(csv.find("p,gamma_multiplier,gamma,mean_seconds,mean_row_seconds,mean_active_set") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

}
