#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gaitprint/commands.hpp"
#include "gaitprint/persist.hpp"
#include "support/synthetic.hpp"

using namespace gaitprint;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("gaitprint_cmd_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

ExperimentConfig parse(const std::string& text, const fs::path& base = {})
{
    std::istringstream in(text);
    return parse_config(in, base);
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

ExperimentConfig synthetic_experiment(const fs::path& root, int subjects, int seconds)
{
    testing::SyntheticOptions o;
    o.subjects = subjects;
    o.seconds = seconds;
    fs::create_directories(root / "data");
    std::ofstream f(root / "data" / "all.csv");
    testing::write_synthetic_csv(f, o);
    f.close();

    ExperimentConfig cfg;
    cfg.data_path = root / "data";
    cfg.out_dir = root / "out";
    cfg.seed = 11;
    cfg.split.seed = 11;
    cfg.jobs = 2;
    cfg.cma_n_mc = 20'000;
    return cfg;
}

} // namespace

TEST_CASE("config parsing")
{
    const auto cfg = parse("[data]\npath = raw\n[experiment]\nseed = 42\njobs = 3\n", "/base");
    CHECK(cfg.data_path == fs::path("/base/raw"));
    CHECK(cfg.seed == 42);
    CHECK(cfg.split.seed == 42);
    CHECK(cfg.jobs == 3);
    CHECK(cfg.method == kMethodGridcell);
    CHECK(parse("[data]\npath = /abs\n", "/base").data_path == fs::path("/abs"));

    CHECK_THROWS_AS(parse("[data]\npathh = x\n"), ConfigError);
    CHECK_THROWS_AS(parse("[method]\nname = svm\n"), ConfigError);
    CHECK_THROWS_AS(parse("[fit]\ntol = fast\n"), ConfigError);
    CHECK_THROWS_AS(parse("[grid]\nlags = 15, 100\n"), ConfigError);
    CHECK_THROWS_AS(parse("[split]\nmode = sideways\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/gaitprint.ini"), ConfigError);

    const auto lists = parse("[funreg]\nlambda_values = 0.1, 10\nlambda_grid_mode = full\n");
    CHECK(lists.funreg.lambda_values == std::vector<double>{0.1, 10});
    CHECK(lists.lambda_candidates().size() == 8);
}

TEST_CASE("config hash ignores output location and job count")
{
    const auto a = parse("[output]\ndir = one\n[experiment]\njobs = 1\n");
    const auto b = parse("[output]\ndir = two\n[experiment]\njobs = 8\n");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    const auto c = parse("[experiment]\nseed = 1\n");
    CHECK(config_hash(a) != config_hash(c));
    // Round trip through the canonical text gives the same hash.
    const auto canon = canonical_config(c);
    CHECK(config_hash(parse(canon)) == config_hash(c));
}

TEST_CASE("exit codes")
{
    CHECK(run_guarded([] {}) == 0);
    CHECK(run_guarded([] { throw ConfigError("c"); }) == 2);
    CHECK(run_guarded([] { throw DataError("d"); }) == 3);
    CHECK(run_guarded([] { throw NumericalError("n"); }) == 4);
    CHECK(run_guarded([] { throw std::runtime_error("x"); }) == 1);
}

TEST_CASE("artifact stems")
{
    CHECK(artifact_stem("id1234") == "id1234");
    CHECK(artifact_stem("a b/c") == "a%20b%2fc");
    CHECK(artifact_stem("x_y-z.1") == "x_y-z.1");
}

TEST_CASE("commands fail cleanly without inputs")
{
    TempDir tmp;
    ExperimentConfig cfg;
    cfg.out_dir = tmp.path / "out";
    CHECK_THROWS_AS(cmd_ingest(cfg), ConfigError);
    fs::create_directories(tmp.path / "empty");
    cfg.data_path = tmp.path / "empty";
    CHECK_THROWS_AS(cmd_ingest(cfg), DataError);
    CHECK_THROWS_AS(cmd_train(cfg), DataError);
    CHECK_THROWS_AS(cmd_evaluate(cfg), DataError);
    CHECK_THROWS_AS(cmd_plot(cfg), DataError);
    cfg.method = kMethodFunreg;
    CHECK_THROWS_AS(cmd_cma(cfg), ConfigError);
}

TEST_CASE("grid-cell pipeline on synthetic data")
{
    TempDir tmp;
    auto cfg = synthetic_experiment(tmp.path, 5, 24);
    const auto ing = cmd_ingest(cfg);
    CHECK(ing.n_subjects == 5);
    CHECK(ing.median_seconds == 24);
    CHECK(fs::exists(cfg.out_dir / "series.gprt"));

    const auto tr = cmd_train(cfg);
    CHECK(tr.models.size() == 5);
    CHECK(tr.n_train_seconds == 5 * 18);
    CHECK(tr.n_test_seconds == 5 * 6);
    const auto art = grid_model_from_json(json::parse(slurp(cfg.out_dir / "models" / "model_s100.json")));
    CHECK(art.config_hash == config_hash(cfg));
    CHECK(art.fit.target == "s100");

    const auto ev = cmd_evaluate(cfg);
    CHECK(ev.report.total == 5);
    CHECK(ev.report.accuracy.at(5) == 1.0);
    CHECK(ev.report.accuracy.at(1) >= 0.6);
    const auto ranks = slurp(cfg.out_dir / "ranks.csv");
    CHECK(ranks.find(config_hash(cfg)) != std::string::npos);
    CHECK(fs::exists(cfg.out_dir / "sensitivity.svg"));

    cfg.cma_subjects = {"s101"};
    const auto cma = cmd_cma(cfg);
    REQUIRE(cma.size() == 1);
    CHECK(cma[0].subject == "s101");
    CHECK(cma[0].q >= cma[0].z);
    CHECK(fs::exists(cfg.out_dir / "cma" / "cma_s101.json"));
    CHECK(fs::exists(cfg.out_dir / "cma" / "fingerprint_s101.svg"));
    const auto first_cma = slurp(cfg.out_dir / "cma" / "cma_s101.json");

    // One thread instead of two, identical output.
    cfg.jobs = 1;
    cmd_cma(cfg);
    CHECK(slurp(cfg.out_dir / "cma" / "cma_s101.json") == first_cma);
    fs::remove(cfg.out_dir / "sensitivity.svg");
    cmd_plot(cfg);
    CHECK(fs::exists(cfg.out_dir / "sensitivity.svg"));

    cfg.cma_subjects = {"nobody"};
    CHECK_THROWS_AS(cmd_cma(cfg), ConfigError);

    // Models trained by one method cannot be evaluated as the other.
    cfg.method = kMethodFunreg;
    CHECK_THROWS_AS(cmd_evaluate(cfg), ConfigError);
}

TEST_CASE("funreg pipeline on synthetic data")
{
    TempDir tmp;
    auto cfg = synthetic_experiment(tmp.path, 3, 12);
    cfg.method = kMethodFunreg;
    cfg.funreg.num_basis = 4;
    cfg.funreg.lambda_values = {1e-3, 1};
    cfg.funreg.folds = 2;
    cfg.funreg.lag_stride = 3;
    cfg.funreg.dump_dsu = true;
    cmd_ingest(cfg);
    const auto tr = cmd_train(cfg);
    CHECK(tr.models.size() == 3);
    CHECK(fs::exists(cfg.out_dir / "dsu" / "s100_D.csv"));
    CHECK(fs::exists(cfg.out_dir / "dsu" / "s102_lmat.csv"));
    const auto art = fun_model_from_json(json::parse(slurp(cfg.out_dir / "models" / "model_s102.json")));
    CHECK(art.fit.beta.size() == 64);
    CHECK(art.lag_stride == 3);

    const auto ev = cmd_evaluate(cfg);
    CHECK(ev.report.total == 3);
    CHECK(ev.report.accuracy.at(1) >= 0.0);
    CHECK_THROWS_AS(cmd_cma(cfg), ConfigError);
}
