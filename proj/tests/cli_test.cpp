#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "opwg/datasets.hpp"
#include "opwg/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("opwg_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    Result run(const std::string& args, const std::string& env = "") const {
        const fs::path out = path("stdout.txt"), err = path("stderr.txt");
        const std::string cmd = env + (env.empty() ? "" : " ") + std::string(OPWG_CLI_PATH) + " " + args + " > " +
                                out.string() + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = read_file(out);
        r.err = read_file(err);
        return r;
    }

    static std::size_t data_rows(const fs::path& csv) {
        std::ifstream in(csv);
        std::string line;
        std::size_t rows = 0;
        std::getline(in, line);
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        return rows;
    }

    static int field_int(const std::string& text, const std::string& key) {
        const auto pos = text.find(key + "=");
        if (pos == std::string::npos) return -1;
        return std::stoi(text.substr(pos + key.size() + 1));
    }

    fs::path dir_;
};

void two_band_image(const fs::path& p, int w, int h) {
    opwg::ImagePlane img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x < w / 2) img.set(x, y, 255, 0, 0);
            else img.set(x, y, 0, 0, 255);
        }
    opwg::write_image(p.string(), img);
}

}  // namespace

TEST_F(Cli, GenerateBlobs) {
    const auto r = run("generate blobs --n 3000 --seed 7 --out " + path("a.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(path("a.csv")), 3000u);
    std::ifstream in(path("a.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "label,x1,x2");
    std::set<std::string> labels;
    while (std::getline(in, line)) labels.insert(line.substr(0, line.find(',')));
    EXPECT_EQ(labels.size(), 3u);
    const json side = json::parse(read_file(path("a.csv.json")));
    EXPECT_EQ(side["config"]["seed"], 7);
    EXPECT_EQ(side["rows"], 3000);
}

TEST_F(Cli, GenerateIsDeterministic) {
    ASSERT_EQ(run("generate moons --n 500 --seed 3 --out " + path("a.csv").string()).code, 0);
    ASSERT_EQ(run("generate moons --n 500 --seed 3 --out " + path("b.csv").string()).code, 0);
    EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));
    ASSERT_EQ(run("generate moons --n 500 --seed 4 --out " + path("c.csv").string()).code, 0);
    EXPECT_NE(read_file(path("a.csv")), read_file(path("c.csv")));
}

TEST_F(Cli, GenerateGmmHundredThousand) {
    ASSERT_EQ(run("generate gmm --k 5 --n 100000 --seed 1 --out " + path("g.csv").string()).code, 0);
    EXPECT_EQ(data_rows(path("g.csv")), 100000u);
    const json side = json::parse(read_file(path("g.csv.json")));
    EXPECT_EQ(side["generator_means"].size(), 5u);
}

TEST_F(Cli, SeedFromEnvironment) {
    ASSERT_EQ(run("generate blobs --n 100 --out " + path("env.csv").string(), "OPWG_SEED=11").code, 0);
    ASSERT_EQ(run("generate blobs --n 100 --seed 11 --out " + path("flag.csv").string()).code, 0);
    EXPECT_EQ(read_file(path("env.csv")), read_file(path("flag.csv")));
    // The flag wins over the environment.
    ASSERT_EQ(run("generate blobs --n 100 --seed 11 --out " + path("both.csv").string(), "OPWG_SEED=12").code, 0);
    EXPECT_EQ(read_file(path("both.csv")), read_file(path("flag.csv")));
}

TEST_F(Cli, GmmWithOneComponentIsGlobalMean) {
    ASSERT_EQ(run("generate varied --n 900 --seed 2 --out " + path("d.csv").string()).code, 0);
    const auto r = run("cluster gmm --k 1 --data " + path("d.csv").string() + " --out-model " + path("m.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(field_int(r.out, "K_found"), 1);
    const auto ds = opwg::make_suite("varied", 900, 2);
    const Eigen::VectorXd mean = ds.points.rowwise().mean();
    const json m = json::parse(read_file(path("m.json")));
    const auto mu = m["model"]["components"][0]["mean"].get<std::vector<double>>();
    EXPECT_NEAR(mu[0], mean(0), 1e-9);
    EXPECT_NEAR(mu[1], mean(1), 1e-9);
}

TEST_F(Cli, ClusterOutputsAndMetrics) {
    ASSERT_EQ(run("generate gmm --k 2 --n 2000 --seed 5 --out " + path("d.csv").string()).code, 0);
    const auto r = run("cluster pgmm --data " + path("d.csv").string() + " --out-model " + path("m.json").string() +
                       " --out-labels " + path("l.csv").string() + " --lambda 0.004");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("f1="), std::string::npos);
    EXPECT_NE(r.out.find("nmi="), std::string::npos);
    EXPECT_EQ(data_rows(path("l.csv")), 2000u);
    const json m = json::parse(read_file(path("m.json")));
    EXPECT_DOUBLE_EQ(m["config"]["lambda"].get<double>(), 0.004);
    EXPECT_EQ(m["metrics"]["K_found"], field_int(r.out, "K_found"));
}

TEST_F(Cli, OpwgWithWholeBatchMatchesPgmmK) {
    for (int seed : {1, 2, 3}) {
        const std::string data = path("d.csv").string();
        ASSERT_EQ(run("generate gmm --k 3 --n 3000 --seed " + std::to_string(seed) + " --out " + data).code, 0);
        const std::string common = " --data " + data + " --seed " + std::to_string(seed) + " --lambda 0.005";
        const auto p = run("cluster pgmm --cov full" + common);
        const auto o = run("cluster opwg --batch 3000 --online-cov full --offline-grid 0.005" + common);
        ASSERT_EQ(p.code, 0) << p.err;
        ASSERT_EQ(o.code, 0) << o.err;
        EXPECT_EQ(field_int(o.out, "K_found"), field_int(p.out, "K_found")) << "seed " << seed;
    }
}

TEST_F(Cli, ModeBProtocolRuns) {
    ASSERT_EQ(run("generate gmm --k 2 --n 5000 --seed 4 --out " + path("d.csv").string()).code, 0);
    const auto r = run("cluster opwg --mode B --sort-axis x --batch 1000 --data " + path("d.csv").string() +
                       " --out-model " + path("m.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = json::parse(read_file(path("m.json")));
    EXPECT_EQ(m["config"]["mode"], "B");
    EXPECT_EQ(m["config"]["batch"], 1000);
}

TEST_F(Cli, ExitCodes) {
    ASSERT_EQ(run("generate blobs --n 200 --out " + path("d.csv").string()).code, 0);
    // lambda at or above 1/(K_max * D_f) is a configuration error.
    EXPECT_EQ(run("cluster pgmm --cov full --lambda 0.007 --data " + path("d.csv").string()).code, 1);
    EXPECT_EQ(run("cluster opwg --lambda 0.009 --data " + path("d.csv").string()).code, 1);
    EXPECT_EQ(run("cluster opwg --offline-grid 0.005,0.007 --data " + path("d.csv").string()).code, 1);
    EXPECT_EQ(run("bench --suite gmm --repeats 1 --n 300 --lambda 0.02 --out-dir " + path("b").string()).code, 1);
    EXPECT_EQ(run("cluster kmeans --data " + path("d.csv").string()).code, 1);
    EXPECT_EQ(run("cluster pgmm").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("--help").code, 0);
    // Runtime failures.
    EXPECT_EQ(run("cluster pgmm --data " + path("missing.csv").string()).code, 2);
    std::ofstream(path("bad.csv")) << "x,y\n1,oops\n";
    EXPECT_EQ(run("cluster pgmm --data " + path("bad.csv").string()).code, 2);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
    ASSERT_EQ(run("generate gmm --k 2 --n 1000 --seed 2 --out " + path("d.csv").string()).code, 0);
    std::ofstream(path("run.toml")) << "[cluster]\nk-max = 9\nlambda = 0.004\n";
    const auto r = run("--config " + path("run.toml").string() + " cluster pgmm --lambda 0.003 --data " +
                       path("d.csv").string() + " --out-model " + path("m.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const json m = json::parse(read_file(path("m.json")));
    EXPECT_EQ(m["config"]["k_max"], 9);
    EXPECT_DOUBLE_EQ(m["config"]["lambda"].get<double>(), 0.003);
}

TEST_F(Cli, BenchIsDeterministic) {
    const std::string args = "bench --suite gmm --repeats 2 --n 600 --datasets gmm-k2 --no-timing --seed 5 --jobs 2";
    ASSERT_EQ(run(args + " --out-dir " + path("a").string()).code, 0);
    ASSERT_EQ(run(args + " --out-dir " + path("b").string()).code, 0);
    EXPECT_EQ(read_file(path("a/runs.csv")), read_file(path("b/runs.csv")));
    EXPECT_EQ(read_file(path("a/summary.csv")), read_file(path("b/summary.csv")));
    const std::string header = read_file(path("a/summary.csv")).substr(0, read_file(path("a/summary.csv")).find('\n'));
    EXPECT_NE(header.find("gmm-k2_f1"), std::string::npos);
    EXPECT_NE(header.find("gmm-k2_nmi"), std::string::npos);
}

TEST_F(Cli, BenchSingleRepeatSummaryEqualsRun) {
    ASSERT_EQ(run("bench --suite gmm --repeats 1 --n 600 --datasets gmm-k2 --modes A --algorithms pgmm --no-timing "
                  "--seed 3 --out-dir " +
                  path("b").string())
                  .code,
              0);
    // Pull f1 out of the single run row and the stats row.
    auto column = [](const std::string& csv, const std::string& name, int row) {
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        std::vector<std::string> header;
        {
            std::istringstream h(line);
            std::string cell;
            while (std::getline(h, cell, ',')) header.push_back(cell);
        }
        for (int i = 0; i <= row; ++i) std::getline(in, line);
        std::istringstream r(line);
        std::string cell;
        for (const auto& h : header) {
            std::getline(r, cell, ',');
            if (h == name) return cell;
        }
        return std::string();
    };
    const std::string runs = read_file(path("b/runs.csv")), stats = read_file(path("b/stats.csv"));
    ASSERT_FALSE(column(runs, "f1", 0).empty());
    EXPECT_DOUBLE_EQ(std::stod(column(runs, "f1", 0)), std::stod(column(stats, "f1_mean", 0)));
    EXPECT_DOUBLE_EQ(std::stod(column(runs, "nmi", 0)), std::stod(column(stats, "nmi_mean", 0)));
    EXPECT_DOUBLE_EQ(std::stod(column(runs, "K_found", 0)), std::stod(column(stats, "K_mean", 0)));
}

TEST_F(Cli, SegmentTwoBands) {
    two_band_image(path("in.png"), 64, 48);
    const auto r = run("segment " + path("in.png").string() + " --out " + path("out.png").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_EQ(field_int(r.out, "K"), 2);
    const auto img = opwg::read_image(path("out.png").string());
    std::set<std::array<std::uint8_t, 3>> colors;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.pixel(x, y);
            colors.insert({p[0], p[1], p[2]});
        }
    EXPECT_EQ(colors.size(), 2u);
    const auto* left = img.pixel(0, 0);
    const auto* right = img.pixel(63, 47);
    EXPECT_FALSE(left[0] == right[0] && left[1] == right[1] && left[2] == right[2]);
    const json side = json::parse(read_file(path("out.png.json")));
    EXPECT_EQ(side["K"], 2);
    EXPECT_EQ(side["config"]["rows_per_batch"], 4);
}

TEST_F(Cli, SegmentUniform) {
    opwg::ImagePlane img(20, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 20; ++x) img.set(x, y, 90, 90, 200);
    opwg::write_image(path("u.ppm").string(), img);
    const auto r = run("segment " + path("u.ppm").string() + " --out " + path("u_out.ppm").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(field_int(r.out, "K"), 1);
}

TEST_F(Cli, SegmentBenchmarkSizedImage) {
    two_band_image(path("bsd.png"), 321, 482);
    const auto r = run("segment " + path("bsd.png").string() + " --out " + path("bsd_out.png").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(field_int(r.out, "batches"), 121);
    const auto out = opwg::read_image(path("bsd_out.png").string());
    EXPECT_EQ(out.width, 321);
    EXPECT_EQ(out.height, 482);
}

TEST_F(Cli, SelectLambda) {
    ASSERT_EQ(run("generate gmm --k 3 --n 1500 --seed 6 --out " + path("d.csv").string()).code, 0);
    const auto r = run("select-lambda --data " + path("d.csv").string() + " --grid 0.003,0.004,0.005 --out " +
                       path("s.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("selected lambda="), std::string::npos);
    const json s = json::parse(read_file(path("s.json")));
    EXPECT_EQ(s["grid"].size(), 3u);
    EXPECT_EQ(run("select-lambda --data " + path("d.csv").string() + " --grid 0.003,0.008").code, 1);
}
