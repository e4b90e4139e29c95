// opwg command-line tool: data generation, clustering, benchmarking,
// image segmentation and lambda selection.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "opwg/opwg.hpp"
#include "opwg/png_io.hpp"
#include "opwg/runner.hpp"

namespace {

using opwg::json;

// Options shared by cluster, bench and select-lambda.
struct AlgoFlags {
    int k_max = 25;
    double lambda = 0.005;
    std::vector<double> offline_grid{0.003, 0.004, 0.005, 0.006};
    std::string online_cov = "diagonal";
    std::string offline_cov = "full";
    std::string whole_cov = "full";
    int fixed_k = 0;
    std::string mode = "A";
    std::string sort_axis = "x";
    long batch = 1000;
    std::string weight_rule = "pi_times_n";
    int max_iter = 200;
    double tol = 1e-6;
    double epsilon = 1e-6;
};

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
    cmd->add_option("--seed", seed, "Master seed")->envname("OPWG_SEED")->capture_default_str();
}

void add_algo_flags(CLI::App* cmd, AlgoFlags& f) {
    cmd->add_option("--k-max", f.k_max, "Initial number of components")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lambda", f.lambda, "Penalty weight (online phase for opwg, whole data for pgmm)")
        ->capture_default_str();
    cmd->add_option("--offline-grid", f.offline_grid, "Offline lambda grid for opwg, chosen by BIC")
        ->delimiter(',')
        ->capture_default_str();
    const auto kinds = CLI::IsMember({"diagonal", "diag", "full"});
    cmd->add_option("--online-cov", f.online_cov, "opwg online covariance")->check(kinds)->capture_default_str();
    cmd->add_option("--offline-cov", f.offline_cov, "opwg offline covariance")->check(kinds)->capture_default_str();
    cmd->add_option("--cov", f.whole_cov, "Covariance for pgmm, wgmm and gmm")->check(kinds)->capture_default_str();
    cmd->add_option("--k", f.fixed_k, "Fixed K for gmm (0 = use the K pgmm finds)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--mode", f.mode, "Stream order: A (shuffled) or B (sorted)")
        ->check(CLI::IsMember({"A", "B"}))
        ->capture_default_str();
    cmd->add_option("--sort-axis", f.sort_axis, "Mode B sort axis")->check(CLI::IsMember({"x", "y"}))->capture_default_str();
    cmd->add_option("--batch", f.batch, "Batch size for opwg")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--weight-rule", f.weight_rule, "Prototype weight rule")
        ->check(CLI::IsMember({"pi", "pi_times_n"}))
        ->capture_default_str();
    cmd->add_option("--max-iter", f.max_iter, "EM iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--tol", f.tol, "Relative convergence tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--epsilon", f.epsilon, "Penalty epsilon")->check(CLI::PositiveNumber)->capture_default_str();
}

opwg::StreamOrder stream_order(const AlgoFlags& f) {
    opwg::StreamOrder o;
    o.mode = f.mode == "B" ? opwg::StreamMode::B : opwg::StreamMode::A;
    o.sort_axis = f.sort_axis == "y" ? 1 : 0;
    return o;
}

opwg::RunSettings run_settings(const AlgoFlags& f, std::uint64_t seed) {
    opwg::RunSettings s;
    s.k_max = f.k_max;
    s.lambda = f.lambda;
    s.offline_lambda_grid = f.offline_grid;
    s.online_covariance = opwg::covariance_kind_from_string(f.online_cov);
    s.offline_covariance = opwg::covariance_kind_from_string(f.offline_cov);
    s.whole_data_covariance = opwg::covariance_kind_from_string(f.whole_cov);
    s.fixed_k = f.fixed_k;
    s.order = stream_order(f);
    s.batch_size = f.batch;
    s.prototype_weight_rule = opwg::prototype_weight_rule_from_string(f.weight_rule);
    s.max_iterations = f.max_iter;
    s.tolerance = f.tol;
    s.epsilon = f.epsilon;
    s.seed = seed;
    return s;
}

json settings_json(const opwg::RunSettings& s) {
    return {{"k_max", s.k_max},
            {"lambda", s.lambda},
            {"offline_lambda_grid", s.offline_lambda_grid},
            {"online_covariance", opwg::to_string(s.online_covariance)},
            {"offline_covariance", opwg::to_string(s.offline_covariance)},
            {"whole_data_covariance", opwg::to_string(s.whole_data_covariance)},
            {"fixed_k", s.fixed_k},
            {"mode", s.order.mode == opwg::StreamMode::A ? "A" : "B"},
            {"sort_axis", s.order.sort_axis == 0 ? "x" : "y"},
            {"batch", s.batch_size},
            {"prototype_weight_rule", opwg::to_string(s.prototype_weight_rule)},
            {"max_iterations", s.max_iterations},
            {"tolerance", s.tolerance},
            {"epsilon", s.epsilon},
            {"seed", s.seed}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw opwg::Error("cannot write '" + path + "'");
    out << text;
    if (!out) throw opwg::Error("write failed for '" + path + "'");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

opwg::CsvData load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw opwg::Error("cannot open '" + path + "'");
    return opwg::read_points_csv(in);
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
    std::string name;
    long n = 10000;
    int k = 2;
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
    const opwg::LabeledDataset ds =
        a.name == "gmm" ? opwg::make_gmm(a.k, a.n, a.seed) : opwg::make_suite(a.name, a.n, a.seed);
    std::ostringstream csv;
    opwg::write_dataset_csv(csv, ds);
    if (a.out.empty() || a.out == "-") {
        std::cout << csv.str();
        return 0;
    }
    write_text(a.out, csv.str());
    json means = json::array();
    for (const auto& m : ds.generator_means) means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
    write_json(a.out + ".json", {{"command", "generate"},
                                 {"config", {{"name", a.name}, {"n", a.n}, {"k", a.k}, {"seed", a.seed}}},
                                 {"rows", ds.size()},
                                 {"classes", ds.num_classes()},
                                 {"generator_means", means}});
    std::cerr << "wrote " << ds.size() << " rows to " << a.out << "\n";
    return 0;
}

// ---- cluster --------------------------------------------------------------

struct ClusterArgs {
    std::string algorithm;
    std::string data;
    std::string out_model;
    std::string out_labels;
    std::string out_prototypes;
    AlgoFlags flags;
    std::uint64_t seed = 0;
};

int cmd_cluster(const ClusterArgs& a) {
    const opwg::RunSettings s = run_settings(a.flags, a.seed);
    const opwg::Algorithm algorithm = opwg::algorithm_from_string(a.algorithm);
    const opwg::CsvData data = load_csv(a.data);
    opwg::check_lambda_bounds(algorithm, s, static_cast<int>(data.points.rows()));

    const auto t0 = std::chrono::steady_clock::now();
    const opwg::RunOutcome r = opwg::run_algorithm(algorithm, data.points, data.weights, s);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    json metrics = {{"K_found", r.k()}, {"runtime_ms", ms}};
    std::cout << "algorithm=" << a.algorithm << " K_found=" << r.k();
    if (data.labels) {
        const double f1 = opwg::pairwise_f1(*data.labels, r.labels);
        const double nmi = opwg::nmi(*data.labels, r.labels);
        metrics["f1"] = f1;
        metrics["nmi"] = nmi;
        std::cout << " f1=" << fixed(f1, 4) << " nmi=" << fixed(nmi, 4);
    }
    std::cout << " runtime_ms=" << fixed(ms, 1) << "\n";
    for (const auto& d : r.diagnostics) std::cerr << "warning: " << d << "\n";

    json config = settings_json(s);
    config["algorithm"] = a.algorithm;
    config["data"] = a.data;
    json doc = {{"command", "cluster"},
                {"config", config},
                {"model", opwg::model_to_json(r.model)},
                {"metrics", metrics},
                {"iterations", r.fit.iterations},
                {"converged", r.fit.converged},
                {"log_likelihood", r.fit.log_likelihood},
                {"bic", r.fit.bic},
                {"diagnostics", r.diagnostics}};
    if (algorithm == opwg::Algorithm::Opwg) {
        doc["offline_lambda"] = r.offline_lambda;
        doc["prototype_count"] = r.prototypes->size();
    }
    if (!a.out_model.empty()) write_json(a.out_model, doc);
    if (!a.out_labels.empty()) {
        std::ostringstream os;
        os << "label\n";
        for (int l : r.labels) os << l << "\n";
        write_text(a.out_labels, os.str());
        write_json(a.out_labels + ".json", {{"command", "cluster"}, {"config", config}, {"metrics", metrics}});
    }
    if (!a.out_prototypes.empty()) {
        if (!r.prototypes) throw opwg::ConfigError("--out-prototypes is only available for opwg");
        if (opwg::has_extension(a.out_prototypes, ".json")) {
            json pj = opwg::prototypes_to_json(*r.prototypes);
            pj["config"] = config;
            write_json(a.out_prototypes, pj);
        } else {
            std::ostringstream os;
            opwg::write_prototypes_csv(os, *r.prototypes);
            write_text(a.out_prototypes, os.str());
            write_json(a.out_prototypes + ".json", {{"command", "cluster"}, {"config", config}});
        }
    }
    return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    std::string suite = "gmm";
    int repeats = 10;
    long n = 10000;
    std::vector<std::string> algorithms{"opwg", "pgmm", "wgmm", "gmm"};
    std::vector<std::string> modes{"A", "B"};
    std::vector<std::string> datasets;  // empty = every dataset of the suite
    std::string out_dir = ".";
    int jobs = 1;
    bool no_timing = false;
    AlgoFlags flags;
    std::uint64_t seed = 0;
};

struct BenchRow {
    std::string dataset;
    std::string mode;
    std::string algorithm;
    std::uint64_t seed = 0;
    int repeat = 0;
    int k_found = 0;
    double f1 = 0.0;
    double nmi = 0.0;
    double runtime_ms = 0.0;
    std::string error;
};

struct BenchTask {
    std::string dataset;
    int repeat = 0;
};

opwg::LabeledDataset bench_dataset(const std::string& name, long n, std::uint64_t seed) {
    if (name.rfind("gmm-k", 0) == 0) return opwg::make_gmm(std::stoi(name.substr(5)), n, seed);
    return opwg::make_suite(name, n, seed);
}

std::vector<std::string> suite_datasets(const std::string& suite) {
    if (suite == "gmm") return {"gmm-k2", "gmm-k5", "gmm-k7"};
    // DB1..DB5, then the noise set.
    return {"circles", "moons", "varied", "aniso", "blobs", "noise"};
}

std::vector<BenchRow> run_bench_task(const BenchArgs& a, const BenchTask& task) {
    const std::uint64_t seed = opwg::substream_seed(a.seed, "repeat", static_cast<std::uint64_t>(task.repeat));
    std::vector<BenchRow> rows;
    opwg::LabeledDataset ds;
    std::string gen_error;
    try {
        ds = bench_dataset(task.dataset, a.n, seed);
    } catch (const std::exception& e) {
        gen_error = e.what();
    }
    for (const auto& mode : a.modes) {
        AlgoFlags f = a.flags;
        f.mode = mode;
        int pgmm_k = 0;
        for (const auto& name : a.algorithms) {
            BenchRow row{task.dataset, mode, name, seed, task.repeat};
            if (!gen_error.empty()) {
                row.error = gen_error;
                rows.push_back(row);
                continue;
            }
            opwg::RunSettings s = run_settings(f, seed);
            const auto algorithm = opwg::algorithm_from_string(name);
            // GMM starts from the number of clusters PGMM found, when it has run.
            if (algorithm == opwg::Algorithm::Gmm && s.fixed_k == 0 && pgmm_k > 0) s.fixed_k = pgmm_k;
            try {
                const auto t0 = std::chrono::steady_clock::now();
                const opwg::RunOutcome r = opwg::run_algorithm(algorithm, ds.points, std::nullopt, s);
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                row.k_found = r.k();
                row.f1 = opwg::pairwise_f1(ds.labels, r.labels);
                row.nmi = opwg::nmi(ds.labels, r.labels);
                row.runtime_ms = a.no_timing ? 0.0 : ms;
                if (algorithm == opwg::Algorithm::Pgmm) pgmm_k = r.k();
            } catch (const opwg::ConfigError&) {
                throw;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            rows.push_back(row);
        }
    }
    return rows;
}

struct Stat {
    double mean = 0.0;
    double sd = 0.0;
};

Stat summarize(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

int cmd_bench(const BenchArgs& a) {
    const std::vector<std::string> datasets = a.datasets.empty() ? suite_datasets(a.suite) : a.datasets;
    for (const auto& name : a.algorithms) {
        const auto algorithm = opwg::algorithm_from_string(name);
        for (const auto& mode : a.modes) {
            AlgoFlags f = a.flags;
            f.mode = mode;
            opwg::check_lambda_bounds(algorithm, run_settings(f, a.seed), 2);
        }
    }

    std::vector<BenchTask> tasks;
    for (const auto& d : datasets)
        for (int r = 0; r < a.repeats; ++r) tasks.push_back({d, r});

    std::vector<std::vector<BenchRow>> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::optional<std::string> config_error;
    auto worker = [&]() {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                results[i] = run_bench_task(a, tasks[i]);
            } catch (const opwg::ConfigError& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                config_error = e.what();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (config_error) throw opwg::ConfigError(*config_error);

    std::vector<BenchRow> rows;
    for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
    auto rank = [](const std::vector<std::string>& order, const std::string& v) {
        return std::find(order.begin(), order.end(), v) - order.begin();
    };
    std::stable_sort(rows.begin(), rows.end(), [&](const BenchRow& x, const BenchRow& y) {
        const auto kx = std::make_tuple(rank(datasets, x.dataset), rank(a.modes, x.mode), rank(a.algorithms, x.algorithm), x.repeat);
        const auto ky = std::make_tuple(rank(datasets, y.dataset), rank(a.modes, y.mode), rank(a.algorithms, y.algorithm), y.repeat);
        return kx < ky;
    });

    std::ostringstream runs;
    runs << "dataset,mode,algorithm,seed,K_found,f1,nmi,runtime_ms,error\n";
    runs << std::setprecision(10);
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        runs << r.dataset << ',' << r.mode << ',' << r.algorithm << ',' << r.seed << ',' << r.k_found << ',' << r.f1
             << ',' << r.nmi << ',' << (a.no_timing ? std::string("0") : fixed(r.runtime_ms, 3)) << ',' << err << "\n";
    }

    // Aggregate per (dataset, mode, algorithm), skipping failed rows.
    struct Agg {
        std::vector<double> f1, nmi, k, ms;
        int failures = 0;
    };
    std::map<std::tuple<long, long, long>, Agg> agg;
    for (const auto& r : rows) {
        auto& g = agg[{rank(datasets, r.dataset), rank(a.modes, r.mode), rank(a.algorithms, r.algorithm)}];
        if (!r.error.empty()) {
            ++g.failures;
            continue;
        }
        g.f1.push_back(r.f1);
        g.nmi.push_back(r.nmi);
        g.k.push_back(r.k_found);
        g.ms.push_back(r.runtime_ms);
    }

    std::ostringstream stats;
    stats << "dataset,mode,algorithm,runs,failures,f1_mean,f1_std,nmi_mean,nmi_std,K_mean,K_std,runtime_ms_mean\n";
    for (const auto& [key, g] : agg) {
        const auto [di, mi, ai] = key;
        const Stat f1 = summarize(g.f1), nmi = summarize(g.nmi), k = summarize(g.k), ms = summarize(g.ms);
        stats << datasets[static_cast<std::size_t>(di)] << ',' << a.modes[static_cast<std::size_t>(mi)] << ','
              << a.algorithms[static_cast<std::size_t>(ai)] << ',' << g.f1.size() << ',' << g.failures << ','
              << fixed(f1.mean, 4) << ',' << fixed(f1.sd, 4) << ',' << fixed(nmi.mean, 4) << ',' << fixed(nmi.sd, 4)
              << ',' << fixed(k.mean, 2) << ',' << fixed(k.sd, 2) << ',' << fixed(ms.mean, 1) << "\n";
    }

    // Wide layout: one row per mode and algorithm, an F1/NMI pair per dataset.
    std::ostringstream summary;
    summary << "mode,algorithm";
    for (const auto& d : datasets) summary << ',' << d << "_f1," << d << "_nmi," << d << "_K";
    summary << "\n";
    std::ostringstream table;
    for (std::size_t mi = 0; mi < a.modes.size(); ++mi) {
        table << "Mode " << a.modes[mi] << "\n" << std::left << std::setw(8) << "";
        for (const auto& d : datasets) table << std::setw(20) << d;
        table << "\n" << std::setw(8) << "";
        for (std::size_t i = 0; i < datasets.size(); ++i) table << std::setw(7) << "F1" << std::setw(7) << "NMI" << std::setw(6) << "K";
        table << "\n";
        for (std::size_t ai = 0; ai < a.algorithms.size(); ++ai) {
            summary << a.modes[mi] << ',' << a.algorithms[ai];
            std::string upper = a.algorithms[ai];
            for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            table << std::setw(8) << upper;
            for (std::size_t di = 0; di < datasets.size(); ++di) {
                const auto it = agg.find({static_cast<long>(di), static_cast<long>(mi), static_cast<long>(ai)});
                if (it == agg.end() || it->second.f1.empty()) {
                    summary << ",,,";
                    table << std::setw(7) << "-" << std::setw(7) << "-" << std::setw(6) << "-";
                    continue;
                }
                const Stat f1 = summarize(it->second.f1), nmi = summarize(it->second.nmi), k = summarize(it->second.k);
                summary << ',' << fixed(f1.mean, 4) << ',' << fixed(nmi.mean, 4) << ',' << fixed(k.mean, 2);
                table << std::setw(7) << fixed(f1.mean, 2) << std::setw(7) << fixed(nmi.mean, 2) << std::setw(6)
                      << fixed(k.mean, 2);
            }
            summary << "\n";
            table << "\n";
        }
        table << "\n";
    }

    const std::string dir = a.out_dir.empty() ? "." : a.out_dir;
    std::filesystem::create_directories(dir);
    write_text(dir + "/runs.csv", runs.str());
    write_text(dir + "/stats.csv", stats.str());
    write_text(dir + "/summary.csv", summary.str());
    json config = settings_json(run_settings(a.flags, a.seed));
    config.erase("mode");
    config["suite"] = a.suite;
    config["datasets"] = datasets;
    config["repeats"] = a.repeats;
    config["n"] = a.n;
    config["algorithms"] = a.algorithms;
    config["modes"] = a.modes;
    config["jobs"] = a.jobs;
    config["no_timing"] = a.no_timing;
    write_json(dir + "/bench.json", {{"command", "bench"},
                                     {"config", config},
                                     {"outputs", {"runs.csv", "stats.csv", "summary.csv"}},
                                     {"rows", rows.size()}});
    std::cout << table.str();
    return 0;
}

// ---- segment --------------------------------------------------------------

struct SegmentArgs {
    std::string input;
    std::string out;
    std::string out_model;
    std::string render = "palette";
    int rows_per_batch = 4;
    int k_max = 25;
    double online_lambda = 0.03;
    std::vector<double> offline_grid{0.006, 0.005, 0.004};
    std::string online_cov = "diagonal";
    std::string offline_cov = "diagonal";
    std::uint64_t seed = 0;
};

int cmd_segment(const SegmentArgs& a) {
    opwg::SegmentConfig c = opwg::SegmentConfig::defaults();
    c.rows_per_batch = a.rows_per_batch;
    c.opwg.online.k_max = a.k_max;
    c.opwg.online.lambda = a.online_lambda;
    c.opwg.online.covariance_kind = opwg::covariance_kind_from_string(a.online_cov);
    c.opwg.online.rng_seed = a.seed;
    c.opwg.offline = c.opwg.online;
    c.opwg.offline.covariance_kind = opwg::covariance_kind_from_string(a.offline_cov);
    if (!a.offline_grid.empty()) c.opwg.offline.lambda = a.offline_grid.front();
    c.opwg.offline_lambda_grid = a.offline_grid;

    const opwg::ImagePlane image = opwg::read_image(a.input);
    const auto t0 = std::chrono::steady_clock::now();
    const opwg::SegmentResult r = opwg::segment(image, c);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";

    const opwg::ImagePlane rendered =
        a.render == "mean-color" ? opwg::render_mean_color(r.map, image) : opwg::render_palette(r.map);
    opwg::write_image(a.out, rendered);

    json config = {{"input", a.input},
                   {"rows_per_batch", a.rows_per_batch},
                   {"k_max", a.k_max},
                   {"online_lambda", a.online_lambda},
                   {"offline_lambda_grid", a.offline_grid},
                   {"online_covariance", opwg::to_string(c.opwg.online.covariance_kind)},
                   {"offline_covariance", opwg::to_string(c.opwg.offline.covariance_kind)},
                   {"render", a.render},
                   {"seed", a.seed}};
    json palette = json::array();
    for (const auto& p : r.map.palette) palette.push_back({p[0], p[1], p[2]});
    write_json(a.out_model.empty() ? a.out + ".json" : a.out_model,
               {{"command", "segment"},
                {"config", config},
                {"width", image.width},
                {"height", image.height},
                {"K", r.map.k},
                {"offline_lambda", r.final_fit.lambda},
                {"batches", r.batches},
                {"prototypes", r.prototypes},
                {"pixel_counts", r.pixel_counts},
                {"palette", palette},
                {"model", opwg::model_to_json(r.final_fit.fit.model)},
                {"warnings", r.warnings}});
    std::cout << "K=" << r.map.k << " batches=" << r.batches << " prototypes=" << r.prototypes
              << " runtime_ms=" << fixed(ms, 1) << "\n";
    return 0;
}

// ---- select-lambda --------------------------------------------------------

struct SelectArgs {
    std::string data;
    std::vector<double> grid{0.003, 0.004, 0.005, 0.006};
    int k_max = 25;
    std::string cov = "full";
    int max_iter = 200;
    double tol = 1e-6;
    double epsilon = 1e-6;
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_select_lambda(const SelectArgs& a) {
    const opwg::CsvData data = load_csv(a.data);
    opwg::PwgConfig c;
    c.k_max = a.k_max;
    c.covariance_kind = opwg::covariance_kind_from_string(a.cov);
    c.max_iterations = a.max_iter;
    c.tolerance = a.tol;
    c.epsilon = a.epsilon;
    c.rng_seed = a.seed;
    c.lambda = a.grid.empty() ? 0.0 : a.grid.front();
    const opwg::WeightedDataset ds(data.points, data.weights ? *data.weights
                                                             : Eigen::VectorXd::Ones(data.points.cols()));
    const opwg::LambdaSelection sel = opwg::select_lambda(ds, c, a.grid);

    json grid = json::array();
    std::cout << "lambda,bic,K\n" << std::setprecision(10);
    for (const auto& g : sel.grid) {
        json row = {{"lambda", g.lambda}, {"bic", g.bic}, {"K", g.k}};
        if (g.error) row["error"] = *g.error;
        grid.push_back(row);
        std::cout << g.lambda << ',' << g.bic << ',' << g.k << (g.error ? " (failed)" : "") << "\n";
    }
    std::cout << "selected lambda=" << sel.lambda << " K=" << sel.fit.k() << "\n";
    if (!a.out.empty())
        write_json(a.out, {{"command", "select-lambda"},
                           {"config",
                            {{"data", a.data},
                             {"grid", a.grid},
                             {"k_max", a.k_max},
                             {"covariance", opwg::to_string(c.covariance_kind)},
                             {"max_iterations", a.max_iter},
                             {"tolerance", a.tol},
                             {"epsilon", a.epsilon},
                             {"seed", a.seed}}},
                           {"selected_lambda", sel.lambda},
                           {"grid", grid},
                           {"model", opwg::model_to_json(sel.fit.model)}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online clustering by penalized weighted Gaussian mixtures"};
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a synthetic labeled dataset as CSV");
    g->add_option("name", gen.name, "Dataset: circles, moons, blobs, varied, aniso, noise or gmm")
        ->required()
        ->check(CLI::IsMember({"circles", "moons", "blobs", "varied", "aniso", "noise", "gmm"}));
    g->add_option("--n", gen.n, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();
    g->add_option("--k", gen.k, "Components for gmm")->check(CLI::PositiveNumber)->capture_default_str();
    g->add_option("--out", gen.out, "Output CSV (stdout when omitted)");
    add_seed(g, gen.seed);

    ClusterArgs cl;
    auto* c = app.add_subcommand("cluster", "Cluster a CSV dataset");
    c->add_option("algorithm", cl.algorithm, "opwg, pgmm, wgmm or gmm")
        ->required()
        ->check(CLI::IsMember({"opwg", "pgmm", "wgmm", "gmm"}));
    c->add_option("--data", cl.data, "Input CSV (coordinates, optional label and weight columns)")->required();
    c->add_option("--out-model", cl.out_model, "Model JSON with the effective config and metrics");
    c->add_option("--out-labels", cl.out_labels, "Per-point labels CSV");
    c->add_option("--out-prototypes", cl.out_prototypes, "opwg prototypes (.json or CSV)");
    add_algo_flags(c, cl.flags);
    add_seed(c, cl.seed);

    BenchArgs be;
    auto* b = app.add_subcommand("bench", "Run the algorithm x dataset x mode grid");
    b->add_option("--suite", be.suite, "gmm (K=2,5,7) or scikit (DB1..DB5 and noise)")
        ->check(CLI::IsMember({"gmm", "scikit"}))
        ->capture_default_str();
    b->add_option("--repeats", be.repeats, "Runs per dataset")->check(CLI::PositiveNumber)->capture_default_str();
    b->add_option("--n", be.n, "Samples per dataset")->check(CLI::PositiveNumber)->capture_default_str();
    b->add_option("--algorithms", be.algorithms, "Subset of opwg,pgmm,wgmm,gmm")
        ->delimiter(',')
        ->check(CLI::IsMember({"opwg", "pgmm", "wgmm", "gmm"}))
        ->capture_default_str();
    b->add_option("--modes", be.modes, "Stream orders to run")
        ->delimiter(',')
        ->check(CLI::IsMember({"A", "B"}))
        ->capture_default_str();
    b->add_option("--datasets", be.datasets, "Restrict to these datasets (e.g. gmm-k2,blobs)")->delimiter(',');
    b->add_option("--out-dir", be.out_dir, "Directory for runs.csv, stats.csv, summary.csv")->capture_default_str();
    b->add_option("--jobs", be.jobs, "Concurrent runs")->check(CLI::PositiveNumber)->capture_default_str();
    b->add_flag("--no-timing", be.no_timing, "Record runtime_ms as 0 so output is byte-reproducible");
    add_algo_flags(b, be.flags);
    b->get_option("--batch")->description("Batch size for opwg (default n/100, i.e. 100 batches)")->default_str("n/100");
    b->get_option("--mode")->description("Ignored by bench; use --modes");
    add_seed(b, be.seed);

    SegmentArgs se;
    auto* s = app.add_subcommand("segment", "Segment a color image (PNG or PPM) by L*a*b* clustering");
    s->add_option("image", se.input, "Input image")->required()->check(CLI::ExistingFile);
    s->add_option("--out", se.out, "Output label image (.png or .ppm)")->required();
    s->add_option("--out-model", se.out_model, "Sidecar JSON (default: <out>.json)");
    s->add_option("--render", se.render, "palette or mean-color")
        ->check(CLI::IsMember({"palette", "mean-color"}))
        ->capture_default_str();
    s->add_option("--rows-per-batch", se.rows_per_batch, "Image rows per batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    s->add_option("--k-max", se.k_max, "Initial number of components")->check(CLI::PositiveNumber)->capture_default_str();
    s->add_option("--online-lambda", se.online_lambda, "Online penalty weight")->capture_default_str();
    s->add_option("--offline-grid", se.offline_grid, "Offline lambda grid")->delimiter(',')->capture_default_str();
    const auto kinds = CLI::IsMember({"diagonal", "diag", "full"});
    s->add_option("--online-cov", se.online_cov, "Online covariance")->check(kinds)->capture_default_str();
    s->add_option("--offline-cov", se.offline_cov, "Offline covariance")->check(kinds)->capture_default_str();
    add_seed(s, se.seed);

    SelectArgs sl;
    auto* l = app.add_subcommand("select-lambda", "Choose lambda from a grid by BIC");
    l->add_option("--data", sl.data, "Input CSV")->required();
    l->add_option("--grid", sl.grid, "Candidate lambdas")->delimiter(',')->capture_default_str();
    l->add_option("--k-max", sl.k_max, "Initial number of components")->check(CLI::PositiveNumber)->capture_default_str();
    l->add_option("--cov", sl.cov, "Covariance kind")->check(kinds)->capture_default_str();
    l->add_option("--max-iter", sl.max_iter, "EM iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
    l->add_option("--tol", sl.tol, "Relative convergence tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    l->add_option("--epsilon", sl.epsilon, "Penalty epsilon")->check(CLI::PositiveNumber)->capture_default_str();
    l->add_option("--out", sl.out, "Result JSON");
    add_seed(l, sl.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (g->parsed()) return cmd_generate(gen);
        if (c->parsed()) return cmd_cluster(cl);
        if (b->parsed()) {
            // Without an explicit --batch, keep the 100-batch protocol at any N.
            if (b->get_option("--batch")->count() == 0) be.flags.batch = std::max(1L, be.n / 100);
            return cmd_bench(be);
        }
        if (s->parsed()) return cmd_segment(se);
        if (l->parsed()) return cmd_select_lambda(sl);
    } catch (const opwg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
