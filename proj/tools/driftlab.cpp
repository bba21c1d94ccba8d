// driftlab — command-line front end: every experiment is a subcommand taking
// a JSON config; reports are JSON, ladder outputs are CSV. Exit codes:
// 0 success, 2 diagnostic fail, 1 config/runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "driftlab/run.hpp"

namespace fs = std::filesystem;
using driftlab::json;

namespace {

int run_command(const std::string& op, const std::string& config_path, const std::string& out_dir,
                int threads) {
    driftlab::set_thread_budget(threads);
    json cfg;
    try {
        std::ifstream in(config_path);
        if (!in) {
            std::cerr << "error: cannot open config '" << config_path << "'\n";
            return 1;
        }
        cfg = json::parse(in);
    } catch (const std::exception& e) {
        std::cerr << "error: config parse failed: " << e.what() << "\n";
        return 1;
    }
    try {
        const auto rr = driftlab::run_experiment(op, cfg);
        fs::create_directories(out_dir);
        const fs::path report_path = fs::path(out_dir) / (op + "_report.json");
        std::ofstream rep(report_path);
        rep << rr.report.dump(2) << "\n";
        for (const auto& [name, content] : rr.artifacts) {
            std::ofstream art(fs::path(out_dir) / name, std::ios::binary);
            art << content;
        }
        std::cout << rr.report.dump(2) << "\n";
        return rr.exit_code;
    } catch (const driftlab::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void print_catalog() {
    std::printf("%-24s %-8s %s\n", "kind", "role", "reference");
    for (const auto& e : driftlab::field_catalog())
        std::printf("%-24s %-8s %s\n", e.name.c_str(), e.role.c_str(), e.reference.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftlab: mixed-norm/Morrey drift admissibility and SDE estimate laboratory"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
    std::string op, config_path, out_dir = "out";
    int threads = driftlab::thread_budget();
    if (const char* env = std::getenv("DRIFTLAB_THREADS")) threads = std::atoi(env);
    run->add_option("op", op, "operation name (e.g. morrey-norm, exit-mean)")->required();
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--out-dir", out_dir, "output directory for report and CSV artifacts");
    run->add_option("--threads", threads, "worker budget (results are identical at any value)");

    auto* list = app.add_subcommand("list-catalog", "list the field catalog");

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) {
        print_catalog();
        return 0;
    }
    return run_command(op, config_path, out_dir, threads);
}
