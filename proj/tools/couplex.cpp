// couplex <kind> --config <path> [--workers N] [--out DIR]
// couplex list-specs [--json]

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "couplex.h"

namespace {

const char* const kKinds[] = {"simulate",         "bsde",         "g-semigroup",     "g-heat",        "verify-main1",
                              "verify-corollary", "verify-main2", "verify-girsanov", "schedule-check"};

unsigned env_workers() {
    const char* v = std::getenv("COUPLEX_WORKERS");
    if (!v || !*v) return 1;
    char* end = nullptr;
    const unsigned long n = std::strtoul(v, &end, 10);
    if (*end || n == 0) {
        std::cerr << "couplex: ignoring COUPLEX_WORKERS=" << v << "\n";
        return 1;
    }
    return static_cast<unsigned>(n);
}

int list_specs(bool raw) {
    char* text = nullptr;
    if (couplex_catalogue_json(&text) != COUPLEX_OK) {
        std::cerr << "couplex: " << couplex_last_error() << "\n";
        return 1;
    }
    const std::string s(text);
    couplex_string_free(text);
    if (raw) {
        std::cout << s << "\n";
        return 0;
    }
    const auto cat = nlohmann::json::parse(s);
    for (const auto& e : cat) {
        std::cout << e["id"].get<std::string>() << "  d=" << e["d"] << "  " << e["mode"].get<std::string>() << "\n ";
        for (const auto& [k, v] : e["constants"]["hypothesis"].items()) std::cout << " " << k << "=" << v.dump();
        std::cout << "\n  L=" << e["constants"]["L"].dump() << " mu=" << e["constants"]["mu"].dump()
                  << " theta=" << e["constants"]["theta"].dump() << "\n";
    }
    return 0;
}

int run(const std::string& kind, const std::string& config_path, unsigned workers, const std::string& out_dir) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "couplex: cannot read " << config_path << "\n";
        return 1;
    }
    std::ostringstream os;
    os << in.rdbuf();
    const std::string config = os.str();
    const std::string base = std::filesystem::path(config_path).parent_path().string();

    couplex_run_options opt{};
    opt.workers = workers;
    opt.out_dir = out_dir.empty() ? nullptr : out_dir.c_str();
    opt.base_dir = base.c_str();
    opt.write_files = 1;
    couplex_result* r = nullptr;
    if (couplex_run(kind.c_str(), config.c_str(), &opt, &r) != COUPLEX_OK) {
        std::cerr << "couplex: " << couplex_last_error() << "\n";
        return 1;
    }
    const int code = couplex_result_exit_code(r);
    if (couplex_result_error_code(r) != COUPLEX_OK)
        std::cerr << "couplex: " << couplex_status_string(couplex_result_error_code(r)) << ": "
                  << couplex_result_error(r) << "\n";
    std::cout << kind << ": " << couplex_result_status(r) << " -> " << couplex_result_out_dir(r) << "\n";
    couplex_result_free(r);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupling and gradient-estimate experiments"};
    app.set_version_flag("--version", std::string(couplex_version()));
    app.require_subcommand(1);

    std::string config, out;
    unsigned workers = 0;
    for (const char* k : kKinds) {
        auto* sub = app.add_subcommand(k, std::string("run a ") + k + " experiment");
        sub->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--workers", workers, "worker threads (default: COUPLEX_WORKERS or 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory");
    }
    bool raw = false;
    auto* list = app.add_subcommand("list-specs", "print the built-in problems with their constants");
    list->add_flag("--json", raw, "print the raw JSON catalogue");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (list->parsed()) return list_specs(raw);
    const std::string kind = app.get_subcommands().front()->get_name();
    return run(kind, config, workers ? workers : env_workers(), out);
}
