#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "couplex/error.hpp"

namespace couplex {

enum class ExperimentKind {
    simulate,
    bsde,
    g_semigroup,
    g_heat,
    verify_main1,
    verify_corollary,
    verify_main2,
    verify_girsanov,
    schedule_check,
};

const char* to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);
const std::vector<ExperimentKind>& experiment_kinds();

struct RunOptions {
    unsigned workers = 1;
    std::string out_dir;   // empty: the config's "output_dir", else "out"
    std::string base_dir;  // resolves relative spec paths in the config
    bool write_files = true;
};

/// exit_code: 0 pass, 2 verification failed, 1 error. On a budget error the
/// best-so-far results are still produced.
struct RunOutcome {
    int exit_code = 1;
    std::string status;  // pass, fail or error
    std::optional<ErrorCode> error_code;
    std::string error;
    std::string results;   // results.json (empty after a hard error)
    std::string manifest;  // manifest.json
    std::string out_dir;
    std::vector<std::string> outputs;
};

/// Parses the JSON config, runs the experiment and (with write_files)
/// writes manifest.json, results.json and the kind's CSV files into
/// out_dir. Never throws for experiment failures; they land in the outcome.
RunOutcome run_experiment(std::string_view kind, std::string_view config_json, const RunOptions& options);

}  // namespace couplex
