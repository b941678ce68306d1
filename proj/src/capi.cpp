#include "couplex.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "couplex/catalogue.hpp"
#include "couplex/experiment.hpp"
#include "couplex/io.hpp"

struct couplex_spec {
    couplex::ProblemSpec spec;
};

struct couplex_result {
    couplex::RunOutcome outcome;
};

namespace {

thread_local std::string last_error;

couplex_status record(couplex_status s, const char* what) {
    last_error = what;
    return s;
}

template <class F>
couplex_status guard(F&& f) {
    try {
        last_error.clear();
        f();
        return COUPLEX_OK;
    } catch (const couplex::Error& e) {
        return record(static_cast<couplex_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return record(COUPLEX_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return record(COUPLEX_INTERNAL, e.what());
    }
}

char* copy(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

}  // namespace

extern "C" {

const char* couplex_version(void) { return COUPLEX_VERSION; }

const char* couplex_status_string(couplex_status status) {
    if (status == COUPLEX_OK) return "ok";
    if (status == COUPLEX_NULL_ARGUMENT) return "null_argument";
    if (status >= COUPLEX_INVALID_SPEC && status <= COUPLEX_INTERNAL)
        return couplex::to_string(static_cast<couplex::ErrorCode>(status));
    return "unknown";
}

const char* couplex_last_error(void) { return last_error.c_str(); }

void couplex_string_free(char* s) { std::free(s); }

couplex_status couplex_catalogue_json(char** out) {
    if (!out) return record(COUPLEX_NULL_ARGUMENT, "out is null");
    return guard([&] { *out = copy(couplex::catalogue_json()); });
}

couplex_status couplex_spec_builtin(const char* id, couplex_spec** out) {
    if (!id || !out) return record(COUPLEX_NULL_ARGUMENT, "id or out is null");
    return guard([&] { *out = new couplex_spec{couplex::builtin_spec(id)}; });
}

couplex_status couplex_spec_from_json(const char* json, couplex_spec** out) {
    if (!json || !out) return record(COUPLEX_NULL_ARGUMENT, "json or out is null");
    return guard([&] { *out = new couplex_spec{couplex::spec_from_json(json)}; });
}

couplex_status couplex_spec_to_json(const couplex_spec* spec, char** out) {
    if (!spec || !out) return record(COUPLEX_NULL_ARGUMENT, "spec or out is null");
    return guard([&] { *out = copy(couplex::spec_to_json(spec->spec)); });
}

couplex_status couplex_spec_dimension(const couplex_spec* spec, int* out) {
    if (!spec || !out) return record(COUPLEX_NULL_ARGUMENT, "spec or out is null");
    *out = spec->spec.d;
    return COUPLEX_OK;
}

couplex_status couplex_spec_constants_json(const couplex_spec* spec, const char* mode, char** out) {
    if (!spec || !mode || !out) return record(COUPLEX_NULL_ARGUMENT, "spec, mode or out is null");
    return guard([&] {
        couplex::Mode m;
        if (std::strcmp(mode, "classical") == 0) m = couplex::Mode::classical;
        else if (std::strcmp(mode, "g-mode") == 0) m = couplex::Mode::g_mode;
        else couplex::fail(couplex::ErrorCode::config, "mode: expected classical or g-mode");
        *out = copy(couplex::constants_to_json(couplex::derive_constants(spec->spec, m)));
    });
}

void couplex_spec_free(couplex_spec* spec) { delete spec; }

couplex_status couplex_run(const char* kind, const char* config_json, const couplex_run_options* options,
                           couplex_result** out) {
    if (!kind || !config_json || !out) return record(COUPLEX_NULL_ARGUMENT, "kind, config or out is null");
    return guard([&] {
        couplex::RunOptions opt;
        if (options) {
            opt.workers = options->workers ? options->workers : 1;
            if (options->out_dir) opt.out_dir = options->out_dir;
            if (options->base_dir) opt.base_dir = options->base_dir;
            opt.write_files = options->write_files != 0;
        }
        auto* r = new couplex_result{couplex::run_experiment(kind, config_json, opt)};
        if (r->outcome.error_code) last_error = r->outcome.error;
        *out = r;
    });
}

int couplex_result_exit_code(const couplex_result* r) { return r ? r->outcome.exit_code : 1; }
const char* couplex_result_status(const couplex_result* r) { return r ? r->outcome.status.c_str() : ""; }
couplex_status couplex_result_error_code(const couplex_result* r) {
    if (!r) return COUPLEX_NULL_ARGUMENT;
    return r->outcome.error_code ? static_cast<couplex_status>(*r->outcome.error_code) : COUPLEX_OK;
}
const char* couplex_result_error(const couplex_result* r) { return r ? r->outcome.error.c_str() : ""; }
const char* couplex_result_json(const couplex_result* r) { return r ? r->outcome.results.c_str() : ""; }
const char* couplex_result_manifest(const couplex_result* r) { return r ? r->outcome.manifest.c_str() : ""; }
const char* couplex_result_out_dir(const couplex_result* r) { return r ? r->outcome.out_dir.c_str() : ""; }
size_t couplex_result_output_count(const couplex_result* r) { return r ? r->outcome.outputs.size() : 0; }
const char* couplex_result_output(const couplex_result* r, size_t i) {
    if (!r || i >= r->outcome.outputs.size()) return nullptr;
    return r->outcome.outputs[i].c_str();
}
void couplex_result_free(couplex_result* r) { delete r; }

}  // extern "C"
