#ifndef COUPLEX_H
#define COUPLEX_H

#include <stddef.h>

#if defined(_WIN32)
#define COUPLEX_API __declspec(dllexport)
#else
#define COUPLEX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Non-zero codes match the library's error categories. */
typedef enum {
    COUPLEX_OK = 0,
    COUPLEX_INVALID_SPEC = 1,
    COUPLEX_DOMAIN = 2,
    COUPLEX_NUMERICAL_BLOWUP = 3,
    COUPLEX_STEP_SIZE = 4,
    COUPLEX_DEGRADED_BASIS = 5,
    COUPLEX_BUDGET = 6,
    COUPLEX_CONFIG = 7,
    COUPLEX_IO = 8,
    COUPLEX_INTERNAL = 9,
    COUPLEX_NULL_ARGUMENT = 10
} couplex_status;

typedef struct couplex_spec couplex_spec;
typedef struct couplex_result couplex_result;

COUPLEX_API const char* couplex_version(void);
COUPLEX_API const char* couplex_status_string(couplex_status status);

/* Message of the last failed call on this thread ("" if none). */
COUPLEX_API const char* couplex_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
COUPLEX_API void couplex_string_free(char* s);

/* Built-in problems and their constants, as a JSON array. */
COUPLEX_API couplex_status couplex_catalogue_json(char** out);

COUPLEX_API couplex_status couplex_spec_builtin(const char* id, couplex_spec** out);
COUPLEX_API couplex_status couplex_spec_from_json(const char* json, couplex_spec** out);
COUPLEX_API couplex_status couplex_spec_to_json(const couplex_spec* spec, char** out);
COUPLEX_API couplex_status couplex_spec_dimension(const couplex_spec* spec, int* out);
/* mode: "classical" or "g-mode". */
COUPLEX_API couplex_status couplex_spec_constants_json(const couplex_spec* spec, const char* mode, char** out);
COUPLEX_API void couplex_spec_free(couplex_spec* spec);

typedef struct {
    unsigned workers;     /* 0 means 1 */
    const char* out_dir;  /* NULL: config "output_dir", else "out" */
    const char* base_dir; /* directory for relative spec paths; may be NULL */
    int write_files;      /* non-zero writes manifest.json, results.json and CSVs */
} couplex_run_options;

/* Runs one experiment. Returns COUPLEX_OK whenever a result handle was
   produced, including runs that failed verification or stopped on an
   error; inspect couplex_result_exit_code (0 pass, 2 fail, 1 error). */
COUPLEX_API couplex_status couplex_run(const char* kind, const char* config_json,
                                       const couplex_run_options* options, couplex_result** out);

COUPLEX_API int couplex_result_exit_code(const couplex_result* r);
/* "pass", "fail" or "error". */
COUPLEX_API const char* couplex_result_status(const couplex_result* r);
/* COUPLEX_OK unless the run stopped on an error. */
COUPLEX_API couplex_status couplex_result_error_code(const couplex_result* r);
COUPLEX_API const char* couplex_result_error(const couplex_result* r);
COUPLEX_API const char* couplex_result_json(const couplex_result* r);
COUPLEX_API const char* couplex_result_manifest(const couplex_result* r);
COUPLEX_API const char* couplex_result_out_dir(const couplex_result* r);
COUPLEX_API size_t couplex_result_output_count(const couplex_result* r);
COUPLEX_API const char* couplex_result_output(const couplex_result* r, size_t i);
COUPLEX_API void couplex_result_free(couplex_result* r);

#ifdef __cplusplus
}
#endif

#endif
