#ifndef WEAKINV_H
#define WEAKINV_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Return codes. The first four match the exit codes of the command-line tool.
typedef enum WiStatus {
  WI_STATUS_OK = 0,
  WI_STATUS_CHECK_FAILED = 1,
  WI_STATUS_CONFIG = 2,
  WI_STATUS_NUMERICAL = 3,
  WI_STATUS_NULL_POINTER = 4,
  WI_STATUS_INVALID_UTF8 = 5,
  WI_STATUS_IO = 6,
  WI_STATUS_PANIC = 7,
} WiStatus;

typedef enum WiCheckStatus {
  WI_CHECK_STATUS_PASS = 0,
  WI_CHECK_STATUS_FAIL = 1,
  WI_CHECK_STATUS_WARN = 2,
  WI_CHECK_STATUS_SKIPPED = 3,
} WiCheckStatus;

typedef enum WiBranch {
  WI_BRANCH_ANTI_DAMPED = 0,
  WI_BRANCH_COMMUTING = 1,
} WiBranch;

// Result of [`wi_verify`].
typedef struct WiReport WiReport;

// Parsed and validated scenario.
typedef struct WiScenario WiScenario;

// One entry of a verification report. `id` and `name` point into the report
// and stay valid until it is freed.
typedef struct WiCheck {
  const char *id;
  const char *name;
  double measured;
  double threshold;
  enum WiCheckStatus status;
} WiCheck;

typedef struct WiCoefficients {
  double alpha;
  double a1;
  double a2;
  double a3;
} WiCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the next
// call into this library on the same thread.
const char *wi_last_error(void);

// Version string of the library (static storage).
const char *wi_version(void);

// Loads and validates a scenario file.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum WiStatus wi_scenario_load(const char *path, struct WiScenario **out);

// Parses a scenario held in memory. `base_dir` (nullable) resolves relative
// table paths; null means the current directory.
//
// # Safety
// `text` and non-null `base_dir` are NUL-terminated strings; `out` is writable.
enum WiStatus wi_scenario_from_str(const char *text, const char *base_dir, struct WiScenario **out);

// # Safety
// `s` is null or a handle from this library not yet freed.
void wi_scenario_free(struct WiScenario *s);

// Sets a numeric field by dotted path (e.g. `kappa.value`) and revalidates.
// On failure the scenario is unchanged.
//
// # Safety
// `s` is a live handle; `path` is a NUL-terminated string.
enum WiStatus wi_scenario_set(struct WiScenario *s, const char *path, double value);

// Runs the scenario and writes its CSV files. `out_dir` may be null to use
// the directory named in the scenario.
//
// # Safety
// `s` is a live handle; non-null `out_dir` is a NUL-terminated string.
enum WiStatus wi_run(const struct WiScenario *s, const char *out_dir);

// Runs the check battery. On `Ok` or `CheckFailed` a report is stored in
// `out`; otherwise `out` is set to null.
//
// # Safety
// `s` is a live handle; `out` is writable.
enum WiStatus wi_verify(const struct WiScenario *s, struct WiReport **out);

// # Safety
// `r` is null or a handle from [`wi_verify`] not yet freed.
void wi_report_free(struct WiReport *r);

// Number of checks; 0 for a null report.
//
// # Safety
// `r` is null or a live report.
size_t wi_report_len(const struct WiReport *r);

// True iff no gating check failed; false for a null report.
//
// # Safety
// `r` is null or a live report.
bool wi_report_passed(const struct WiReport *r);

// Wall time in seconds; NaN for a null report.
//
// # Safety
// `r` is null or a live report.
double wi_report_wall_time(const struct WiReport *r);

// Copies check `index` into `out`.
//
// # Safety
// `r` is a live report; `out` is writable.
enum WiStatus wi_report_check(const struct WiReport *r, size_t index, struct WiCheck *out);

// Dissipator coefficients for auxiliary data `(rho, rhodot)` and friction `kappa`.
//
// # Safety
// `out` is writable.
enum WiStatus wi_lindblad_coefficients(enum WiBranch branch,
                                       double rho,
                                       double rhodot,
                                       double kappa,
                                       struct WiCoefficients *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEAKINV_H */
