#ifndef RESCAN_H
#define RESCAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum RescanStatus {
  RESCAN_STATUS_OK = 0,
  // Null pointer or non-UTF-8 string argument.
  RESCAN_STATUS_NULL_ARGUMENT = 1,
  RESCAN_STATUS_INVALID_PARAMETER = 2,
  RESCAN_STATUS_DIVERGENT_LOOP = 3,
  RESCAN_STATUS_UNDEFINED_RATIO = 4,
  RESCAN_STATUS_INFEASIBLE_OPERATING_POINT = 5,
  RESCAN_STATUS_SUPPORT_VIOLATION = 6,
  RESCAN_STATUS_QUADRATURE_FAILURE = 7,
  RESCAN_STATUS_MODE_MISMATCH = 8,
  RESCAN_STATUS_CONFIG = 9,
  RESCAN_STATUS_IO = 10,
  // Absent value (e.g. an estimate over zero subjects).
  RESCAN_STATUS_NO_VALUE = 11,
  RESCAN_STATUS_PANIC = 12,
} RescanStatus;

// Parsed experiment configuration.
typedef struct RescanConfig RescanConfig;

// Population model of the failure rate.
typedef struct RescanDistribution RescanDistribution;

// Result of a cohort simulation.
typedef struct RescanReport RescanReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null after a success.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *rescan_last_error(void);

// Library version as a static NUL-terminated string.
const char *rescan_version(void);

// Expected cost of the re-scan loop at a fixed failure rate.
//
// # Safety
// `out` must be valid for a write of one `double`.
enum RescanStatus rescan_new_cost(double alpha_value,
                                  double precision,
                                  double recall,
                                  double rescan_cost,
                                  double correction_cost,
                                  double *out);

// New-to-original cost ratio at a fixed failure rate.
//
// # Safety
// `out_ratio` must be valid for a write of one `double`.
enum RescanStatus rescan_cost_ratio(double alpha_value,
                                    double precision,
                                    double recall,
                                    double cost_quotient,
                                    double *out_ratio);

// Minimum precision at which flagging lowers the expected cost.
// `out_feasible` receives 0 when no precision in (0, 1] suffices.
//
// # Safety
// `out_bound` and `out_feasible` must be valid for one write each.
enum RescanStatus rescan_breakeven_precision(double alpha_value,
                                             double cost_quotient,
                                             double *out_bound,
                                             int32_t *out_feasible);

// Builds a distribution from its JSON description, e.g.
// `{"family": "beta", "a": 2, "b": 8}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for one write.
enum RescanStatus rescan_distribution_from_json(const char *json, struct RescanDistribution **out);

// # Safety
// `dist` must be null or a handle from [`rescan_distribution_from_json`]
// that has not been freed.
void rescan_distribution_free(struct RescanDistribution *dist);

// Population-averaged cost ratio under `dist`.
//
// # Safety
// `dist` must be a live handle; `out_ratio` must be valid for one write.
enum RescanStatus rescan_distribution_cost_ratio(const struct RescanDistribution *dist,
                                                 double precision,
                                                 double recall,
                                                 double cost_quotient,
                                                 double *out_ratio);

// Parses a TOML experiment configuration. Relative file references are
// resolved against the current directory.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be valid for one write.
enum RescanStatus rescan_config_parse(const char *toml, struct RescanConfig **out);

// Overrides the master seed.
//
// # Safety
// `cfg` must be a live handle.
enum RescanStatus rescan_config_set_seed(struct RescanConfig *cfg, uint64_t seed);

// Sets the worker count; results do not depend on it.
//
// # Safety
// `cfg` must be a live handle.
enum RescanStatus rescan_config_set_workers(struct RescanConfig *cfg, size_t workers);

// # Safety
// `cfg` must be null or a handle from [`rescan_config_parse`] that has not
// been freed.
void rescan_config_free(struct RescanConfig *cfg);

// Runs the cohort simulation described by `cfg`.
//
// # Safety
// `cfg` must be a live handle; `out` must be valid for one write.
enum RescanStatus rescan_simulate(const struct RescanConfig *cfg, struct RescanReport **out);

// Empirical cost ratio of a report and its standard error. The standard
// error is NaN when it is not defined.
//
// # Safety
// `report` must be a live handle; both out-pointers must be valid for one
// write each.
enum RescanStatus rescan_report_cost_ratio(const struct RescanReport *report,
                                           double *out_ratio,
                                           double *out_standard_error);

// Report as pretty-printed JSON. Release with [`rescan_string_free`].
//
// # Safety
// `report` must be a live handle; `out` must be valid for one write.
enum RescanStatus rescan_report_json(const struct RescanReport *report, char **out);

// # Safety
// `report` must be null or a handle from [`rescan_simulate`] that has not
// been freed.
void rescan_report_free(struct RescanReport *report);

// # Safety
// `s` must be null or a string returned by this library that has not been
// freed.
void rescan_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESCAN_H */
