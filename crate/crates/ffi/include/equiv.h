#ifndef EQUIV_H
#define EQUIV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define EQUIV_OK 0

// A job ran to completion and at least one comparison failed.
#define EQUIV_COMPARISON_FAILED 1

#define EQUIV_ERR_INPUT 2

#define EQUIV_ERR_RESOURCE 3

#define EQUIV_ERR_DOMAIN 4

#define EQUIV_ERR_NUMERIC 5

#define EQUIV_ERR_IO 6

#define EQUIV_ERR_NULL 7

#define EQUIV_ERR_UTF8 8

#define EQUIV_ERR_PANIC 9

// Opaque verdict report.
typedef struct EquivReport EquivReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Owned by the library; valid
// until the next failing call on the same thread.
const char *equiv_last_error(void);

// Parse and run a JSON job. On success `*out` receives a report handle and the return
// value is `EQUIV_OK` or `EQUIV_COMPARISON_FAILED`.
//
// # Safety
// `job_json` must be a valid NUL-terminated string and `out` a valid pointer.
int32_t equiv_run_job_json(const char *job_json, struct EquivReport **out);

// 1 if every case passed, 0 otherwise, `-EQUIV_ERR_NULL` for a null handle.
//
// # Safety
// `report` must be null or a handle from [`equiv_run_job_json`].
int32_t equiv_report_passed(const struct EquivReport *report);

// Canonical JSON of the report; release with [`equiv_string_free`].
//
// # Safety
// `report` must be a handle from [`equiv_run_job_json`] and `out` a valid pointer.
int32_t equiv_report_json(const struct EquivReport *report, char **out);

// # Safety
// `report` must be null or a handle from [`equiv_run_job_json`] not yet freed.
void equiv_report_free(struct EquivReport *report);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void equiv_string_free(char *s);

// `⟨Tr_[σ](M†M)⟩` for the complex matrix model with covariance `(P, Q)`.
//
// `sigma` holds the images `σ(0..n)`. `p` and `q` are row-major `dim × dim` complex
// matrices stored as interleaved `(re, im)` pairs.
//
// # Safety
// `sigma` must point to `n` entries, `p` and `q` to `2·dim²` doubles each, and the
// output pointers must be valid.
int32_t equiv_dual_weight_sum(const size_t *sigma,
                              size_t n,
                              const double *p,
                              const double *q,
                              size_t dim,
                              double *out_re,
                              double *out_im);

// Build the `n × n` rigidity matrix `C_k` (power sums `Tr(C^p) = n δ_{p,k}`) into `out`,
// row-major with interleaved `(re, im)` pairs.
//
// # Safety
// `out` must point to `2·n²` writable doubles.
int32_t equiv_build_ck(size_t k, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUIV_H */
