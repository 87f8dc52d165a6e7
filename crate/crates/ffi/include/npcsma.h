#ifndef NPCSMA_H
#define NPCSMA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NpcsmaStatus {
  NPCSMA_STATUS_OK = 0,
  NPCSMA_STATUS_NULL_POINTER = 1,
  NPCSMA_STATUS_INVALID_ARGUMENT = 2,
  NPCSMA_STATUS_NO_STABLE_RATE = 3,
  NPCSMA_STATUS_NOT_ERGODIC = 4,
  NPCSMA_STATUS_UNBOUNDED_DELAY = 5,
  NPCSMA_STATUS_UNSTABLE = 6,
  NPCSMA_STATUS_NO_FIXED_POINT = 7,
  NPCSMA_STATUS_NUMERICAL = 8,
  NPCSMA_STATUS_PANIC = 9,
} NpcsmaStatus;

typedef enum NpcsmaScheme {
  // K = 1.
  NPCSMA_SCHEME_GEOMETRIC = 0,
  // Finite K taken from `cap_k`.
  NPCSMA_SCHEME_K_EXPONENTIAL = 1,
  // K = infinity.
  NPCSMA_SCHEME_EXPONENTIAL = 2,
} NpcsmaScheme;

// Opaque report handle.
typedef struct NpcsmaReport NpcsmaReport;

// Opaque simulation handle.
typedef struct NpcsmaSimulation NpcsmaSimulation;

// Scenario description. `n == 0` stands for an infinite population, which
// only `npcsma_stable_regions` accepts.
typedef struct NpcsmaParams {
  uint32_t n;
  // Propagation-delay ratio; must be 1/M for an integer M.
  double a;
  double lambda_hat;
  double q;
  enum NpcsmaScheme scheme;
  uint32_t cap_k;
} NpcsmaParams;

typedef struct NpcsmaInterval {
  double lo;
  double hi;
  bool empty;
  bool lo_clamped;
  bool hi_clamped;
} NpcsmaInterval;

typedef struct NpcsmaRegions {
  double g_small;
  double g_large;
  double g_hat_large;
  struct NpcsmaInterval region_i;
  struct NpcsmaInterval region_ii;
  struct NpcsmaInterval region_delay;
} NpcsmaRegions;

typedef struct NpcsmaMoments {
  double mean;
  // Infinite when `divergent`.
  double second;
  bool divergent;
} NpcsmaMoments;

typedef struct NpcsmaSummary {
  double throughput;
  double mean_delay;
  double service_mean;
  double service_second;
  double mean_backlog;
  double measured_attempt_rate;
  uint64_t arrived;
  uint64_t delivered;
  uint64_t final_backlog;
  uint64_t collisions;
} NpcsmaSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code.
const char *npcsma_status_string(enum NpcsmaStatus status);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or valid for writes of `len` bytes.
size_t npcsma_last_error_message(char *buf, size_t len);

// Maximum throughput at ratio `a` and the attempt rate achieving it.
//
// # Safety
// Out pointers must be valid for writes.
enum NpcsmaStatus npcsma_max_throughput(double a, double *lambda_max, double *g_star);

// The two attempt rates whose throughput equals `lambda_hat`.
//
// # Safety
// Out pointers must be valid for writes.
enum NpcsmaStatus npcsma_attempt_rate_roots(double lambda_hat,
                                            double a,
                                            double *g_small,
                                            double *g_large);

// Stable throughput and bounded-delay regions of `q`. The `q` field of
// `params` is ignored.
//
// # Safety
// `params` must be valid for reads and `out` for writes.
enum NpcsmaStatus npcsma_stable_regions(const struct NpcsmaParams *params,
                                        struct NpcsmaRegions *out);

// First two moments of the HOL service time, in slots. `cap_k == 0` means
// K = infinity; `minislots` is M = 1/a.
//
// # Safety
// `out` must be valid for writes.
enum NpcsmaStatus npcsma_service_moments(double p,
                                         double q,
                                         uint32_t cap_k,
                                         uint32_t minislots,
                                         double alpha,
                                         struct NpcsmaMoments *out);

// Geo/G/1 mean delay for per-node rate `lambda` and the given moments.
//
// # Safety
// `moments` must be valid for reads and `mean_delay` for writes.
enum NpcsmaStatus npcsma_pk_mean_delay(double lambda,
                                       const struct NpcsmaMoments *moments,
                                       double *mean_delay);

// Creates a simulation of `horizon` mini-slots. Statistics start after
// `warmup`.
//
// # Safety
// `params` must be valid for reads and `out` for writes. The handle stored
// in `*out` must be released with `npcsma_simulation_free`.
enum NpcsmaStatus npcsma_simulation_new(const struct NpcsmaParams *params,
                                        uint64_t horizon,
                                        uint64_t warmup,
                                        uint64_t seed,
                                        struct NpcsmaSimulation **out);

// Advances by up to `minislots`, stopping at the horizon.
//
// # Safety
// `sim` must be a live handle.
enum NpcsmaStatus npcsma_simulation_advance(struct NpcsmaSimulation *sim, uint64_t minislots);

// Current time and total backlog.
//
// # Safety
// `sim` must be a live handle; out pointers must be valid for writes.
enum NpcsmaStatus npcsma_simulation_state(const struct NpcsmaSimulation *sim,
                                          uint64_t *now,
                                          uint64_t *backlog);

// Runs to the horizon and returns a report handle. The simulation handle
// stays valid and can still be freed or queried.
//
// # Safety
// `sim` must be a live handle and `out` valid for writes. The report must
// be released with `npcsma_report_free`.
enum NpcsmaStatus npcsma_simulation_finish(struct NpcsmaSimulation *sim, struct NpcsmaReport **out);

// # Safety
// `sim` must be null or a handle not yet freed.
void npcsma_simulation_free(struct NpcsmaSimulation *sim);

// # Safety
// `report` must be a live handle and `out` valid for writes.
enum NpcsmaStatus npcsma_report_summary(const struct NpcsmaReport *report,
                                        struct NpcsmaSummary *out);

// Copies up to `capacity` backlog samples into the two arrays and stores
// the total number of samples in `count`. Pass null arrays with capacity 0
// to query the count.
//
// # Safety
// `report` must be a live handle; arrays must be valid for `capacity`
// writes; `count` must be valid for writes.
enum NpcsmaStatus npcsma_report_backlog_trace(const struct NpcsmaReport *report,
                                              uint64_t *minislots,
                                              uint64_t *backlogs,
                                              size_t capacity,
                                              size_t *count);

// # Safety
// `report` must be null or a handle not yet freed.
void npcsma_report_free(struct NpcsmaReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPCSMA_H */
