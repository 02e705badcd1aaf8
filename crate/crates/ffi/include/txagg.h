#ifndef TXAGG_H
#define TXAGG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TxaggStatus {
  TXAGG_STATUS_OK = 0,
  TXAGG_STATUS_VERIFICATION_FAILED = 1,
  /**
   * The solver gave up, or an execution could not run.
   */
  TXAGG_STATUS_FAILED = 2,
  TXAGG_STATUS_INVALID_INPUT = 3,
  TXAGG_STATUS_NULL_POINTER = 4,
  TXAGG_STATUS_PANIC = 5,
} TxaggStatus;

/**
 * A parsed and resolved scenario.
 */
typedef struct TxaggScenario TxaggScenario;

/**
 * Parse a scenario document. On success `*out` owns a handle that must be
 * released with [`txagg_scenario_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TxaggStatus txagg_scenario_parse(const char *json, struct TxaggScenario **out);

/**
 * # Safety
 * `scenario` must come from [`txagg_scenario_parse`] and not be used
 * afterwards. Null is ignored.
 */
void txagg_scenario_free(struct TxaggScenario *scenario);

/**
 * Override the solver. `name` is one of `brute`, `dp`, `dp-bounded`,
 * `greedy`; `radius` is read only for `dp-bounded`.
 *
 * # Safety
 * `scenario` must be a live handle and `name` a NUL-terminated string.
 */
enum TxaggStatus txagg_scenario_set_solver(struct TxaggScenario *scenario,
                                           const char *name,
                                           uint64_t radius);

/**
 * The scenario back as a JSON document.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum TxaggStatus txagg_scenario_to_json(const struct TxaggScenario *scenario, char **out);

/**
 * Select and route without executing. `*report_out` receives the report.
 *
 * # Safety
 * `scenario` must be a live handle and `report_out` a valid pointer.
 */
enum TxaggStatus txagg_solve(const struct TxaggScenario *scenario, char **report_out);

/**
 * Run the whole round. A refunded execution still returns `Ok`, with
 * `*committed` set to false.
 *
 * # Safety
 * `scenario` must be a live handle; `report_out` and `committed` valid
 * pointers.
 */
enum TxaggStatus txagg_simulate(const struct TxaggScenario *scenario,
                                char **report_out,
                                bool *committed);

/**
 * Check a report against the scenario.
 *
 * # Safety
 * `scenario` must be a live handle and `report` a NUL-terminated string.
 */
enum TxaggStatus txagg_verify(const struct TxaggScenario *scenario, const char *report);

/**
 * Scenario JSON deciding whether some of `items` sum to `target`.
 *
 * # Safety
 * `items` must point to `len` values (it may be null when `len` is 0) and
 * `out` must be a valid pointer.
 */
enum TxaggStatus txagg_reduce_subset_sum(uint64_t target,
                                         const uint64_t *items,
                                         size_t len,
                                         char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void txagg_string_free(char *s);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *txagg_last_error(void);

/**
 * Library version, statically allocated.
 */
const char *txagg_version(void);

#endif  /* TXAGG_H */
