/* C bindings for the safewcet analysis library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SW_OK 0

#define SW_EINVAL 1

#define SW_EVALIDATION 2

#define SW_EFAILURE 3

// Opaque handle to a validated system description.
typedef struct SwSystem SwSystem;

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread. Never null.
const char *sw_last_error_message(void);

// Loads a system description file into a new handle.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be a valid
// writable pointer. On success `*out` owns the handle and must be released
// with `sw_system_free`.
int32_t sw_system_load(const char *path, struct SwSystem **out);

// Parses a system description from a JSON string into a new handle.
//
// # Safety
// Same contract as `sw_system_load`, with `json` holding the document text.
int32_t sw_system_parse(const char *json, struct SwSystem **out);

// Releases a handle obtained from `sw_system_load` or `sw_system_parse`.
// Passing null is a no-op.
//
// # Safety
// `system` must be a handle returned by this library, released exactly once.
void sw_system_free(struct SwSystem *system);

// Number of tasks in the system.
//
// # Safety
// `system` must be a live handle; `out` must be writable.
int32_t sw_system_task_count(const struct SwSystem *system, size_t *out);

// Simulation horizon in milliseconds.
//
// # Safety
// `system` must be a live handle; `out` must be writable.
int32_t sw_system_horizon_ms(const struct SwSystem *system, double *out);

// Simulates one randomized scenario (arrivals, context-switch times, WCET
// draw) under `seed` and writes the verdict to `out`: 0 when every
// constraint holds, 1 when violated. Equal seeds give equal verdicts.
//
// # Safety
// `system` must be a live handle; `out` must be writable.
int32_t sw_label_random(const struct SwSystem *system, uint64_t seed, int32_t *out);
