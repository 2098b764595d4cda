#ifndef OFU_DIFFUSION_H
#define OFU_DIFFUSION_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stdint.h>
#include <stddef.h>

typedef enum OfuStatus {
  OFU_STATUS_OK = 0,
  OFU_STATUS_NULL_POINTER = 1,
  OFU_STATUS_INVALID_ARGUMENT = 2,
  OFU_STATUS_INVALID_CONFIG = 3,
  OFU_STATUS_NOT_HURWITZ = 4,
  OFU_STATUS_NON_CONVERGENCE = 5,
  OFU_STATUS_GRID_TOO_SMALL = 6,
  OFU_STATUS_MODEL_FAULT = 7,
  OFU_STATUS_IO = 8,
  OFU_STATUS_PANIC = 9,
  OFU_STATUS_BUFFER_TOO_SMALL = 10,
} OfuStatus;

// A validated model of the true system.
typedef struct OfuModel OfuModel;

// A finished closed-loop agent run.
typedef struct OfuRun OfuRun;

// A solved ergodic control problem on a grid.
typedef struct OfuSolution OfuSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL terminated, into
// `buf`. Returns the message length in bytes without the terminator, or
// `-1` if `buf` is too small (nothing is written then). A null `buf` only
// queries the length.
int64_t ofu_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *ofu_version(void);

// The 1-D linear benchmark at clock parameter `epsilon`.
enum OfuStatus ofu_model_benchmark(double epsilon, struct OfuModel **out);

// Builds a model from a JSON model configuration.
enum OfuStatus ofu_model_from_json(const char *json, struct OfuModel **out);

void ofu_model_free(struct OfuModel *model);

enum OfuStatus ofu_model_state_dim(const struct OfuModel *model, size_t *out);

// Solves the diffusive ergodic HJB on `[-radius, radius]^d`.
enum OfuStatus ofu_solve_diffusive(const struct OfuModel *model,
                                   double radius,
                                   double spacing,
                                   size_t actions_per_axis,
                                   struct OfuSolution **out);

// Solves the jump ergodic HJB at the model's ε, warm started from the
// diffusive solution.
enum OfuStatus ofu_solve_jump(const struct OfuModel *model,
                              double radius,
                              double spacing,
                              size_t actions_per_axis,
                              struct OfuSolution **out);

enum OfuStatus ofu_solution_rho(const struct OfuSolution *sol, double *out);

enum OfuStatus ofu_solution_len(const struct OfuSolution *sol, size_t *out);

// Copies the relative value function (one value per grid node) into `buf`.
enum OfuStatus ofu_solution_values(const struct OfuSolution *sol, double *buf, size_t len);

void ofu_solution_free(struct OfuSolution *sol);

// Runs the optimistic agent against `model` for wall-clock time `horizon`.
// `agent_json` may be null for the default agent; otherwise it is a JSON
// agent configuration. The planner grid defaults to radius 6.
enum OfuStatus ofu_agent_run(const struct OfuModel *model,
                             const char *agent_json,
                             double horizon,
                             uint64_t seed,
                             struct OfuRun **out);

enum OfuStatus ofu_run_events(const struct OfuRun *r, size_t *out);

enum OfuStatus ofu_run_episodes(const struct OfuRun *r, size_t *out);

// Regret `T ρ* - Σ rₙ` of the run against a supplied optimal gain.
enum OfuStatus ofu_run_regret(const struct OfuRun *r, double rho_star, double *out);

void ofu_run_free(struct OfuRun *r);

// Confidence radius `β_n(δ)` for the given constants.
enum OfuStatus ofu_beta_n(size_t n,
                          double delta,
                          double epsilon,
                          double sigma_norm,
                          double log_cover,
                          double h,
                          double l0,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OFU_DIFFUSION_H */
