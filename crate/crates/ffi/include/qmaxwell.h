#ifndef QMAXWELL_H
#define QMAXWELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  QM_STATUS_OK = 0,
  QM_STATUS_NULL_POINTER = 1,
  QM_STATUS_CONFIG = 2,
  QM_STATUS_INFEASIBLE = 3,
  QM_STATUS_IO = 4,
  QM_STATUS_INDETERMINATE_SIGN = 5,
  QM_STATUS_NO_RESULT = 6,
  QM_STATUS_PANIC = 7,
} QmStatus;

typedef enum {
  QM_WALLS_PMC = 0,
  QM_WALLS_PEC = 1,
} QmWalls;

typedef enum {
  QM_COMPONENT_EX = 0,
  QM_COMPONENT_EY = 1,
  QM_COMPONENT_EZ = 2,
  QM_COMPONENT_HX = 3,
  QM_COMPONENT_HY = 4,
  QM_COMPONENT_HZ = 5,
} QmComponent;

typedef enum {
  QM_BACKEND_ORACLE = 0,
  QM_BACKEND_LIFTED_EXACT = 1,
  QM_BACKEND_CIRCUIT = 2,
} QmBackend;

/**
 * Grid geometry and wall conditions.
 */
typedef struct QmGrid QmGrid;

/**
 * A grid with its initial impulses, register and the most recent run.
 */
typedef struct QmSimulation QmSimulation;

/**
 * Signed probe result. `sign` is 0 when the sign could not be resolved,
 * in which case `value` is NaN.
 */
typedef struct {
  double value;
  double magnitude;
  int32_t sign;
} QmProbe;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *qm_last_error(void);

/**
 * Creates a 2D grid (`nz` = 0) or a 3D grid. Sizes must be powers of two.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
QmStatus qm_grid_new(size_t nx, size_t ny, size_t nz, QmWalls walls, QmGrid **out);

/**
 * # Safety
 * `grid` must come from [`qm_grid_new`] and not be used afterwards. NULL is ignored.
 */
void qm_grid_free(QmGrid *grid);

/**
 * Number of qubits in the system register.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
QmStatus qm_grid_qubit_count(const QmGrid *grid, size_t *out);

/**
 * Position of a sample in the state vector.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
QmStatus qm_grid_flat_index(const QmGrid *grid,
                            QmComponent component,
                            size_t i,
                            size_t j,
                            size_t k,
                            size_t *out);

/**
 * Starts a simulation on a copy of `grid` with an `n_a`-qubit momentum
 * register spanning `[p_min, p_max)`.
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
QmStatus qm_simulation_new(const QmGrid *grid,
                           size_t n_a,
                           double p_min,
                           double p_max,
                           QmSimulation **out);

/**
 * # Safety
 * `sim` must come from [`qm_simulation_new`] and not be used afterwards. NULL is ignored.
 */
void qm_simulation_free(QmSimulation *sim);

/**
 * Adds a point source to the initial condition. Clears any previous run.
 *
 * # Safety
 * `sim` must be a live handle.
 */
QmStatus qm_simulation_add_impulse(QmSimulation *sim,
                                   QmComponent component,
                                   size_t i,
                                   size_t j,
                                   size_t k,
                                   double amplitude);

/**
 * Evolves the initial condition for `steps` of `dt` and keeps the final field.
 *
 * # Safety
 * `sim` must be a live handle.
 */
QmStatus qm_simulation_run(QmSimulation *sim, QmBackend backend, double dt, size_t steps);

/**
 * Time reached by the last run.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
QmStatus qm_simulation_time(const QmSimulation *sim, double *out);

/**
 * Reads one sample of the field from the last run.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
QmStatus qm_simulation_read_field(const QmSimulation *sim,
                                  QmComponent component,
                                  size_t i,
                                  size_t j,
                                  size_t k,
                                  double *out);

/**
 * Runs the offset protocol and returns the signed value of one sample at
 * `steps · dt`. `shots` = 0 reads the amplitudes exactly; otherwise the
 * magnitudes are estimated from that many samples drawn with `seed`.
 * The oracle backend is rejected.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
QmStatus qm_simulation_probe(QmSimulation *sim,
                             QmBackend backend,
                             double dt,
                             size_t steps,
                             QmComponent component,
                             size_t i,
                             size_t j,
                             size_t k,
                             uint64_t shots,
                             uint64_t seed,
                             QmProbe *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QMAXWELL_H */
