#ifndef KERRTOPO_H
#define KERRTOPO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum KtBand {
  KT_BAND_MINUS = 0,
  KT_BAND_PLUS = 1,
} KtBand;

typedef enum KtBoundary {
  KT_BOUNDARY_PERIODIC = 0,
  KT_BOUNDARY_OPEN = 1,
} KtBoundary;

typedef enum KtSolver {
  KT_SOLVER_AUTO = 0,
  KT_SOLVER_NEWTON = 1,
} KtSolver;

typedef enum KtStatus {
  KT_STATUS_OK = 0,
  KT_STATUS_NULL_POINTER = 1,
  KT_STATUS_INVALID_CONFIG = 2,
  KT_STATUS_REGIME = 3,
  KT_STATUS_NUMERIC = 4,
  KT_STATUS_IO = 5,
  KT_STATUS_BUFFER_TOO_SMALL = 6,
  KT_STATUS_PANIC = 7,
} KtStatus;

/*
 Chain parameters.
 */
typedef struct KtConfig KtConfig;

/*
 Semiclassical squared amplitudes of a solved chain.
 */
typedef struct KtProfile KtProfile;

/*
 Positive excitation energies of a solved open or periodic chain, with
 the in-gap flag of each level.
 */
typedef struct KtSpectrum KtSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Version string of the library, static and NUL-terminated.
 */
const char *kt_version(void);

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len - 1` bytes). Returns the full message length in bytes.

 # Safety
 `buf` must be null or valid for `len` bytes.
 */
size_t kt_last_error_message(char *buf, size_t len);

/*
 Creates a validated configuration. `boundary` takes a `KtBoundary` value.

 # Safety
 `out` must be valid for writing one pointer.
 */
enum KtStatus kt_config_new(double omega,
                            double lambda,
                            double eps_l,
                            double eps_1,
                            double eps_2,
                            size_t n_cells,
                            int32_t boundary,
                            double delta_lambda,
                            struct KtConfig **out);

/*
 Parses a configuration from its JSON form.

 # Safety
 `json` must be a NUL-terminated string; `out` valid for one pointer.
 */
enum KtStatus kt_config_from_json(const char *json, struct KtConfig **out);

/*
 # Safety
 `cfg` must be null or a handle from `kt_config_new`/`kt_config_from_json`
 not yet freed.
 */
void kt_config_free(struct KtConfig *cfg);

/*
 Higgs-like energy `2 sqrt(lambda (lambda - omega))`; `KT_STATUS_REGIME`
 below threshold.

 # Safety
 `cfg` must be a live handle; `out` valid for writing.
 */
enum KtStatus kt_config_omega_h(const struct KtConfig *cfg, double *out);

/*
 Band energies `(E_minus, E_plus)` of the ring at momentum `k`.

 # Safety
 `cfg` must be a live handle; both outputs valid for writing.
 */
enum KtStatus kt_dispersion(const struct KtConfig *cfg, double k, double *e_minus, double *e_plus);

/*
 Winding of the band given as a `KtBand` value; `KT_STATUS_REGIME` when
 the gap is closed.

 # Safety
 `cfg` must be a live handle; `out` valid for writing.
 */
enum KtStatus kt_zak_winding(const struct KtConfig *cfg, int32_t band, int32_t *out);

/*
 Solves the mean-field equations of the chain with a `KtSolver` method.

 # Safety
 `cfg` must be a live handle; `out` valid for one pointer.
 */
enum KtStatus kt_profile_solve(const struct KtConfig *cfg, int32_t solver, struct KtProfile **out);

/*
 Number of cells of the profile (length of each amplitude array).

 # Safety
 `p` must be a live handle or null (returns 0).
 */
size_t kt_profile_len(const struct KtProfile *p);

/*
 Max-norm residual of the mean-field equations in units of `g^2`.

 # Safety
 `p` must be a live handle; `out` valid for writing.
 */
enum KtStatus kt_profile_residual(const struct KtProfile *p, double *out);

/*
 Copies `|alpha_n|^2` and `|beta_n|^2` into two buffers of `len` values.

 # Safety
 `p` must be a live handle; both buffers valid for `len` values.
 */
enum KtStatus kt_profile_amplitudes(const struct KtProfile *p,
                                    double *alpha_sq,
                                    double *beta_sq,
                                    size_t len);

/*
 # Safety
 `p` must be null or a handle from `kt_profile_solve` not yet freed.
 */
void kt_profile_free(struct KtProfile *p);

/*
 Solves profile, coefficients and excitation spectrum of the chain.

 # Safety
 `cfg` must be a live handle; `out` valid for one pointer.
 */
enum KtStatus kt_spectrum_solve(const struct KtConfig *cfg, struct KtSpectrum **out);

/*
 Number of positive levels (`2N`).

 # Safety
 `s` must be a live handle or null (returns 0).
 */
size_t kt_spectrum_len(const struct KtSpectrum *s);

/*
 Copies the ascending energies into `buf`.

 # Safety
 `s` must be a live handle; `buf` valid for `len` values.
 */
enum KtStatus kt_spectrum_energies(const struct KtSpectrum *s, double *buf, size_t len);

/*
 Number of levels inside the bulk gap (always 0 on a ring).

 # Safety
 `s` must be a live handle; `out` valid for writing.
 */
enum KtStatus kt_spectrum_in_gap_count(const struct KtSpectrum *s, size_t *out);

/*
 # Safety
 `s` must be null or a handle from `kt_spectrum_solve` not yet freed.
 */
void kt_spectrum_free(struct KtSpectrum *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KERRTOPO_H */
