#ifndef MUNTZ_H
#define MUNTZ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum MuntzStatus {
  MUNTZ_STATUS_OK = 0,
  MUNTZ_STATUS_NULL_POINTER = 1,
  MUNTZ_STATUS_INVALID_ARGUMENT = 2,
  MUNTZ_STATUS_PRECISION_INSUFFICIENT = 3,
  MUNTZ_STATUS_DOMAIN = 4,
  MUNTZ_STATUS_NON_MEMBER = 5,
  MUNTZ_STATUS_IO = 6,
  MUNTZ_STATUS_PANIC = 7,
} MuntzStatus;

// Validated exponent sequence.
typedef struct MuntzExponents MuntzExponents;

// Biorthogonal family of a truncation.
typedef struct MuntzFamily MuntzFamily;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *muntz_last_error(void);

// Free a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void muntz_string_free(char *s);

// Generate `n` exponents of kind `"power"`, `"integers"` (parameter `p`) or
// `"lacunary"` (parameter `q`).
//
// # Safety
// `kind` must be a NUL-terminated string and `out` a valid pointer.
enum MuntzStatus muntz_exponents_generate(const char *kind,
                                          double param,
                                          uintptr_t n,
                                          struct MuntzExponents **out);

// Wrap `len` strictly increasing positive exponents.
//
// # Safety
// `values` must point to `len` doubles and `out` be a valid pointer.
enum MuntzStatus muntz_exponents_from_values(const double *values,
                                             uintptr_t len,
                                             struct MuntzExponents **out);

// Number of stored exponents.
//
// # Safety
// `e` must be a live handle or null.
uintptr_t muntz_exponents_len(const struct MuntzExponents *e);

// # Safety
// `e` must come from this library and not have been freed.
void muntz_exponents_free(struct MuntzExponents *e);

// Biorthogonal family of the first `n` exponents at `bits` of precision,
// raising precision up to `4 * bits` when needed.
//
// # Safety
// `e` must be a live handle and `out` a valid pointer.
enum MuntzStatus muntz_family_new(const struct MuntzExponents *e,
                                  uintptr_t n,
                                  uint32_t bits,
                                  struct MuntzFamily **out);

// # Safety
// `f` must come from this library and not have been freed.
void muntz_family_free(struct MuntzFamily *f);

// Truncation `N` of a family; 0 for null.
//
// # Safety
// `f` must be a live handle or null.
uintptr_t muntz_family_truncation(const struct MuntzFamily *f);

// `‖r_n‖` for `1 ≤ n ≤ N`, rounded to double.
//
// # Safety
// `f` must be a live handle and `out` a valid pointer.
enum MuntzStatus muntz_family_norm(const struct MuntzFamily *f, uintptr_t n, double *out);

// Distance from `t^{λ_n}` to the span of the other `N - 1` monomials.
//
// # Safety
// `f` must be a live handle and `out` a valid pointer.
enum MuntzStatus muntz_family_distance(const struct MuntzFamily *f, uintptr_t n, double *out);

// Coefficients of `r_n` in the monomials `t^{λ_1..λ_N}`, written to `out[0..N]`.
//
// # Safety
// `f` must be a live handle and `out` point to room for `N` doubles.
enum MuntzStatus muntz_family_dual_coefficients(const struct MuntzFamily *f,
                                                uintptr_t n,
                                                double *out);

// Exact `⟨f, r_n⟩` for the real finite series `Σ coeffs[i] t^{exponents[i]}`,
// written to `out[0..N]`.
//
// # Safety
// `exponents` and `coeffs` must point to `len` doubles, `out` to `N` doubles.
enum MuntzStatus muntz_family_recover(const struct MuntzFamily *f,
                                      const double *exponents,
                                      const double *coeffs,
                                      uintptr_t len,
                                      double *out);

// Spectral-synthesis certificate of the dilation `f(x) ↦ f(ρx)` truncated to
// the family, as a JSON string to be released with `muntz_string_free`.
//
// # Safety
// `f` must be a live handle and `out_json` a valid pointer.
enum MuntzStatus muntz_certify_dilation(const struct MuntzFamily *f,
                                        double rho,
                                        uint64_t seed,
                                        char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MUNTZ_H */
