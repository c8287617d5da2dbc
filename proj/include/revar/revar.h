/* C interface to the revar library. */
#ifndef REVAR_REVAR_H
#define REVAR_REVAR_H

#include <stddef.h>
#include <stdint.h>

#if defined(REVAR_BUILDING_LIBRARY)
#define REVAR_API __attribute__((visibility("default")))
#else
#define REVAR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returning int returns one of these. */
enum {
  REVAR_OK = 0,
  REVAR_ERROR_INPUT = -1,      /* bad arguments or inconsistent data */
  REVAR_ERROR_FORMAT = -2,     /* container on disk is malformed */
  REVAR_ERROR_IO = -3,
  REVAR_ERROR_NUMERICAL = -4,  /* degenerate numerics */
  REVAR_ERROR_STABILITY = -5,  /* synthesis diverged */
  REVAR_ERROR_NULL_POINTER = -6,
  REVAR_ERROR_INSUFFICIENT_BUFFER = -7,
  REVAR_ERROR_UNKNOWN = -100
};

enum { REVAR_CONTAINER_UNKNOWN = 0, REVAR_CONTAINER_PSS = 1, REVAR_CONTAINER_MODEL = 2 };

typedef struct revar_series revar_series;
typedef struct revar_model revar_model;
typedef struct revar_stream revar_stream;
typedef struct revar_evaluation revar_evaluation;
typedef struct revar_sweep revar_sweep;

REVAR_API const char* revar_version(void);
REVAR_API const char* revar_error_name(int code);
/* Message of the most recent failure on the calling thread ("" if none). */
REVAR_API const char* revar_last_error(void);

/*
 * String outputs follow one protocol: *len holds the capacity of buf on
 * entry. If buf is NULL or too small the call returns
 * REVAR_ERROR_INSUFFICIENT_BUFFER and sets *len to the size required,
 * including the terminating NUL; otherwise it copies and sets *len to the
 * number of bytes written, NUL included. Numeric outputs shorter than the
 * result also return REVAR_ERROR_INSUFFICIENT_BUFFER.
 *
 * Option arguments are JSON objects (NULL or "" for defaults); unknown keys
 * are rejected.
 */

/* ---- phase-screen series ---- */
REVAR_API int revar_series_read(const char* path, revar_series** out);
/* Writes a PSS directory; includes coeffs.f64 when the series carries coefficients. */
REVAR_API int revar_series_write(const revar_series* series, const char* path);
/* mask: rows*cols bytes (non-zero = valid) or NULL for the full rectangle.
 * data: frames * pixel_count doubles, frame-major, masked pixels row-major. */
REVAR_API int revar_series_create(size_t rows, size_t cols, const uint8_t* mask, double pitch_x,
                                  double pitch_y, size_t frames, const double* data,
                                  double sampling_frequency, revar_series** out);
REVAR_API void revar_series_destroy(revar_series* series);
REVAR_API int revar_series_dims(const revar_series* series, size_t* rows, size_t* cols,
                                size_t* pixels, size_t* frames);
REVAR_API int revar_series_copy_frames(const revar_series* series, size_t first, size_t count,
                                       double* out, size_t out_len);
/* Top principal coefficients of a generated series (only with "coefficients": true),
 * frames x components row-major. Sets *components first, so out may be NULL to query. */
REVAR_API int revar_series_coefficients(const revar_series* series, size_t* components,
                                        double* out, size_t out_len);
/* meta.json-style summary plus the pixel-averaged TPS peak when long enough. */
REVAR_API int revar_series_info_json(const revar_series* series, char* buf, size_t* len);
/* held_out may be NULL; it is set to NULL when the split leaves no frames. */
REVAR_API int revar_series_split(const revar_series* series, double train_fraction,
                                 revar_series** training, revar_series** held_out);

/* ---- models ---- */
/* Options: lags, filters, variance_fraction, train_fraction, segment_length,
 * overlap, window, alpha_rule, alphas, baseline ("vogel" or bool), threads,
 * pixel_floor, inverse_floor, first_target. */
REVAR_API int revar_model_fit(const revar_series* series, const char* options_json,
                              revar_model** out);
REVAR_API int revar_model_save(const revar_model* model, const char* path);
REVAR_API int revar_model_load(const char* path, revar_model** out);
REVAR_API void revar_model_destroy(revar_model* model);
REVAR_API int revar_model_info_json(const revar_model* model, char* buf, size_t* len);
/* Fit report (null JSON when the model was neither fitted nor saved with one). */
REVAR_API int revar_model_report_json(const revar_model* model, char* buf, size_t* len);

/* ---- synthesis ---- */
/* Options: burn_in, filter_init ("warm"|"zero"), initial_vectors
 * ("first-pca"|"residual"), coefficients (bool). */
REVAR_API int revar_generate(const revar_model* model, size_t frames, uint64_t seed,
                             const char* options_json, revar_series** out);
/* The stream keeps its own reference to the model. */
REVAR_API int revar_stream_create(const revar_model* model, uint64_t seed,
                                  const char* options_json, revar_stream** out);
REVAR_API int revar_stream_next(revar_stream* stream, double* frame, size_t frame_len);
REVAR_API int revar_stream_position(const revar_stream* stream, uint64_t* position);
REVAR_API int revar_stream_checkpoint(const revar_stream* stream, char* buf, size_t* len);
REVAR_API int revar_stream_restore(const revar_model* model, const char* checkpoint_json,
                                   revar_stream** out);
REVAR_API void revar_stream_destroy(revar_stream* stream);

/* ---- evaluation ---- */
/* Options: segment_length, overlap, window, max_dx, max_dy, min_pairs,
 * remove_piston, threads. */
REVAR_API int revar_evaluate(const revar_series* reference, const revar_series* synthetic,
                             const char* options_json, revar_evaluation** out);
/* Additional options: seed (required), replicates, length_factor, length,
 * train_fraction (reference = frames after the training split; 1.0 uses all),
 * burn_in, filter_init, initial_vectors. */
REVAR_API int revar_evaluate_model(const revar_series* reference, const revar_model* model,
                                   const char* options_json, revar_evaluation** out);
/* metrics[0..3]: OPD TPS NRMSE, slopes TPS NRMSE, OPD_rms relative error,
 * structure-function NRMSE. */
REVAR_API int revar_evaluation_metrics(const revar_evaluation* evaluation, double metrics[4]);
REVAR_API int revar_evaluation_json(const revar_evaluation* evaluation, char* buf, size_t* len);
/* report.json, CSV curves and SVG plots. */
REVAR_API int revar_evaluation_write(const revar_evaluation* evaluation, const char* dir);
REVAR_API void revar_evaluation_destroy(revar_evaluation* evaluation);

/* ---- lag sweep ---- */
/* Options: the fit options plus the model-evaluation options; replicates 0
 * skips evaluation. */
REVAR_API int revar_sweep_lags(const revar_series* series, const size_t* lags, size_t count,
                               const char* options_json, revar_sweep** out);
REVAR_API int revar_sweep_json(const revar_sweep* sweep, char* buf, size_t* len);
REVAR_API int revar_sweep_write(const revar_sweep* sweep, const char* dir);
REVAR_API void revar_sweep_destroy(revar_sweep* sweep);

/* ---- oracles and containers ---- */
/* truth may be NULL; it is set to NULL for oracle kinds without parameters. */
REVAR_API int revar_make_oracle(const char* spec_json, revar_series** series,
                                revar_model** truth);
REVAR_API int revar_detect_container(const char* path, int* kind);

#ifdef __cplusplus
}
#endif

#endif /* REVAR_REVAR_H */
