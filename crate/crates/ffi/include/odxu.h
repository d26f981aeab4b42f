#ifndef ODXU_H
#define ODXU_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum OdxuStatus {
  ODXU_STATUS_OK = 0,
  ODXU_STATUS_NULL_POINTER = 1,
  ODXU_STATUS_INVALID_ARGUMENT = 2,
  ODXU_STATUS_IO = 3,
  ODXU_STATUS_PARSE = 4,
  ODXU_STATUS_CHECKPOINT = 5,
  ODXU_STATUS_MISSING_SECTION = 6,
  ODXU_STATUS_DIMENSION_MISMATCH = 7,
  ODXU_STATUS_BUFFER_TOO_SMALL = 8,
  ODXU_STATUS_RUNTIME = 9,
  ODXU_STATUS_PANIC = 10,
} OdxuStatus;

// Opaque model bundle handle.
typedef struct OdxuBundle OdxuBundle;

// Opaque dataset handle.
typedef struct OdxuDataset OdxuDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *odxu_last_error_message(void);

// Number of payload bytes per record.
size_t odxu_payload_len(void);

// Generates a labelled synthetic dataset.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum OdxuStatus odxu_dataset_synth(size_t n_classes,
                                   size_t per_class,
                                   double overlap,
                                   uint64_t seed,
                                   struct OdxuDataset **out);

// Loads a dataset from CSV or the binary cache format.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum OdxuStatus odxu_dataset_load(const char *path, struct OdxuDataset **out);

// Writes a dataset; the format follows the file extension.
//
// # Safety
// `ds` must come from this library; `path` must be NUL-terminated.
enum OdxuStatus odxu_dataset_save(const struct OdxuDataset *ds, const char *path);

// Number of records; 0 for a null handle.
//
// # Safety
// `ds` must be null or come from this library.
size_t odxu_dataset_len(const struct OdxuDataset *ds);

// Number of distinct class labels; 0 for a null handle.
//
// # Safety
// `ds` must be null or come from this library.
size_t odxu_dataset_n_classes(const struct OdxuDataset *ds);

// Copies the raw payload bytes of record `index` into `out`.
//
// # Safety
// `ds` must come from this library; `out` must hold `cap` bytes.
enum OdxuStatus odxu_dataset_payload(const struct OdxuDataset *ds,
                                     size_t index,
                                     uint8_t *out,
                                     size_t cap);

// # Safety
// `ds` must be null or a handle not yet freed.
void odxu_dataset_free(struct OdxuDataset *ds);

// Loads a model bundle written by the pipeline.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum OdxuStatus odxu_bundle_load(const char *path, struct OdxuBundle **out);

// # Safety
// `b` must be null or a handle not yet freed.
void odxu_bundle_free(struct OdxuBundle *b);

// Width of the encoder output.
//
// # Safety
// `b` must come from this library; `out` must be writable.
enum OdxuStatus odxu_bundle_latent_dim(const struct OdxuBundle *b, size_t *out);

// Number of classes the classifier predicts.
//
// # Safety
// `b` must come from this library; `out` must be writable.
enum OdxuStatus odxu_bundle_n_classes(const struct OdxuBundle *b, size_t *out);

// Copies the NUL-terminated name of class `index` into `buf`.
//
// # Safety
// `b` must come from this library; `buf` must hold `cap` bytes.
enum OdxuStatus odxu_bundle_class_name(const struct OdxuBundle *b,
                                       size_t index,
                                       char *buf,
                                       size_t cap);

// Encodes one raw payload into its latent vector.
//
// # Safety
// `payload` must hold `len` bytes; `out` must hold `cap` doubles.
enum OdxuStatus odxu_bundle_encode(const struct OdxuBundle *b,
                                   const uint8_t *payload,
                                   size_t len,
                                   double *out,
                                   size_t cap);

// Class probabilities for one raw payload.
//
// # Safety
// `payload` must hold `len` bytes; `out` must hold `cap` doubles.
enum OdxuStatus odxu_bundle_predict_proba(const struct OdxuBundle *b,
                                          const uint8_t *payload,
                                          size_t len,
                                          double *out,
                                          size_t cap);

// Metamodel estimate that the classifier errs on one raw payload.
// `recipe` is one of `prob`, `shap` or `ig`.
//
// # Safety
// `recipe` must be NUL-terminated; `payload` must hold `len` bytes.
enum OdxuStatus odxu_bundle_meta_score(const struct OdxuBundle *b,
                                       const char *recipe,
                                       const uint8_t *payload,
                                       size_t len,
                                       double *out);

// Gap between the two largest probabilities.
//
// # Safety
// `probs` must hold `k` doubles; `out` must be writable.
enum OdxuStatus odxu_uq_confidence(const double *probs, size_t k, double *out);

// Shannon entropy in nats.
//
// # Safety
// `probs` must hold `k` doubles; `out` must be writable.
enum OdxuStatus odxu_uq_entropy(const double *probs, size_t k, double *out);

// Area under the ROC curve; higher scores should mean positive.
//
// # Safety
// `scores` and `labels` must hold `n` entries; `out` must be writable.
enum OdxuStatus odxu_eval_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

// True-positive rate at the threshold that keeps `tn_target` of negatives.
//
// # Safety
// `scores` and `labels` must hold `n` entries; `out` must be writable.
enum OdxuStatus odxu_eval_tp_at_tn(const double *scores,
                                   const uint8_t *labels,
                                   size_t n,
                                   double tn_target,
                                   double *out);

// Runs the full pipeline. `config_path` may be null for defaults.
//
// # Safety
// Both strings must be NUL-terminated when non-null.
enum OdxuStatus odxu_pipeline_run(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ODXU_H */
