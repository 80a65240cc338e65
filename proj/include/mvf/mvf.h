/* C interface to the video forgery detection and localization library.
 *
 * Every function returning int reports an mvf_status; on failure the message
 * is available from mvf_last_error() on the same thread until the next call.
 * Handles are opaque and owned by the caller (free with the matching _free). */
#ifndef MVF_MVF_H
#define MVF_MVF_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define MVF_API __declspec(dllexport)
#else
#define MVF_API __attribute__((visibility("default")))
#endif

typedef enum mvf_status {
  MVF_OK = 0,
  MVF_E_INVALID_ARGUMENT = 1,
  MVF_E_NOT_FOUND = 2,
  MVF_E_IO = 3,
  MVF_E_CONFIG = 4,
  MVF_E_NUMERIC = 5,
  MVF_E_SHAPE = 6,
  MVF_E_INTERNAL = 7
} mvf_status;

typedef enum mvf_log_level { MVF_LOG_DEBUG = 0, MVF_LOG_INFO = 1, MVF_LOG_WARN = 2, MVF_LOG_ERROR = 3 } mvf_log_level;

typedef struct mvf_config mvf_config;
typedef struct mvf_model mvf_model;

typedef void (*mvf_log_fn)(int level, const char* message, void* user);

MVF_API const char* mvf_version(void);
/* Message of the last failed call on this thread ("" if none). */
MVF_API const char* mvf_last_error(void);
/* Stable lower-case name of a status code, e.g. "not_found". */
MVF_API const char* mvf_status_name(int status);
/* Routes library log lines to `fn`; NULL restores stderr logging. */
MVF_API void mvf_set_log_callback(mvf_log_fn fn, void* user);
/* Strings returned through char** out-parameters are released with this. */
MVF_API void mvf_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */
MVF_API int mvf_config_new(mvf_config** out);
MVF_API void mvf_config_free(mvf_config* cfg);
/* Merges a YAML file; every unknown key or bad value is reported at once. */
MVF_API int mvf_config_load(mvf_config* cfg, const char* path);
/* Applies one "section.key=value" override. */
MVF_API int mvf_config_set(mvf_config* cfg, const char* assignment);
MVF_API int mvf_config_to_yaml(const mvf_config* cfg, char** out);
MVF_API int mvf_config_to_json(const mvf_config* cfg, char** out);

/* ---- workflows (each writes its artifacts into out_dir) --------------- */
MVF_API int mvf_generate_data(const mvf_config* cfg, const char* out_dir);
MVF_API int mvf_pretrain(const mvf_config* cfg, const char* data_dir, const char* out_dir);
/* pretrained_ckpt and resume_ckpt may be NULL. */
MVF_API int mvf_train(const mvf_config* cfg, const char* data_dir, const char* pretrained_ckpt,
                      const char* resume_ckpt, const char* out_dir);
MVF_API int mvf_evaluate(const mvf_config* cfg, const char* ckpt, const char* const* data_dirs, size_t n_dirs,
                         const char* out_dir);
MVF_API int mvf_sweep(const mvf_config* cfg, const char* ckpt, const char* const* data_dirs, size_t n_dirs,
                      const char* out_dir);
MVF_API int mvf_infer_clip(const mvf_config* cfg, const char* ckpt, const char* clip_dir, const char* out_dir);
MVF_API int mvf_plot(const char* input, const char* output_svg);

/* ---- in-memory inference ---------------------------------------------- */
MVF_API int mvf_model_load(const char* ckpt, mvf_model** out);
MVF_API void mvf_model_free(mvf_model* model);
/* Comma-separated ablation flags; "" clears them. */
MVF_API int mvf_model_set_ablation(mvf_model* model, const char* flags);
/* frames: T*3*H*W floats in [0,1], planar per frame. Writes T scores and
 * T*H*W mask probabilities. */
MVF_API int mvf_model_infer(mvf_model* model, const float* frames, int t, int h, int w, float* scores_out,
                            float* masks_out);

#ifdef __cplusplus
}
#endif

#endif /* MVF_MVF_H */
