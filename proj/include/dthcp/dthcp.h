/* C interface to the dthcp library. All functions are thread-safe with respect
 * to distinct handles; the last-error string is thread-local. */
#ifndef DTHCP_H
#define DTHCP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DTHCP_API __declspec(dllexport)
#else
#define DTHCP_API __attribute__((visibility("default")))
#endif

typedef enum dthcp_status {
    DTHCP_OK = 0,
    DTHCP_ERR_INVARIANT = 1, /* internal invariant violated */
    DTHCP_ERR_BAD_INPUT = 2, /* invalid argument, malformed or missing file */
    DTHCP_ERR_INTERNAL = 3,
    DTHCP_ERR_NO_MEMORY = 4
} dthcp_status;

typedef struct dthcp_config dthcp_config;
typedef struct dthcp_heatmap dthcp_heatmap;
typedef struct dthcp_scene dthcp_scene;
typedef struct dthcp_cluster_set dthcp_cluster_set;

typedef enum dthcp_member_kind {
    DTHCP_MEMBER_PROPOSAL = 0,
    DTHCP_MEMBER_LOW_BOX = 1,
    DTHCP_MEMBER_SCALED_HIGH_BOX = 2
} dthcp_member_kind;

DTHCP_API const char* dthcp_version(void);
/* Message of the last failed call on this thread; "" if none. */
DTHCP_API const char* dthcp_last_error(void);
DTHCP_API void dthcp_string_free(char* s);

/* Config: defaults on create; keys are the flat names of the config file. */
DTHCP_API dthcp_status dthcp_config_create(dthcp_config** out);
DTHCP_API void dthcp_config_destroy(dthcp_config* cfg);
DTHCP_API dthcp_status dthcp_config_set(dthcp_config* cfg, const char* key, const char* value);
DTHCP_API dthcp_status dthcp_config_get(const dthcp_config* cfg, const char* key, char** out);
DTHCP_API dthcp_status dthcp_config_load(dthcp_config* cfg, const char* path);
DTHCP_API dthcp_status dthcp_config_to_json(const dthcp_config* cfg, char** out);

/* Geometry helper: boxes are {x1, y1, x2, y2}. */
DTHCP_API dthcp_status dthcp_iou(const double a[4], const double b[4], double* out);

/* Heatmaps hold values in [0, 1], row-major. */
DTHCP_API dthcp_status dthcp_heatmap_create(int class_id, int rows, int cols, const double* values,
                                            dthcp_heatmap** out);
DTHCP_API dthcp_status dthcp_heatmap_load(const char* path, int class_id, dthcp_heatmap** out);
DTHCP_API void dthcp_heatmap_destroy(dthcp_heatmap* h);

DTHCP_API dthcp_status dthcp_scene_generate(const dthcp_config* cfg, uint64_t seed, dthcp_scene** out);
DTHCP_API dthcp_status dthcp_scene_load(const char* dir, dthcp_scene** out);
DTHCP_API dthcp_status dthcp_scene_save(const dthcp_scene* scene, const char* dir);
DTHCP_API void dthcp_scene_destroy(dthcp_scene* scene);
DTHCP_API size_t dthcp_scene_num_proposals(const dthcp_scene* scene);
DTHCP_API size_t dthcp_scene_num_instances(const dthcp_scene* scene);
DTHCP_API dthcp_status dthcp_scene_proposal(const dthcp_scene* scene, size_t i, double box[4]);
DTHCP_API dthcp_status dthcp_scene_instance(const dthcp_scene* scene, size_t i, int* class_id, double box[4]);

/* Cluster construction from a scene, or from heatmaps of the present classes
 * (maps[i] must carry the class id of a label equal to 1). proposals holds
 * num_proposals boxes as 4 consecutive doubles each. */
DTHCP_API dthcp_status dthcp_clusters_from_scene(const dthcp_config* cfg, const dthcp_scene* scene,
                                                 dthcp_cluster_set** out);
DTHCP_API dthcp_status dthcp_clusters_build(const dthcp_config* cfg, const dthcp_heatmap* const* maps,
                                            size_t num_maps, const int* labels, size_t num_classes,
                                            const double* proposals, size_t num_proposals, double width,
                                            double height, dthcp_cluster_set** out);
DTHCP_API void dthcp_clusters_destroy(dthcp_cluster_set* set);
DTHCP_API size_t dthcp_clusters_count(const dthcp_cluster_set* set);
DTHCP_API dthcp_status dthcp_clusters_info(const dthcp_cluster_set* set, size_t i, int* class_id,
                                           size_t* num_members);
DTHCP_API dthcp_status dthcp_clusters_member(const dthcp_cluster_set* set, size_t i, size_t j,
                                             dthcp_member_kind* kind, size_t* row, double box[4]);
DTHCP_API dthcp_status dthcp_clusters_to_json(const dthcp_cluster_set* set, char** out);

/* Commands. Optional string arguments may be NULL or "". */
typedef struct dthcp_cluster_args {
    const char* bundle_dir;
    const char* const* heatmaps;
    size_t num_heatmaps;
    const char* proposals;
    const char* labels;
    const char* out;
    const char* overlay;
    int overlay_zoom; /* <= 0 selects the default */
} dthcp_cluster_args;

DTHCP_API dthcp_status dthcp_run_synth(const dthcp_config* cfg, const char* out_dir);
DTHCP_API dthcp_status dthcp_run_cluster(const dthcp_config* cfg, const dthcp_cluster_args* args);
DTHCP_API dthcp_status dthcp_run_train(const dthcp_config* cfg, const char* scene_dir, const char* eval_dir,
                                       const char* out_dir);
DTHCP_API dthcp_status dthcp_run_eval(const dthcp_config* cfg, const char* detections, const char* ground_truth,
                                      const char* pseudo_gt, const char* out);

#ifdef __cplusplus
}
#endif

#endif
