#ifndef CFKGR_H
#define CFKGR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum CfkgrStatus {
  CFKGR_STATUS_OK = 0,
  CFKGR_STATUS_NULL_POINTER = 1,
  CFKGR_STATUS_INVALID_UTF8 = 2,
  CFKGR_STATUS_NOT_FOUND = 3,
  CFKGR_STATUS_IO = 4,
  CFKGR_STATUS_PARSE = 5,
  CFKGR_STATUS_UNKNOWN_SYMBOL = 6,
  CFKGR_STATUS_OUT_OF_RANGE = 7,
  CFKGR_STATUS_CHECKPOINT = 8,
  CFKGR_STATUS_INVALID_INPUT = 9,
  CFKGR_STATUS_PANIC = 10,
} CfkgrStatus;

/*
 A loaded knowledge graph.
 */
typedef struct CfkgrKg CfkgrKg;

/*
 A trained embedding model.
 */
typedef struct CfkgrModel CfkgrModel;

/*
 Per-relation classification thresholds.
 */
typedef struct CfkgrThresholds CfkgrThresholds;

/*
 A triple of entity and relation ids.
 */
typedef struct CfkgrTriple {
  uint32_t head;
  uint32_t relation;
  uint32_t tail;
} CfkgrTriple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Error message of the last call on this thread; empty when that call
 succeeded. The pointer stays valid until the next call on the same thread.
 */
const char *cfkgr_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *cfkgr_version(void);

/*
 Loads `train.txt`, `valid.txt`, `test.txt` and optional side files from
 `dir`.

 # Safety
 `dir` must be a NUL-terminated string and `out` a writable pointer.
 */
enum CfkgrStatus cfkgr_kg_load(const char *dir, struct CfkgrKg **out);

/*
 # Safety
 `kg` must come from [`cfkgr_kg_load`] and not be used afterwards. Null is
 ignored.
 */
void cfkgr_kg_free(struct CfkgrKg *kg);

/*
 # Safety
 `kg` must be a live handle and `out` writable.
 */
enum CfkgrStatus cfkgr_kg_num_entities(const struct CfkgrKg *kg, size_t *out);

/*
 # Safety
 `kg` must be a live handle and `out` writable.
 */
enum CfkgrStatus cfkgr_kg_num_relations(const struct CfkgrKg *kg, size_t *out);

/*
 Looks up the id of an entity label.

 # Safety
 `kg` must be a live handle, `label` NUL-terminated and `out` writable.
 */
enum CfkgrStatus cfkgr_kg_entity_id(const struct CfkgrKg *kg, const char *label, uint32_t *out);

/*
 Looks up the id of a relation label.

 # Safety
 `kg` must be a live handle, `label` NUL-terminated and `out` writable.
 */
enum CfkgrStatus cfkgr_kg_relation_id(const struct CfkgrKg *kg, const char *label, uint32_t *out);

/*
 Writes 1 to `out` if the triple is a fact of any split, else 0.

 # Safety
 `kg` must be a live handle and `out` writable.
 */
enum CfkgrStatus cfkgr_kg_is_fact(const struct CfkgrKg *kg,
                                  struct CfkgrTriple triple,
                                  uint8_t *out);

/*
 Loads a checkpoint written by `cfkgr train`.

 # Safety
 `path` must be NUL-terminated and `out` writable.
 */
enum CfkgrStatus cfkgr_model_load(const char *path, struct CfkgrModel **out);

/*
 # Safety
 `model` must come from [`cfkgr_model_load`] and not be used afterwards.
 Null is ignored.
 */
void cfkgr_model_free(struct CfkgrModel *model);

/*
 Scores `n` triples in evaluation mode into `scores`.

 # Safety
 `model` must be a live handle; `triples` and `scores` must hold `n`
 elements each.
 */
enum CfkgrStatus cfkgr_model_score(const struct CfkgrModel *model,
                                   const struct CfkgrTriple *triples,
                                   size_t n,
                                   double *scores);

/*
 Loads a thresholds JSON file; relation labels resolve against `kg`.

 # Safety
 `path` must be NUL-terminated, `kg` a live handle and `out` writable.
 */
enum CfkgrStatus cfkgr_thresholds_load(const char *path,
                                       const struct CfkgrKg *kg,
                                       struct CfkgrThresholds **out);

/*
 # Safety
 `th` must come from [`cfkgr_thresholds_load`] and not be used afterwards.
 Null is ignored.
 */
void cfkgr_thresholds_free(struct CfkgrThresholds *th);

/*
 Threshold applied to `relation`; infinities are returned as such.

 # Safety
 `th` must be a live handle and `out` writable.
 */
enum CfkgrStatus cfkgr_thresholds_lookup(const struct CfkgrThresholds *th,
                                         uint32_t relation,
                                         double *out);

/*
 Writes 1 for each triple whose score reaches its relation's threshold,
 else 0.

 # Safety
 `model` and `th` must be live handles; `triples` and `labels` must hold
 `n` elements each.
 */
enum CfkgrStatus cfkgr_classify(const struct CfkgrModel *model,
                                const struct CfkgrThresholds *th,
                                const struct CfkgrTriple *triples,
                                size_t n,
                                uint8_t *labels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CFKGR_H */
