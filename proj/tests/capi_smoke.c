/* Plain C consumer of the public header. */
#include <stdio.h>
#include <string.h>

#include "ltm/ltm.h"

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
              ltm_last_error());                                  \
      return 1;                                                   \
    }                                                             \
  } while (0)

static const char* kModel =
    "{\"format_version\":1,"
    "\"variables\":[{\"name\":\"Y\",\"kind\":\"latent\",\"cardinality\":2},"
    "{\"name\":\"a\",\"kind\":\"observed\",\"cardinality\":2},"
    "{\"name\":\"b\",\"kind\":\"observed\",\"cardinality\":2}],"
    "\"edges\":[[\"Y\",\"a\"],[\"Y\",\"b\"]],\"root\":\"Y\","
    "\"cpts\":[{\"node\":\"Y\",\"parent\":null,\"rows\":1,\"table\":[0.4,0.6]},"
    "{\"node\":\"a\",\"parent\":\"Y\",\"rows\":2,\"table\":[0.9,0.1,0.2,0.8]},"
    "{\"node\":\"b\",\"parent\":\"Y\",\"rows\":2,\"table\":[0.7,0.3,0.1,0.9]}]}";

int main(void) {
  ltm_model* model = NULL;
  ltm_dataset* data = NULL;
  ltm_rule* rule = NULL;
  char* text = NULL;
  double ll = 0, bic = 0;
  int target = 1;

  EXPECT(ltm_model_from_json(kModel, &model) == LTM_OK);
  EXPECT(ltm_model_num_variables(model) == 3);
  EXPECT(ltm_model_dimension(model) == 5);
  EXPECT(ltm_model_sample(model, 200, 7, 0, &data) == LTM_OK);
  EXPECT(ltm_dataset_num_records(data) == 200);
  EXPECT(ltm_model_loglik(model, data, &ll, &bic) == LTM_OK);
  EXPECT(bic < ll);
  EXPECT(ltm_rule_derive(model, "Y", &target, 1, "T", 0.0, &rule) == LTM_OK);
  EXPECT(ltm_rule_to_tsv(rule, &text) == LTM_OK);
  EXPECT(strncmp(text, "symptom\tscore\n", 14) == 0);
  ltm_string_free(text);
  EXPECT(ltm_model_from_json("{", &model) == LTM_ERR_DATA);
  EXPECT(strlen(ltm_last_error()) > 0);
  EXPECT(ltm_report_partition(model, "a", 0, 0, &text) != LTM_OK);
  ltm_rule_free(rule);
  ltm_dataset_free(data);
  ltm_model_free(model);
  puts("ok");
  return 0;
}
