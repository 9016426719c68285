#include <stdio.h>
#include <string.h>

#include "facetrec.h"

int main(void) {
    FrScoringKey *key = NULL;
    if (fr_scoring_key_default(&key) != FR_STATUS_OK) return 1;

    int32_t responses[FR_ITEM_COUNT];
    for (size_t i = 0; i < FR_ITEM_COUNT; i++) responses[i] = 3;
    responses[5] = 1; /* item 6, reverse-keyed under Assertiveness */
    double scores[FR_SCORE_COUNT];
    if (fr_score_inventory(key, responses, FR_ITEM_COUNT, scores, FR_SCORE_COUNT) != FR_STATUS_OK) return 2;
    printf("%s=%.4f\n", fr_score_name(5), scores[5]);

    responses[0] = 9;
    FrStatus st = fr_score_inventory(key, responses, FR_ITEM_COUNT, scores, FR_SCORE_COUNT);
    printf("status=%d message=%s\n", (int)st, fr_last_error_message());
    fr_scoring_key_free(key);

    uint8_t gold[4] = {1, 1, 0, 0};
    uint8_t pred[4] = {0, 0, 0, 0};
    double f1 = -1;
    if (fr_f1_macro(gold, pred, 4, &f1) != FR_STATUS_OK) return 3;
    printf("f1=%.6f\n", f1);
    printf("version=%s\n", fr_version());
    return st == FR_STATUS_VALIDATION ? 0 : 4;
}
