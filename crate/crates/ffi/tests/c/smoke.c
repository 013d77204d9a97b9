#include <math.h>
#include <stdio.h>
#include "entbound.h"

int main(void) {
    EbModel *m = NULL;
    EbState *s = NULL;
    double e = 0, eln = 0, ov = 0;
    bool deg = true;
    if (eb_model_new_algebraic(4, 1.0, -1.0, 1.0, &m) != EB_STATUS_OK) return 1;
    if (eb_ground_state(m, &s, &e, &deg) != EB_STATUS_OK) return 2;
    if (eb_state_log_negativity(s, &eln) != EB_STATUS_OK) return 3;
    if (eb_state_bell_overlap(s, EB_BRANCH_FERRO, &ov) != EB_STATUS_OK) return 4;
    if (fabs(eln - ov) > 1e-8 || deg) return 5;
    if (eb_model_new_algebraic(4, 1.0, -1.0, 1.0, NULL) != EB_STATUS_NULL_POINTER) return 6;
    EbModel *bad = NULL;
    if (eb_model_new_algebraic(3, 1.0, -1.0, 1.0, &bad) != EB_STATUS_INVALID_ARGUMENT) return 7;
    if (eb_last_error_message() == NULL) return 8;
    eb_state_free(s);
    eb_model_free(m);
    printf("%.12f\n", eln);
    return 0;
}
