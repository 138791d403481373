#include <math.h>
#include <stdio.h>
#include <string.h>

#include "qrepsim.h"

int main(void) {
    QrsMemory m = { -1.0 / 9e6, -1.0 / 5.4e6, 0.1, 1.0 };
    QrsRates r;
    if (qrs_bsm_rates(1e-3, 1e-3, 300, 300, 100000, 100000, &m, &m, &r) != QRS_STATUS_OK) return 1;
    if (!(r.attempted > 0.0 && r.successful <= r.attempted)) return 2;
    if (fabs(r.correct + r.erroneous - r.successful) > 1e-12 * r.successful) return 3;

    if (qrs_bsm_rates(2.0, 1e-3, 0, 0, 0, 0, &m, &m, &r) != QRS_STATUS_INVALID_ARGUMENT) return 4;
    const char *msg = qrs_last_error_message();
    if (msg == NULL || strstr(msg, "[0, 1]") == NULL) return 5;

    QrsScenario *s = NULL;
    if (qrs_scenario_from_toml("", &s) != QRS_STATUS_CONFIG || s != NULL) return 6;
    printf("ok %s\n", qrs_version());
    return 0;
}
