#include <stdio.h>
#include <string.h>

#include "proctor.h"

static int fail(const char *what, ProctorStatus st) {
    const char *msg = proctor_last_error();
    fprintf(stderr, "%s: status %d: %s\n", what, (int)st, msg ? msg : "");
    return 1;
}

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: smoke RECORDS\n");
        return 2;
    }
    ProctorConfig *cfg = NULL;
    ProctorStatus st = proctor_config_new(&cfg);
    if (st != PROCTOR_STATUS_OK) return fail("config_new", st);
    st = proctor_config_set(cfg, "link_gap_sec", "2.0");
    if (st != PROCTOR_STATUS_OK) return fail("config_set", st);

    ProctorReport *report = NULL;
    st = proctor_analyze_file(argv[1], cfg, false, &report);
    proctor_config_free(cfg);
    if (st != PROCTOR_STATUS_OK) return fail("analyze_file", st);

    ProctorLabel overall;
    proctor_report_overall(report, &overall);
    printf("overall %s\n", overall == PROCTOR_LABEL_SUSPICIOUS ? "suspicious" : "clean");

    ProctorFieldSummary field;
    proctor_report_field(report, PROCTOR_EVENT_KIND_DEVICE, &field);
    for (size_t i = 0; i < field.interval_count; i++) {
        ProctorInterval iv;
        proctor_report_interval(report, PROCTOR_EVENT_KIND_DEVICE, i, &iv);
        printf("device %.3f %.3f\n", iv.start_sec, iv.end_sec);
    }

    double a[128], b[128], d = -1.0;
    for (int i = 0; i < 128; i++) a[i] = b[i] = 0.1;
    b[5] = 0.4;
    st = proctor_masked_distance(a, b, 128, 0.01, &d);
    if (st != PROCTOR_STATUS_OK) return fail("masked_distance", st);
    printf("distance %.3f\n", d);

    st = proctor_report_interval(report, PROCTOR_EVENT_KIND_DEVICE, 0, NULL);
    printf("null out -> %d\n", (int)st);
    proctor_report_free(report);
    return 0;
}
