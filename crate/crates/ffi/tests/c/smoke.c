#include <stdio.h>
#include <string.h>

#include "staticgeo.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    SgSpacetime *st = NULL;
    CHECK(sg_spacetime_new("quad_beta", &st) == SG_STATUS_OK);
    CHECK(sg_spacetime_dim(st) == 2);

    double x[2] = {1.0, 2.0}, beta = 0.0;
    CHECK(sg_spacetime_beta(st, x, 2, &beta) == SG_STATUS_OK && beta == 6.0);

    double x0[2] = {-1.0, 0.0}, x1[2] = {1.0, 1.0};
    SgConnection *conn = NULL;
    CHECK(sg_connect(st, x0, x1, 2, 0.0, 3.0, 64, &conn) == SG_STATUS_OK);
    SgConnectStatus status;
    CHECK(sg_connection_status(conn, &status) == SG_STATUS_OK && status == SG_CONNECT_STATUS_GEODESIC);
    SgConnectSummary sum;
    CHECK(sg_connection_summary(conn, &sum) == SG_STATUS_OK && sum.residual < 1e-6);
    size_t n = sg_connection_len(conn);
    double t, node[2];
    CHECK(sg_connection_node(conn, n - 1, &t, node, 2) == SG_STATUS_OK);
    CHECK(t == 3.0 && node[0] == 1.0 && node[1] == 1.0);
    sg_connection_free(conn);

    SgTrajectory *tr = NULL;
    double v[2] = {0.3, 0.4};
    CHECK(sg_geodesic_integrate(st, 0.0, x0, 1.0, v, 2, 2.0, 0.0, &tr) == SG_STATUS_OK);
    double dl, dc;
    CHECK(sg_trajectory_drift(tr, &dl, &dc) == SG_STATUS_OK && dl < 1e-8);
    sg_trajectory_free(tr);

    CHECK(sg_spacetime_beta(st, x, 3, &beta) == SG_STATUS_VALIDATION);
    CHECK(strstr(sg_last_error_message(), "dimension") != NULL);
    sg_spacetime_free(st);

    SgSpacetime *bad = NULL;
    CHECK(sg_spacetime_new("nope", &bad) == SG_STATUS_VALIDATION && bad == NULL);

    char *cat = NULL;
    CHECK(sg_catalog_json(&cat) == SG_STATUS_OK && strstr(cat, "slit_plane") != NULL);
    sg_string_free(cat);

    puts("ok");
    return 0;
}
