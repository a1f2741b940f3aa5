#include <math.h>
#include <stdio.h>
#include "polyx.h"

int main(void) {
    const double offsets[] = {1, 1, 1, 1};
    const double normals[] = {1, 0, 0, 1, -1, 0, 0, -1};
    PolyxPolyhedron *h = NULL;
    if (polyx_polyhedron_new(2, 4, offsets, normals, &h) != POLYX_STATUS_OK) return 1;
    const double x[] = {3, 0.5};
    double y[2], d;
    if (polyx_min_norm(h, x, 2, y, &d) != POLYX_STATUS_OK) return 2;
    if (fabs(y[0] - 1) > 1e-12 || fabs(y[1] - 0.5) > 1e-12 || fabs(d - 2) > 1e-12) return 3;
    if (polyx_signed_distance(h, x, 1, &d) != POLYX_STATUS_DIMENSION_MISMATCH) return 4;
    if (polyx_last_error_message() == NULL) return 5;
    polyx_polyhedron_free(h);
    printf("ok %s\n", polyx_version());
    return 0;
}
