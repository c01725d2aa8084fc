#include <stdio.h>
#include <string.h>
#include "trimfit.h"

int main(void) {
    TrimfitProblem *problem = NULL;
    if (trimfit_problem_generate(500, 1.0, 0.3, 7, &problem) != TRIMFIT_STATUS_OK) {
        fprintf(stderr, "generate: %s\n", trimfit_last_error());
        return 1;
    }
    TrimfitSolver solver;
    if (trimfit_solver_from_name("robust_upnp_incr", &solver) != TRIMFIT_STATUS_OK) return 2;
    TrimfitOptions options = trimfit_options_default();
    options.seed = 3;
    TrimfitResult *result = NULL;
    if (trimfit_solve(problem, solver, &options, &result) != TRIMFIT_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", trimfit_last_error());
        return 3;
    }
    double r[9], t[3], gr[9], gt[3];
    trimfit_result_pose(result, r, t);
    trimfit_problem_ground_truth(problem, gr, gt);
    double err = 0.0;
    for (int i = 0; i < 9; i++) err += (r[i] - gr[i]) * (r[i] - gr[i]);
    printf("version %s inliers %zu err2 %g\n", trimfit_version(), trimfit_result_inlier_count(result), err);

    TrimfitProblem *bad = NULL;
    TrimfitStatus status = trimfit_problem_generate(5, 0.0, 0.0, 0, &bad);
    printf("small %s %s\n", trimfit_status_name(status), bad == NULL ? "null" : "set");

    trimfit_result_free(result);
    trimfit_problem_free(problem);
    return (err < 1e-3 && status == TRIMFIT_STATUS_INVALID_ARGUMENT) ? 0 : 4;
}
