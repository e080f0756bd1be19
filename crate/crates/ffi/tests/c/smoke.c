#include <math.h>
#include <stdio.h>
#include <string.h>

#include "ufest.h"

#define CHECK(call)                                                           \
  do {                                                                        \
    enum UfestStatus s_ = (call);                                             \
    if (s_ != UFEST_STATUS_OK) {                                              \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, ufest_last_error()); \
      return 1;                                                               \
    }                                                                         \
  } while (0)

int main(void) {
  UfestPlan *plan = NULL;
  CHECK(ufest_plan_new("{\"family\":\"trace\",\"d\":3}", &plan));

  UfestPlanInfo info;
  CHECK(ufest_plan_info(plan, &info));

  UfestComplex g[9];
  CHECK(ufest_sample_haar(3, 7, 0, g));

  UfestComplex exact, expect;
  CHECK(ufest_plan_eval(plan, g, 3, &exact));
  CHECK(ufest_plan_conditional_expectation(plan, g, 3, &expect));

  UfestPacResult pac;
  CHECK(ufest_plan_estimate(plan, g, 3, 0.1, 0.05, 7, 0, &pac));
  ufest_plan_free(plan);

  UfestPlan *bad = NULL;
  enum UfestStatus s = ufest_plan_new("{\"family\":\"nope\"}", &bad);
  int bad_ok = s == UFEST_STATUS_INVALID_SPEC && bad == NULL && strlen(ufest_last_error()) > 0;

  printf("m=%zu queries=%zu trace_norm=%.12f\n", info.m, info.queries_per_shot, info.trace_norm);
  printf("unbiased=%d\n", hypot(exact.re - expect.re, exact.im - expect.im) < 1e-9);
  printf("shots=%llu queries=%llu close=%d\n", (unsigned long long)pac.shots,
         (unsigned long long)pac.total_queries,
         hypot(pac.estimate.re - exact.re, pac.estimate.im - exact.im) < 0.1);
  printf("bad_spec=%d version=%s\n", bad_ok, ufest_version());
  return 0;
}
