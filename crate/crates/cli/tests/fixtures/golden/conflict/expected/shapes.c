#include <stdlib.h>

struct x {
  int count_for_p;
  arr<int> p : count(count_for_p);
  int n;
};

void init_small(struct x *a) {
  a->p = malloc(sizeof(int) * 8),
  a->count_for_p = 8;
  a->p[0] = 0;
}

void init_large(struct x *a) {
  a->p = malloc(sizeof(int) * 16),
  a->count_for_p = 16;
  a->p[15] = 0;
}
