#include <stdlib.h>

void work(int *out, int n, int *flag) {
  int i;
  int *tmp = malloc(n * sizeof(int));
  for (i = 0; i < n; i++)
    tmp[i] = out[i];
  *flag = 1;
  free(tmp);
}
