#include <stdlib.h>

void work(arr<int> out : count(n), int n, int *flag) {
  int i;
  arr<int> tmp : count(n) = malloc(n * sizeof(int));
  for (i = 0; i < n; i++)
    tmp[i] = out[i];
  *flag = 1;
  free(tmp);
}
