#include <stdlib.h>

int first(int m) {
  int *src = malloc(m * sizeof(int));
  int *view;
  src[0] = 7;
  view = src;
  return view[0];
}
