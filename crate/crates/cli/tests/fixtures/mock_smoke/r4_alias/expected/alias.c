#include <stdlib.h>

int first(int m) {
  arr<int> src : count(m) = malloc(m * sizeof(int));
  arr<int> view : count(m);
  src[0] = 7;
  view = src;
  return view[0];
}
