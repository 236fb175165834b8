#include <stdlib.h>

void zero_grid(int rows) {
  arr<double> cells : count(rows);
  cells = calloc(rows, sizeof(double));
  cells[0] = 1.0;
  free(cells);
}
