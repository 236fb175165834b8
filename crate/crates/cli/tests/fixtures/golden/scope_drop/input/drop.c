int *table;

void fill(int *dst, int n) {
  int i;
  int limit = n;
  for (i = 0; i < limit; i++)
    dst[i] = i;
}

int sum_prefix(int *v, int n) {
  int *w = v;
  int total = 0;
  int k;
  for (k = 0; k < n; k++)
    total += w[k];
  return total;
}

void touch(void) {
  table[2] = 1;
}
