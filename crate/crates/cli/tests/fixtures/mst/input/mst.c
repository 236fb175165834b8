#include <stdio.h>
#include <stdlib.h>

#define INF 2147483647

typedef struct vert_st {
  int mindist;
  int id;
} Vertex;

void print_label(char *label) {
  while (*label)
    putchar(*label++);
}

void clear_done(int *done, int n) {
  int i;
  for (i = 0; i < n; i++)
    done[i] = 0;
}

void init_dists(int *dist, int n) {
  int i;
  for (i = 0; i < n; i++)
    dist[i] = INF;
}

int find_min(int *dist, int *done, int n) {
  int i;
  int best = -1;
  for (i = 0; i < n; i++)
    if (!done[i] && (best < 0 || dist[i] < dist[best]))
      best = i;
  return best;
}

void copy_row(int *dst, const int *src, int n) {
  int i;
  for (i = 0; i < n; i++)
    dst[i] = src[i];
}

int sum_weights(int *w, int n) {
  int i;
  int s = 0;
  for (i = 0; i < n; i++)
    s += w[i];
  return s;
}

int compute_mst(Vertex *g, int nvert) {
  int *dist = malloc(nvert * sizeof(int));
  int *done = malloc(nvert * sizeof(int));
  int k;
  int total;
  clear_done(done, nvert);
  init_dists(dist, nvert);
  dist[0] = 0;
  for (k = 0; k < nvert; k++) {
    int u = find_min(dist, done, nvert);
    done[u] = 1;
    g[u].mindist = dist[u];
  }
  total = sum_weights(dist, nvert);
  print_label("mst");
  free(dist);
  free(done);
  return total;
}
