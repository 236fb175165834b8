#include <stdio.h>
#include <stdlib.h>

#define INF 2147483647

typedef struct vert_st {
  int mindist;
  int id;
} Vertex;

void print_label(nt_arr<char> label : count(0)) {
  while (*label)
    putchar(*label++);
}

void clear_done(arr<int> done : count(n), int n) {
  int i;
  for (i = 0; i < n; i++)
    done[i] = 0;
}

void init_dists(arr<int> dist : count(n), int n) {
  int i;
  for (i = 0; i < n; i++)
    dist[i] = INF;
}

int find_min(arr<int> dist : count(n), arr<int> done : count(n), int n) {
  int i;
  int best = -1;
  for (i = 0; i < n; i++)
    if (!done[i] && (best < 0 || dist[i] < dist[best]))
      best = i;
  return best;
}

void copy_row(arr<int> dst : count(n), arr<const int> src : count(n), int n) {
  int i;
  for (i = 0; i < n; i++)
    dst[i] = src[i];
}

int sum_weights(arr<int> w : count(n), int n) {
  int i;
  int s = 0;
  for (i = 0; i < n; i++)
    s += w[i];
  return s;
}

int compute_mst(arr<Vertex> g : count(nvert), int nvert) {
  arr<int> dist : count(nvert) = malloc(nvert * sizeof(int));
  arr<int> done : count(nvert) = malloc(nvert * sizeof(int));
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
