#include <stdlib.h>

typedef unsigned long ulong;

ulong channelNets;
ulong channelTracks;

long **costMatrix;

void AllocAssign(void) {
  ulong net; ulong n = channelNets+1;
  costMatrix =
    (long**) malloc(n * sizeof(long *));
  for (net = 1; net <= channelNets; net++) {
    costMatrix[net] =
      malloc((channelTracks+2) * sizeof(long));
  }
}
