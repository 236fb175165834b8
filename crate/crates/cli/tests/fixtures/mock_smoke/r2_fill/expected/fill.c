void fill(arr<char> dst : count(width), int width, char c) {
  int k;
  for (k = 0; k < width; k++) {
    dst[k] = c;
  }
}
