typedef unsigned int uint32_t;

static void byteReverse(
  unsigned char* buf,
  unsigned longs) {
  uint32_t t;
  do {
    t = (uint32_t)
    ((unsigned) buf[3] << 8 | buf[2]) << 16 |
    ((unsigned) buf[1] << 8 | buf[0]);
    *(uint32_t *) buf = t; buf += 4;
  } while (--longs);
}
