struct bin_to_ascii_ret {
  unsigned int stored;
  int last_was_cr;
};

struct bin_to_ascii_ret
vsf_ascii_bin_to_ascii(
  const char* p_in,
  char* p_out,
  unsigned int in_len, int prev_cr) {
  struct bin_to_ascii_ret ret;
  unsigned int indexx = 0;
  unsigned int written = 0;
  char last_char = 0;
  ret.last_was_cr = 0;
  if (prev_cr) {
    last_char = '\r';
  }
  while (indexx < in_len) {
    char the_char = p_in[indexx];
    if (the_char == '\n' && last_char != '\r') {
      *p_out++ = '\r';
      written++;
    }
    *p_out++ = the_char;
    written++;
    indexx++;
    last_char = the_char;
  }
  if (last_char == '\r') {
    ret.last_was_cr = 1;
  }
  ret.stored = written;
  return ret;
}
