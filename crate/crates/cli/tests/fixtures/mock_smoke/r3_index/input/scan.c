int count_spaces(const char *text) {
  int i;
  int c = 0;
  for (i = 0; text[i] != '\0'; i++)
    if (text[i] == ' ')
      c++;
  return c;
}
