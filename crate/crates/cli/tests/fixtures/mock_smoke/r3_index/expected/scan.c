int count_spaces(nt_arr<const char> text : count(0)) {
  int i;
  int c = 0;
  for (i = 0; text[i] != '\0'; i++)
    if (text[i] == ' ')
      c++;
  return c;
}
