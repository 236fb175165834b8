char greeting[16];

void use_greeting(void) {
  char *g = greeting;
  g[0] = 'h';
}
