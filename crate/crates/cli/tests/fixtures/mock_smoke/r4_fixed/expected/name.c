char greeting[16];

void use_greeting(void) {
  arr<char> g : count(16) = greeting;
  g[0] = 'h';
}
