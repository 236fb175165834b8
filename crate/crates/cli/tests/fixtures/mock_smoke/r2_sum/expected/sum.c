int sum(arr<int> a : count(len), int len) {
  int i;
  int s = 0;
  for (i = 0; i < len; i++)
    s += a[i];
  return s;
}
