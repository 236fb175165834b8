#define MAXABITS 31
#define MAXASIZE ((unsigned int)1 << MAXABITS)
#define keyival(n) ((n)->key_val)
#define ivalue(o) ((o)->value_)
#define gnode(t,i) (&(t)->node[i])
#define sizenode(t) (1 << (t)->lsizenode)

typedef long long lua_Integer;

typedef struct lua_State lua_State;

typedef struct TValue {
  lua_Integer value_;
  int tt_;
} TValue;

typedef struct Node {
  lua_Integer key_val;
  int key_tt;
} Node;

typedef struct Table {
  unsigned int alimit;
  int lsizenode;
  Node *node;
} Table;

int luaO_ceillog2 (unsigned int x);

static unsigned int arrayindex (lua_Integer k) {
  if ((unsigned long long)k - 1u < MAXASIZE)
    return (unsigned int)k;
  else
    return 0;
}

static int countint (lua_Integer key,
  arr<unsigned int> nums: count(count_nums),
  int count_nums
) {
    unsigned int k = arrayindex(key);
    if (k != 0) {
      nums[luaO_ceillog2(k)]++;
      return 1;
    }
    else
      return 0;
}

static int numusehash (
  ptr<Table> t,
  arr<unsigned int> nums: count(count_nums),
  int count_nums,
  unsigned int* pna) {
  int totaluse = 0;
  int ause = 0;
  int i = sizenode(t);
  while (i--) {
    Node *n = gnode(t, i);
    if (n->key_tt == 3) {
      ause += countint(keyival(n),nums,count_nums);
      totaluse++;
    }
  }
  *pna += ause;
  return totaluse;
}

static void rehash(lua_State* L,
  ptr<Table> t, ptr<const TValue> ek
) {
  unsigned int nums[MAXABITS + 1];
  unsigned int na = 0;
  int total = 0;
  int i;
  for (i = 0; i <= MAXABITS; i++) nums[i] = 0;
  total += numusehash(t,nums,MAXABITS+1,&na);
  total++;
  na += countint(ivalue(ek),nums,MAXABITS+1);
  t->alimit = na;
}
