"""Writes the scripted answer tables used to record the replay stores.

Each table maps "<task>:<declaration>" to one answer or a list of answers;
lists are cycled to fill all requested completions, which lets a fixture
exercise the vote with minority answers."""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
FIX = os.path.dirname(HERE)


def block(orig, new):
    return f"<<<<ORIGINAL\n{orig}\n====\n>>>>REFACTORED\n{new}\n<<<<END\n"


def write(path, table):
    with open(os.path.join(FIX, path), "w") as f:
        json.dump(table, f, indent=2, sort_keys=True)
        f.write("\n")


write("golden/alloc_assign/script.json", {
    "nested-arrays:costMatrix": block(
        "long **costMatrix;",
        "arr<struct arr_of_long> costMatrix;"),
    "nested-arrays:AllocAssign": block(
        "    (long**) malloc(n * sizeof(long *));",
        "    (arr<struct arr_of_long>)\n    malloc(n * sizeof(struct arr_of_long));")
    + block(
        "    costMatrix[net] =\n      malloc((channelTracks+2) * sizeof(long));",
        "    costMatrix[net].ptr =\n      malloc((channelTracks+2) * sizeof(long));\n"
        "    costMatrix[net].len = channelTracks+2;"),
})

good = block("  unsigned char* buf,", "  arr<unsigned char> buf: count(longs * 4),")
write("golden/byte_reverse/script.json", {
    # Two of three sampled answers agree; the outlier loses the vote.
    "bounds:byteReverse": [good, good, block("  unsigned char* buf,", "  arr<unsigned char> buf: count(4),")],
})

write("golden/bin_to_ascii/script.json", {
    "bounds:vsf_ascii_bin_to_ascii": block(
        "  const char* p_in,\n  char* p_out,",
        "  arr<const char> p_in: count(in_len),\n  arr<char> p_out: count(in_len * 2),"),
})

write("golden/lua_table/script.json", {
    "bounds:countint": block(
        "  unsigned int* nums",
        "  arr<unsigned int> nums: count(count_nums),\n  int count_nums"),
    "bounds:numusehash": block("  const Table* t,", "  ptr<Table> t,")
    + block("  unsigned int* nums,", "  arr<unsigned int> nums: count(count_nums),\n  int count_nums,")
    + block("      ause += countint(keyival(n),nums);", "      ause += countint(keyival(n),nums,count_nums);"),
    "bounds:rehash": block("  Table* t,  const TValue* ek", "  ptr<Table> t, ptr<const TValue> ek")
    + block("  total += numusehash(t,nums,&na);", "  total += numusehash(t,nums,MAXABITS+1,&na);")
    + block("  na += countint(ivalue(ek),nums);", "  na += countint(ivalue(ek),nums,MAXABITS+1);"),
})

write("golden/scope_drop/script.json", {
    # `limit` is a local: not visible in the parameter list.
    "bounds:fill": block("void fill(int *dst, int n) {", "void fill(arr<int> dst : count(limit), int n) {"),
    # `m` is declared nowhere.
    "bounds:sum_prefix": block("int sum_prefix(int *v, int n) {", "int sum_prefix(arr<int> v : count(n), int n) {")
    + block("  int *w = v;", "  arr<int> w : count(m) = v;"),
    # `size` is declared nowhere; the block lands on the global.
    "bounds:touch": block("int *table;", "arr<int> table : count(size);"),
})

write("golden/conflict/script.json", {
    "bounds:init_large": block("  int *p;", "  arr<int> p : count(16);"),
    "bounds:init_small": block("  arr<int> p : count(16);", "  arr<int> p : count(8);"),
    "globals-fields:init_large": block(
        "  a->p = malloc(sizeof(int) * 16);",
        "  a->p = malloc(sizeof(int) * 16),\n  a->count_for_p = 16;"),
    "globals-fields:init_small": block(
        "  a->p = malloc(sizeof(int) * 8);",
        "  a->p = malloc(sizeof(int) * 8),\n  a->count_for_p = 8;"),
})

write("mst/script.json", {
    "bounds:print_label": block("void print_label(char *label) {", "void print_label(nt_arr<char> label : count(0)) {"),
    "bounds:clear_done": block("void clear_done(int *done, int n) {", "void clear_done(arr<int> done : count(n), int n) {"),
    "bounds:init_dists": block("void init_dists(int *dist, int n) {", "void init_dists(arr<int> dist : count(n), int n) {"),
    "bounds:find_min": block(
        "int find_min(int *dist, int *done, int n) {",
        "int find_min(arr<int> dist : count(n), arr<int> done : count(n), int n) {"),
    "bounds:copy_row": block(
        "void copy_row(int *dst, const int *src, int n) {",
        "void copy_row(arr<int> dst : count(n), arr<const int> src : count(n), int n) {"),
    "bounds:sum_weights": block("int sum_weights(int *w, int n) {", "int sum_weights(arr<int> w : count(n), int n) {"),
    "bounds:compute_mst": block(
        "int compute_mst(Vertex *g, int nvert) {\n  int *dist = malloc(nvert * sizeof(int));\n  int *done = malloc(nvert * sizeof(int));",
        "int compute_mst(arr<Vertex> g : count(nvert), int nvert) {\n"
        "  arr<int> dist : count(nvert) = malloc(nvert * sizeof(int));\n"
        "  arr<int> done : count(nvert) = malloc(nvert * sizeof(int));"),
})
